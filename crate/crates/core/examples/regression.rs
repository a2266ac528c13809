//! Regression with the mse criterion on a noisy cosine.
//!
//! cargo run --example regression

use shapecart::data::synth::gen_bars_regression;
use shapecart::impurity::Criterion;
use shapecart::induce::{fit, fit_cart, Hyperparams};

fn main() {
    let ds = gen_bars_regression(4, 800, 0.2, 3);
    for depth in 1..=3 {
        let hp = Hyperparams { criterion: Criterion::Mse, max_depth: depth, ..Hyperparams::default() };
        let sgt = fit(&ds, &hp).unwrap();
        let cart = fit_cart(&ds, &hp).unwrap();
        println!(
            "depth {depth}: sgt mse {:.4} ({} nodes), cart mse {:.4} ({} nodes)",
            sgt.mse(&ds).unwrap(),
            sgt.stats().internal_nodes,
            cart.mse(&ds).unwrap(),
            cart.stats().internal_nodes
        );
    }
}
