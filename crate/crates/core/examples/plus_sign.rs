//! Two shape splits carve out a plus sign that axis-aligned CART needs
//! depth four for.
//!
//! cargo run --example plus_sign

use shapecart::data::synth::gen_plus_sign;
use shapecart::induce::{fit, fit_cart, Hyperparams};
use shapecart::model::to_dot;

fn main() {
    let ds = gen_plus_sign(50, 1);
    let sgt = fit(&ds, &Hyperparams { max_depth: 2, ..Hyperparams::default() }).unwrap();
    println!("sgt depth 2: accuracy {:.3}, {} internal nodes", sgt.accuracy(&ds).unwrap(), sgt.stats().internal_nodes);

    for depth in 2..=4 {
        let cart = fit_cart(&ds, &Hyperparams { max_depth: depth, ..Hyperparams::default() }).unwrap();
        println!(
            "cart depth {depth}: accuracy {:.3}, {} internal nodes",
            cart.accuracy(&ds).unwrap(),
            cart.stats().internal_nodes
        );
    }
    println!("\n{}", to_dot(&sgt));
}
