//! Post-hoc refinement: alternate node refits bottom-up, pruning what no
//! longer pays for itself.
//!
//! cargo run --example tao_refine

use shapecart::data::synth::gen_random_classification;
use shapecart::induce::{fit, Hyperparams};
use shapecart::refine::{tao_refine_traced, TaoParams};

fn main() {
    let ds = gen_random_classification(400, 4, 3, 11);
    let hp = Hyperparams { max_depth: 5, ..Hyperparams::default() };
    let greedy = fit(&ds, &hp).unwrap();
    println!("greedy: accuracy {:.4}, {} leaves", greedy.accuracy(&ds).unwrap(), greedy.stats().leaves);

    for reg in [0.0, 1e-3, 1e-2] {
        let (m, report) = tao_refine_traced(&greedy, &ds, &TaoParams { passes: 5, reg }, &hp).unwrap();
        println!(
            "reg {reg:<6}: accuracy {:.4}, {} leaves, {} refits, {} prunes, objective by pass {:.4?}",
            m.accuracy(&ds).unwrap(),
            m.stats().leaves,
            report.refits,
            report.prunes,
            report.objectives
        );
    }
}
