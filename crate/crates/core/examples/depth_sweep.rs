//! Training accuracy by depth for each model family on the synthetic sets.
//!
//! cargo run --release --example depth_sweep

use shapecart::cli::bench_table;
use shapecart::data::synth::{gen_bars, gen_plus_sign};
use shapecart::induce::{Hyperparams, Variant};

fn main() {
    let depths: Vec<usize> = (2..=6).collect();
    for (name, ds) in [("plus", gen_plus_sign(50, 0)), ("bars(5)", gen_bars(5, 400, 0))] {
        let table = bench_table(&ds, &Variant::ALL, &depths, &Hyperparams::default()).unwrap();
        println!("{name}");
        println!("depth {}", Variant::ALL.map(|v| format!("{:>7}", v.name())).join(""));
        for (d, row) in depths.iter().zip(table) {
            println!("{d:>5} {}", row.iter().map(|a| format!("{a:>7.3}")).collect::<String>());
        }
    }
}
