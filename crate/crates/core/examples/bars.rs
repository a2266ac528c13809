//! One node versus many: alternating bands on a single feature.
//!
//! cargo run --example bars -- 8

use shapecart::induce::Hyperparams;
use shapecart::verify::theorem2_gap;

fn main() {
    let omega: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let hp = Hyperparams { inner_max_leaf_nodes: (omega + 2).max(16), ..Hyperparams::default() };
    let g = theorem2_gap(omega, &hp).expect("leaf budget covers the bands");
    println!("omega = {omega}");
    println!("shape tree: {} node(s), accuracy {:.3}", g.sgt_nodes, g.sgt_accuracy);
    println!("cart:       {} node(s), accuracy {:.3}", g.cart_nodes, g.cart_accuracy);
}
