//! Every CART tree is a shape tree: each threshold becomes a two-bin shape
//! function with identical routing.
//!
//! cargo run --example convert_cart

use shapecart::data::synth::gen_random_classification;
use shapecart::induce::{fit_cart, from_cart, Hyperparams};

fn main() {
    let ds = gen_random_classification(500, 3, 2, 9);
    let cart = fit_cart(&ds, &Hyperparams { max_depth: 6, ..Hyperparams::default() }).unwrap();
    let shape = from_cart(&cart);
    let same = cart.predict(&ds).unwrap() == shape.predict(&ds).unwrap();
    println!("cart:      {:?}", cart.stats());
    println!("converted: {:?}", shape.stats());
    println!("identical predictions: {same}");
}
