//! Bivariate shape functions fit XOR in one node; no univariate split can.
//!
//! cargo run --example bivariate_xor

use shapecart::data::one_hot_view;
use shapecart::data::synth::gen_xor;
use shapecart::induce::{fit_variant, Hyperparams, Variant};
use shapecart::node::NodeData;
use shapecart::split::select_split;

fn main() {
    let ds = gen_xor(1000, 2, 7);
    let base = Hyperparams { max_depth: 1, inner_max_leaf_nodes: 32, ..Hyperparams::default() };

    // Candidate pairs at the root, ranked by how much their univariate
    // partitions disagree.
    let m = one_hot_view(&ds);
    let node = NodeData::root(&m, ds.targets());
    let sp = Hyperparams { pair_limit: 6, ..base }.split_params();
    let r = select_split(&node, m.groups(), &sp, 0).unwrap();
    println!("pairs in rank order: {:?}", r.candidate_pairs);
    println!("chosen split: {:?}, objective {:.2}\n", r.shape.features, r.objective);

    for v in [Variant::Sgt, Variant::S2gt] {
        let (max_arity, pair_limit) = v.arity_and_pairs();
        let hp = Hyperparams { max_arity, pair_limit: pair_limit.max(6 * usize::from(pair_limit > 0)), ..base };
        let model = fit_variant(&ds, v, &hp).unwrap();
        println!("{v} depth 1: accuracy {:.3}", model.accuracy(&ds).unwrap());
    }
}
