//! Three-way branching: a feature whose three intervals each hold one class
//! is split once instead of twice.
//!
//! cargo run --example multiway

use shapecart::data::Dataset;
use shapecart::induce::{fit_variant, Hyperparams, Variant};

fn main() {
    let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![i as f64 / 300.0, ((i * 37) % 101) as f64]).collect();
    let labels = rows.iter().map(|r| (r[0] * 3.0) as usize).collect();
    let ds = Dataset::numeric_classification(&["x", "noise"], &rows, labels, 3).unwrap();

    for v in [Variant::Sgt, Variant::Sgt3] {
        let m = fit_variant(&ds, v, &Hyperparams::for_variant(v)).unwrap();
        let s = m.stats();
        println!(
            "{v}: accuracy {:.3}, {} internal nodes, arities {:?}",
            m.accuracy(&ds).unwrap(),
            s.internal_nodes,
            s.arity_histogram
        );
    }

    // A branching penalty above the gain of the third branch forces binary splits.
    let hp = Hyperparams { branching_penalty: 1e6, ..Hyperparams::for_variant(Variant::Sgt3) };
    let m = fit_variant(&ds, Variant::Sgt3, &hp).unwrap();
    println!("sgt3 with a large penalty: arities {:?}", m.stats().arity_histogram);
}
