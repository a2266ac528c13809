//! Model files: save, reload, and check predictions survive unchanged.
//!
//! cargo run --example save_load

use shapecart::data::synth::gen_xor;
use shapecart::induce::{fit, Hyperparams};
use shapecart::model::SgtModel;

fn main() {
    let ds = gen_xor(300, 0, 5);
    let hp = Hyperparams { pair_limit: 1, max_depth: 2, ..Hyperparams::default() };
    let m = fit(&ds, &hp).unwrap();

    let path = std::env::temp_dir().join("xor.sgt.json");
    m.save(&path).unwrap();
    let back = SgtModel::load(&path).unwrap();
    assert_eq!(m.predict(&ds).unwrap(), back.predict(&ds).unwrap());
    println!("wrote {} ({} bytes); reloaded model predicts identically", path.display(), m.to_json().len());
    print!("{}", back.stats().to_key_values());
}
