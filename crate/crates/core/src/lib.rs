//! Shape generalized decision trees.
//!
//! Internal nodes route samples through learned *shape functions*: a small
//! binning tree over one feature (or a pair of features) composed with a
//! bin-to-branch lookup. Trees are grown greedily top-down, may branch
//! multi-way, and can be refined afterwards by alternating node refits.

pub mod assign;
pub mod cli;
pub mod data;
pub mod impurity;
pub mod induce;
pub mod inner_tree;
pub mod model;
pub mod node;
pub mod refine;
pub mod split;
pub mod verify;


/// Deterministically derives a child seed (splitmix64 finaliser).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
