//! The guide in `book/` is plain mdbook, which cannot run listings that
//! depend on workspace crates. Each chapter is included here as a module doc
//! so `cargo test` runs its listings as doctests and the book cannot drift
//! from the code.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/microstructures.md")]
pub mod microstructures {}
#[doc = include_str!("../../../book/src/influence-tensors.md")]
pub mod influence_tensors {}
#[doc = include_str!("../../../book/src/equivalent-inclusion.md")]
pub mod equivalent_inclusion {}
#[doc = include_str!("../../../book/src/full-field.md")]
pub mod full_field {}
#[doc = include_str!("../../../book/src/control-variates.md")]
pub mod control_variates {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
