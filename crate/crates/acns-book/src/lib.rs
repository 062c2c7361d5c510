//! The chapters of the guide in `book/src`, included as module docs so that
//! `cargo test` compiles and runs every Rust sample in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/potential.md")]
pub mod potential {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/noise.md")]
pub mod noise {}

#[doc = include_str!("../../../book/src/stepping.md")]
pub mod stepping {}

#[doc = include_str!("../../../book/src/energy.md")]
pub mod energy {}

#[doc = include_str!("../../../book/src/dependence.md")]
pub mod dependence {}

#[doc = include_str!("../../../book/src/pressure.md")]
pub mod pressure {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}

#[doc = include_str!("../../../book/src/limitations.md")]
pub mod limitations {}
