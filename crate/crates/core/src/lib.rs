//! Computational toolkit for Littlewood-Paley square functions over
//! arbitrary disjoint frequency families with values in `ℓ^r_d` lattices.

mod error;

pub mod corpus;
pub mod experiments;
pub mod fixtures;
pub mod interval;
pub mod kernel;
pub mod lattice;
pub mod maximal;
pub mod quad;
pub mod rademacher;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
