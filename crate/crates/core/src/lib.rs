//! Explicit extension of ball diffeomorphisms to global diffeomorphisms of
//! ℝⁿ, multi-ball gluing, and numerical verification of the results.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod extension;
pub mod flows;
pub mod geom;
pub mod glue;
pub mod linearize;
pub mod maps;
pub mod verify;

pub use error::{Error, Result};
