//! Optimal and heuristic pivot sequences for Gaussian elimination on small
//! sparsity patterns over the {0,∗} semiring.
//!
//! The crate is `no_std` with `alloc`. Files, reports, threads and the
//! command-line driver live in the `pivots` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod atlas;
pub mod canon;
pub mod dqn;
pub mod error;
pub mod matrix;
pub mod stats;
pub mod strategy;

pub use atlas::{Atlas, AtlasChain, ClassRecord, CostSummary, Mode};
pub use canon::{CanonicalKey, Canonizer, ClassWeight};
pub use error::{Error, Result};
pub use matrix::{BitMatrix, CostModel, Entry, Pivot, Profile};
