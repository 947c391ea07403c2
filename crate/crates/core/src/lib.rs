//! Near neighbor-preserving dimensionality reduction for doubling subsets
//! of ℓ1.
//!
//! The crate provides Cauchy random projections, LSH-based approximate
//! r-nets, randomly shifted grid covers, the net-based and grid-based
//! embeddings built from them, a decision-version (c, R)-near-neighbor index,
//! and a harness that checks the analytic bounds empirically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ann_index;
pub mod cauchy_stats;
pub mod embedding;
pub mod error;
pub mod grid_partition;
pub mod harness;
pub mod io;
pub mod net_builder;
pub mod points;
pub mod projection;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use points::{l1_distance, l1_norm, PointSet};
pub use rng::RandomSeed;
