//! Grid-free sparse inverse problems over measures: reconstruction of point sources,
//! dual certificates, unbalanced transport metrics and a closed-form sensor-design criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificates;
pub mod design;
pub mod error;
pub mod forward;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod metrics;
pub mod solvers;

pub use error::{Result, SikError};
