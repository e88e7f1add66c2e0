//! Semi-structured function-on-function regression.
//!
//! The model predicts a functional outcome `y(t)` from functional inputs
//! `x_j(s)` through an additive combination of an interpretable part
//! (tensor-product spline weight surfaces integrated against the inputs)
//! and an optional deep network part. After training, post-hoc
//! orthogonalization projects the deep predictions out of the structured
//! basis span so the weight surfaces stay interpretable.

pub mod basis;
pub mod dataio;
pub mod deep;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod pho;
pub mod simgen;
pub mod structured;
pub mod training;

pub use error::{Error, Result};
pub use grid::{Grid, trapezoid_weights};
pub use basis::BasisSystem;
pub use dataio::{FunctionalDataset, Standardizer};
pub use model::SemiStructuredModel;
