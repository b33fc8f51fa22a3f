//! Active learning for point-cloud semantic segmentation.
//!
//! Points are scored by a hierarchical margin (the point's own prediction
//! margin plus the margins of averaged predictions over growing spherical
//! neighborhoods), picked greedily with feature-distance suppression, and
//! labeled points train a mean-teacher segmenter that also learns from its
//! own confident predictions.

// range checks written as `!(x > 0.0)` also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod selection;
pub mod spatial;
pub mod trainer;
pub mod uncertainty;

pub use error::{Error, Result};
pub use model::{FeatureField, PointCloud, ProbabilityField, SelectionState};
