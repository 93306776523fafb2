//! Numerical Finsler geometry: Minkowski norms, sprays and curvature,
//! Busemann–Hausdorff measures of geodesic balls, and checks of volume
//! comparison bounds on model spaces with known constants.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod connection;
pub mod curvature;
pub mod diff;
pub mod error;
pub mod measure;
pub mod models;
pub mod norms;
pub mod quad;
pub mod sampling;

pub use error::{FinslerError, Result};
pub use models::{make_model, MetricModel, ModelConfig, ModelFacts, ModelKind};
pub use norms::{ConvexBody, MinkowskiData, Point, Vector};
