//! Mass-Volume (MV) curve analysis for unsupervised anomaly ranking.
//!
//! The crate estimates MV curves of scoring functions from data, builds
//! smoothed-bootstrap confidence bands around them, and learns piecewise
//! constant scoring functions from adaptively chosen minimum-volume sets
//! (the A-Rank procedure).
//!
//! Module map:
//!
//! - [`curve`], [`data`], [`rng`]: shared domain types and step-curve arithmetic.
//! - [`scoring`]: the [`Scorer`] catalogue and mixture simulation.
//! - [`volume`]: Lebesgue volumes of score level sets.
//! - [`mvcurve`]: empirical MV curves and closed-form optimal curves.
//! - [`kde`]: biweight-smoothed score distributions.
//! - [`bootstrap`]: smoothed bootstrap confidence bands.
//! - [`minvol`]: dyadic histograms and empirical minimum-volume sets.
//! - [`arank`]: adaptive MV* estimation and the A-Rank scoring model.
//! - [`cli`]: command implementations behind the `mvrank` binary.

pub mod arank;
pub mod bootstrap;
pub mod cli;
pub mod curve;
pub mod data;
pub mod error;
pub mod io;
pub mod kde;
pub mod minvol;
pub mod mvcurve;
pub mod rng;
pub mod scoring;
pub mod volume;

pub use curve::StepCurve;
pub use data::{BoundingBox, Dataset};
pub use error::{Error, Result};
pub use rng::RandomSource;
pub use scoring::Scorer;
