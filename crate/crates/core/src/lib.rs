//! Graphical autoregressive (GAR) model fitting.
//!
//! Observations are modelled as `Y = (theta0 I + L)^{-1} Z` with `Z` white noise and
//! `L` a normalized graph Laplacian. The crate estimates `(theta0, L)` by penalized
//! maximum likelihood with ADMM solvers, selects tuning parameters by eBIC, scores fits
//! with a parametric-bootstrap goodness-of-fit measure, and ships a simulator for
//! reproducing recovery experiments.

pub mod admm;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod par;
pub mod rng;
pub mod simulate;

pub use error::{GarError, Result};
pub use model::GarModel;
