//! Fitted GAR model `Y = (theta0 I + L)^{-1} Z`.

use nalgebra::DVector;

use crate::error::{GarError, Result};
use crate::graph::NormalizedLaplacian;
use crate::linalg::{log_det_shifted, EigenDecomposition, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GarModel {
    pub theta0: f64,
    pub laplacian: NormalizedLaplacian,
    /// Positive unit null vector of the Laplacian.
    pub v0: DVector<f64>,
}

impl GarModel {
    pub fn new(theta0: f64, laplacian: NormalizedLaplacian, v0: DVector<f64>) -> Result<Self> {
        if !(theta0 > 0.0) || !theta0.is_finite() {
            return Err(GarError::NonPd(theta0));
        }
        let p = laplacian.entries.nrows();
        if v0.len() != p {
            return Err(GarError::DimensionMismatch(format!("v0 has length {}, L is {p}x{p}", v0.len())));
        }
        if v0.iter().any(|&x| !(x > 0.0)) {
            return Err(GarError::InvalidInput("v0 must be strictly positive".into()));
        }
        let norm = v0.norm();
        Ok(Self { theta0, laplacian, v0: v0 / norm })
    }

    pub fn p(&self) -> usize {
        self.v0.len()
    }

    pub fn l(&self) -> &SymMatrix {
        &self.laplacian.entries
    }

    /// `theta0 I + L`.
    pub fn root_precision(&self) -> SymMatrix {
        let mut m = self.laplacian.entries.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.theta0;
        }
        m
    }

    /// `Omega = (theta0 I + L)^2`.
    pub fn precision(&self) -> SymMatrix {
        let r = self.root_precision();
        &r * &r
    }

    /// `Sigma = (theta0 I + L)^{-2}`.
    pub fn covariance(&self) -> Result<SymMatrix> {
        let eig = EigenDecomposition::new(&self.root_precision());
        if eig.min() <= 0.0 {
            return Err(GarError::NonPd(eig.min()));
        }
        Ok(eig.compose(&eig.d.map(|x| 1.0 / (x * x))))
    }

    /// `(theta0 I + L)^{-1}`, the map from innovations to signals.
    pub fn transfer(&self) -> Result<SymMatrix> {
        let eig = EigenDecomposition::new(&self.root_precision());
        if eig.min() <= 0.0 {
            return Err(GarError::NonPd(eig.min()));
        }
        Ok(eig.compose(&eig.d.map(|x| 1.0 / x)))
    }

    /// `log det(theta0 I + L)`.
    pub fn log_det_root(&self) -> Result<f64> {
        let eig = EigenDecomposition::new(&self.laplacian.entries);
        log_det_shifted(self.theta0, eig.d.as_slice())
    }
}
