//! Dense symmetric kernels shared by the solvers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GarError, Result};

/// Dense symmetric `p x p` matrix.
pub type SymMatrix = DMatrix<f64>;

/// Symmetric eigendecomposition `M = Q diag(d) Q^T` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Orthonormal eigenvectors, one per column.
    pub q: DMatrix<f64>,
    /// Eigenvalues in ascending order.
    pub d: DVector<f64>,
}

impl EigenDecomposition {
    pub fn new(m: &SymMatrix) -> Self {
        let p = m.nrows();
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let d = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut q = DMatrix::zeros(p, p);
        for (dst, &src) in order.iter().enumerate() {
            q.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { q, d }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// `Q^T M Q`.
    pub fn to_eigenbasis(&self, m: &SymMatrix) -> SymMatrix {
        self.q.tr_mul(m) * &self.q
    }

    /// `Q M Q^T`.
    pub fn from_eigenbasis(&self, m: &SymMatrix) -> SymMatrix {
        &self.q * m * self.q.transpose()
    }

    /// `Q diag(values) Q^T`.
    pub fn compose(&self, values: &DVector<f64>) -> SymMatrix {
        let mut scaled = self.q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[j];
        }
        let mut out = scaled * self.q.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.compose(&self.d)
    }

    pub fn min(&self) -> f64 {
        self.d[0]
    }

    pub fn max(&self) -> f64 {
        self.d[self.d.len() - 1]
    }
}

/// Replace `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut SymMatrix) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn max_asymmetry(m: &SymMatrix) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        for i in (j + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Sample covariance with divisor `n`, plus the sample mean it was centered on.
#[derive(Debug, Clone, Serialize)]
pub struct SampleCovariance {
    #[serde(skip)]
    pub sigma_hat: SymMatrix,
    pub n: usize,
    pub p: usize,
    #[serde(skip)]
    pub y_bar: DVector<f64>,
}

impl SampleCovariance {
    /// Wrap an externally computed covariance (for instance a population one).
    pub fn from_matrix(sigma_hat: SymMatrix, n: usize) -> Result<Self> {
        if !sigma_hat.is_square() {
            return Err(GarError::DimensionMismatch(format!(
                "covariance is {}x{}",
                sigma_hat.nrows(),
                sigma_hat.ncols()
            )));
        }
        let p = sigma_hat.nrows();
        let mut sigma_hat = sigma_hat;
        symmetrize(&mut sigma_hat);
        Ok(Self { sigma_hat, n, p, y_bar: DVector::zeros(p) })
    }

    pub fn trace(&self) -> f64 {
        self.sigma_hat.trace()
    }
}

/// `(1/n) sum_k (y_k - y_bar)(y_k - y_bar)^T` over the rows of `data`.
///
/// With `center == false` the mean is taken to be zero.
pub fn sample_covariance(data: &DMatrix<f64>, center: bool) -> Result<SampleCovariance> {
    let (n, p) = data.shape();
    if n < 2 || p < 1 {
        return Err(GarError::DimensionMismatch(format!(
            "need at least 2 rows and 1 column, got {n}x{p}"
        )));
    }
    let y_bar = if center {
        DVector::from_iterator(p, data.column_iter().map(|c| c.sum() / n as f64))
    } else {
        DVector::zeros(p)
    };
    let mut x = data.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(-y_bar[j]);
    }
    let mut sigma_hat = x.tr_mul(&x) / n as f64;
    symmetrize(&mut sigma_hat);
    Ok(SampleCovariance { sigma_hat, n, p, y_bar })
}

/// Solve `C L + L C + D = 0` for symmetric `L`, given the eigendecomposition of `C`.
///
/// In the eigenbasis the system is diagonal: `L~_ij = -D~_ij / (d_i + d_j)`.
pub fn sylvester_eig_solve(c_eig: &EigenDecomposition, d: &SymMatrix) -> Result<SymMatrix> {
    let p = c_eig.dim();
    if d.nrows() != p || d.ncols() != p {
        return Err(GarError::DimensionMismatch(format!(
            "C is {p}x{p} but D is {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    let mut tilde = c_eig.to_eigenbasis(d);
    for j in 0..p {
        for i in 0..p {
            let sum = c_eig.d[i] + c_eig.d[j];
            if sum <= 1e-14 {
                return Err(GarError::SingularPair { i, j, sum });
            }
            tilde[(i, j)] = -tilde[(i, j)] / sum;
        }
    }
    let mut l = c_eig.from_eigenbasis(&tilde);
    symmetrize(&mut l);
    Ok(l)
}

/// `sum_j log(theta + lambda_j)`, i.e. `log det(theta I + Z)` from the eigenvalues of `Z`.
pub fn log_det_shifted(theta: f64, eigenvalues: &[f64]) -> Result<f64> {
    eigenvalues.iter().try_fold(0.0, |acc, &lambda| {
        let shifted = theta + lambda;
        if shifted <= 0.0 || !shifted.is_finite() {
            Err(GarError::NonPositiveEigen(shifted))
        } else {
            Ok(acc + shifted.ln())
        }
    })
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}
