//! ADMM solvers for the three sub-problems of the fitting pipeline:
//! the Laplacian given `(theta0, v0)`, the joint `(theta0, L)` given `v0`,
//! and a strictly positive null vector of a PSD matrix.

pub mod eigvec;
pub mod joint;
pub mod laplacian;

use nalgebra::DVector;
use serde::Serialize;

use crate::graph::{NormalizedLaplacian, NullSet, SpaceTag};
use crate::linalg::{max_asymmetry, EigenDecomposition, SymMatrix};

/// Smallest step size used by the automatic `rho = max(lambda, RHO_FLOOR)` rule.
pub const RHO_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmmSettings {
    /// Fixed penalty parameter; `None` means `max(lambda, RHO_FLOOR)`.
    pub rho: Option<f64>,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self { rho: None, eps_abs: 1e-5, eps_rel: 1e-3, max_iter: 5000 }
    }
}

impl AdmmSettings {
    pub fn rho_for(&self, lambda: f64) -> f64 {
        self.rho.unwrap_or_else(|| lambda.max(RHO_FLOOR))
    }

    /// Settings for the positive-eigenvector solver, which uses `rho = 1` unless overridden.
    pub fn for_eigvec(&self) -> Self {
        Self { rho: Some(self.rho.unwrap_or(1.0)), ..self.clone() }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.rho.is_none_or(|r| r > 0.0 && r.is_finite())
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::GarError::InvalidInput(format!("invalid ADMM settings {self:?}")))
        }
    }
}

/// Per-iteration residual history of one ADMM run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AdmmTrace {
    pub rho: f64,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub eps_primal: Vec<f64>,
    pub eps_dual: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Outer iterations whose inner `(phi, Z)` loop hit its cap (joint solver only).
    pub inner_cap_hits: usize,
}

impl AdmmTrace {
    pub(crate) fn new(rho: f64) -> Self {
        Self { rho, ..Default::default() }
    }

    pub(crate) fn record(&mut self, primal: f64, dual: f64, eps_primal: f64, eps_dual: f64) -> bool {
        self.primal.push(primal);
        self.dual.push(dual);
        self.eps_primal.push(eps_primal);
        self.eps_dual.push(eps_dual);
        self.iterations += 1;
        self.converged = primal <= eps_primal && dual <= eps_dual;
        self.converged
    }

    /// `max(primal / eps_primal, dual / eps_dual)` of the latest iteration; `<= 1` means converged.
    pub fn last_ratio(&self) -> f64 {
        match (self.primal.last(), self.dual.last(), self.eps_primal.last(), self.eps_dual.last()) {
            (Some(p), Some(d), Some(ep), Some(ed)) => (p / ep).max(d / ed),
            _ => f64::INFINITY,
        }
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            converged: self.converged,
            iterations: self.iterations,
            primal: self.primal.last().copied().unwrap_or(f64::NAN),
            dual: self.dual.last().copied().unwrap_or(f64::NAN),
            eps_primal: self.eps_primal.last().copied().unwrap_or(f64::NAN),
            eps_dual: self.eps_dual.last().copied().unwrap_or(f64::NAN),
            inner_cap_hits: self.inner_cap_hits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSummary {
    pub converged: bool,
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub inner_cap_hits: usize,
}

/// Measured constraint violations of an estimated Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub asymmetry: f64,
    /// Largest off-diagonal entry clipped at zero from below.
    pub max_positive_off_diagonal: f64,
    pub min_eigenvalue: f64,
    /// `||L v0||_2` when the estimate carries a `v0`.
    pub null_residual: Option<f64>,
}

impl Certificate {
    pub fn measure(l: &SymMatrix, v0: Option<&DVector<f64>>) -> Self {
        let p = l.nrows();
        let mut max_pos = 0.0f64;
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    max_pos = max_pos.max(l[(i, j)]);
                }
            }
        }
        let min_eigenvalue = if p == 0 { 0.0 } else { EigenDecomposition::new(l).min() };
        Self {
            asymmetry: max_asymmetry(l),
            max_positive_off_diagonal: max_pos,
            min_eigenvalue,
            null_residual: v0.map(|v| (l * v).norm()),
        }
    }
}

/// Candidate Laplacian with its parameter-space tag and constraint certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianEstimate {
    pub laplacian: NormalizedLaplacian,
    pub certificate: Certificate,
}

impl LaplacianEstimate {
    pub fn entries(&self) -> &SymMatrix {
        &self.laplacian.entries
    }

    /// Zero the pinned entries of a raw iterate, tag it, and measure it.
    pub(crate) fn finish(mut l: SymMatrix, null_set: Option<&NullSet>, v0: Option<&DVector<f64>>) -> Self {
        if let Some(null) = null_set {
            let p = l.nrows();
            for j in 0..p {
                for i in 0..p {
                    if null.is_null(i, j) {
                        l[(i, j)] = 0.0;
                    }
                }
            }
        }
        let v0 = v0.filter(|v| v.norm() > 0.0);
        let tag = match (null_set, v0) {
            (Some(null), Some(v)) => SpaceTag::Final { null_set: null.clone(), v0: v.clone() },
            (Some(null), None) => SpaceTag::Constrained(null.clone()),
            (None, _) => SpaceTag::Relaxed,
        };
        let certificate = Certificate::measure(&l, v0);
        Self { laplacian: NormalizedLaplacian { entries: l, tag }, certificate }
    }
}

/// Exact minimizer over `x >= 0` of `-2 log(theta + x) + (rho / 2) (x - lambda)^2`, per eigenvalue.
pub fn z_update_eigen_shrink(theta0: f64, rho: f64, eigvals: &[f64]) -> Vec<f64> {
    eigvals.iter().map(|&lambda| (log_barrier_root(theta0 + lambda, rho) - theta0).max(0.0)).collect()
}

/// Positive root `y` of `rho y^2 - rho a y - 2 = 0`, evaluated without cancellation.
pub(crate) fn log_barrier_root(a: f64, rho: f64) -> f64 {
    let disc = (rho * rho * a * a + 8.0 * rho).sqrt();
    if a >= 0.0 {
        (rho * a + disc) / (2.0 * rho)
    } else {
        4.0 / (disc - rho * a)
    }
}

/// `W_ii = -(L_ii + V_ii)`; `W_ij = max(0, -(L_ij + V_ij))` off the diagonal, `0` on the null set.
pub(crate) fn w_update(l: &SymMatrix, v: &SymMatrix, null_set: Option<&NullSet>) -> SymMatrix {
    let p = l.nrows();
    SymMatrix::from_fn(p, p, |i, j| {
        let x = -(l[(i, j)] + v[(i, j)]);
        if i == j {
            x
        } else if null_set.is_some_and(|n| n.is_null(i, j)) {
            0.0
        } else {
            x.max(0.0)
        }
    })
}

/// `||U + V + r v0^T||_F` without forming the outer product.
pub(crate) fn dual_scale(u: &SymMatrix, v: &SymMatrix, r: &DVector<f64>, v0: &DVector<f64>) -> f64 {
    let s = u + v;
    let sq = crate::linalg::frobenius_sq(&s) + 2.0 * r.dot(&(&s * v0)) + r.norm_squared() * v0.norm_squared();
    sq.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn z_shrink_examples() {
        let out = z_update_eigen_shrink(1.0, 1.0, &[0.0, 5.0]);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], (6.0 + 44f64.sqrt()) / 2.0 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 5.316624790355400, epsilon = 1e-12);
    }

    #[test]
    fn z_shrink_large_theta_clamps_nonpositive() {
        let out = z_update_eigen_shrink(1e8, 1.0, &[0.0, -0.5, -3.0]);
        assert!(out.iter().all(|&x| x.abs() < 1e-7), "{out:?}");
    }

    #[test]
    fn barrier_root_branches_agree() {
        for &a in &[-50.0, -1.0, -1e-3, 0.0, 1e-3, 2.0, 40.0] {
            for &rho in &[0.01, 0.3, 7.0] {
                let y = log_barrier_root(a, rho);
                assert!(y > 0.0);
                assert_abs_diff_eq!(rho * y * y - rho * a * y - 2.0, 0.0, epsilon = 1e-9 * (1.0 + rho * y * y));
            }
        }
    }

    #[test]
    fn w_update_pins_null_set() {
        let l = SymMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 1.0]);
        let v = SymMatrix::zeros(2, 2);
        let w = w_update(&l, &v, None);
        assert_eq!(w, SymMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.4, -1.0]));
        let null = NullSet::all(2);
        let w = w_update(&l, &v, Some(&null));
        assert_eq!(w, SymMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]));
        let l = SymMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        assert_eq!(w_update(&l, &v, None)[(0, 1)], 0.0);
    }

    #[test]
    fn dual_scale_matches_explicit() {
        let u = SymMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let v = SymMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        let r = DVector::from_vec(vec![0.3, -0.7]);
        let v0 = DVector::from_vec(vec![0.6, 0.8]);
        let explicit = (&u + &v + &r * v0.transpose()).norm();
        assert_abs_diff_eq!(dual_scale(&u, &v, &r, &v0), explicit, epsilon = 1e-14);
    }
}
