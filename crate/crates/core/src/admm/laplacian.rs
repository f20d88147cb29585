//! ADMM for the Laplacian with `theta0` and `v0` held fixed.
//!
//! Minimizes `trace((theta0 I + L)^2 S) - 2 log det(theta0 I + Z) + 2 lambda ||L||_{1,off}`
//! subject to `L = Z`, `L = -W`, `L v0 = 0`, `Z` PSD and `W_ij >= 0` off the diagonal.
//! With a null set the W-update also pins the listed entries to zero
//! (used with `lambda = 0` for the constrained refit).

use nalgebra::DVector;

use super::{dual_scale, w_update, z_update_eigen_shrink, AdmmSettings, AdmmTrace, LaplacianEstimate};
use crate::error::{GarError, Result};
use crate::graph::NullSet;
use crate::linalg::{frobenius_sq, sylvester_eig_solve, EigenDecomposition, SampleCovariance, SymMatrix};

/// Primal and scaled dual variables of the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub l: SymMatrix,
    pub z: SymMatrix,
    pub w: SymMatrix,
    pub u: SymMatrix,
    pub v: SymMatrix,
    pub r: DVector<f64>,
}

impl SplitState {
    pub fn zeros(p: usize) -> Self {
        let z = SymMatrix::zeros(p, p);
        Self { l: z.clone(), z: z.clone(), w: z.clone(), u: z.clone(), v: z, r: DVector::zeros(p) }
    }

    pub fn p(&self) -> usize {
        self.l.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct LaplacianProblem<'a> {
    pub sigma_hat: &'a SampleCovariance,
    pub theta0: f64,
    /// May be the zero vector, which drops the `L v0 = 0` constraint.
    pub v0: &'a DVector<f64>,
    pub lambda: f64,
    pub null_set: Option<&'a NullSet>,
}

#[derive(Debug, Clone)]
pub struct LaplacianSolve {
    pub estimate: LaplacianEstimate,
    pub trace: AdmmTrace,
    /// Final (or best, when not converged) iterate, reusable as a warm start.
    pub state: SplitState,
}

pub fn solve_l_given_theta_v0(
    problem: &LaplacianProblem<'_>,
    settings: &AdmmSettings,
    warm_start: Option<&SplitState>,
) -> Result<LaplacianSolve> {
    settings.validate()?;
    let sigma = &problem.sigma_hat.sigma_hat;
    let p = sigma.nrows();
    let (theta0, lambda, v0) = (problem.theta0, problem.lambda, problem.v0);
    if !(theta0 > 0.0) || !(lambda >= 0.0) {
        return Err(GarError::InvalidInput(format!("need theta0 > 0 and lambda >= 0, got {theta0}, {lambda}")));
    }
    if v0.len() != p || problem.null_set.is_some_and(|n| n.p() != p) {
        return Err(GarError::DimensionMismatch(format!("problem dimension is {p}")));
    }
    if problem.null_set.is_some() && lambda != 0.0 {
        return Err(GarError::InvalidInput("a null set requires lambda = 0".into()));
    }
    if let Some(ws) = warm_start {
        if ws.p() != p {
            return Err(GarError::DimensionMismatch(format!("warm start is {}x{}, problem is {p}x{p}", ws.p(), ws.p())));
        }
    }

    let rho = settings.rho_for(lambda);
    let mut c = sigma + SymMatrix::identity(p, p) * rho + (v0 * v0.transpose()) * (0.5 * rho);
    crate::linalg::symmetrize(&mut c);
    let c_eig = EigenDecomposition::new(&c);

    // 2 theta0 S - lambda J~, with J~ = 2 (1 1^T - I)
    let mut base = sigma * (2.0 * theta0);
    if lambda > 0.0 {
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    base[(i, j)] -= 2.0 * lambda;
                }
            }
        }
    }

    let abs_primal = ((p * (2 * p + 1)) as f64).sqrt() * settings.eps_abs;
    let abs_dual = p as f64 * settings.eps_abs;

    let mut state = warm_start.cloned().unwrap_or_else(|| SplitState::zeros(p));
    let mut trace = AdmmTrace::new(rho);
    let mut best: Option<(f64, SplitState)> = None;

    for k in 1..=settings.max_iter {
        let rv = &state.r * v0.transpose();
        let d = &base - (&state.z - &state.u) * rho + (&state.w + &state.v) * rho + (&rv + rv.transpose()) * (0.5 * rho);
        let l = sylvester_eig_solve(&c_eig, &d)?;

        let shifted = EigenDecomposition::new(&(&l + &state.u));
        let shrunk = z_update_eigen_shrink(theta0, rho, shifted.d.as_slice());
        let z = shifted.compose(&DVector::from_vec(shrunk));
        let w = w_update(&l, &state.v, problem.null_set);

        let lz = &l - &z;
        let lw = &l + &w;
        let lv = &l * v0;
        state.u += &lz;
        state.v += &lw;
        state.r += &lv;

        let primal = (frobenius_sq(&lz) + frobenius_sq(&lw) + lv.norm_squared()).sqrt();
        let dual = rho * (&state.z - &z + &w - &state.w).norm();
        let eps_primal = abs_primal
            + settings.eps_rel * (2.0 * frobenius_sq(&l) + lv.norm_squared()).sqrt().max((frobenius_sq(&z) + frobenius_sq(&w)).sqrt());
        let eps_dual = abs_dual + settings.eps_rel * rho * dual_scale(&state.u, &state.v, &state.r, v0);
        if !primal.is_finite() || !dual.is_finite() {
            return Err(GarError::NonFiniteObjective(k));
        }

        state.l = l;
        state.z = z;
        state.w = w;
        if trace.record(primal, dual, eps_primal, eps_dual) {
            break;
        }
        let ratio = trace.last_ratio();
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, state.clone()));
        }
    }

    if !trace.converged {
        if let Some((_, s)) = best {
            state = s;
        }
    }
    let nonzero_v0 = (v0.norm() > 0.0).then_some(v0);
    let estimate = LaplacianEstimate::finish(state.l.clone(), problem.null_set, nonzero_v0);
    Ok(LaplacianSolve { estimate, trace, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cov(m: SymMatrix) -> SampleCovariance {
        SampleCovariance::from_matrix(m, 100).unwrap()
    }

    fn tight() -> AdmmSettings {
        AdmmSettings { rho: Some(1.0), eps_abs: 1e-9, eps_rel: 1e-9, max_iter: 20_000 }
    }

    #[test]
    fn identity_covariance_large_penalty_gives_zero() {
        let s = cov(SymMatrix::identity(3, 3));
        let v0 = DVector::zeros(3);
        let prob = LaplacianProblem { sigma_hat: &s, theta0: 1.0, v0: &v0, lambda: 1.0, null_set: None };
        let out = solve_l_given_theta_v0(&prob, &AdmmSettings::default(), None).unwrap();
        assert!(out.trace.converged);
        assert!(out.estimate.entries().amax() < 1e-3, "{}", out.estimate.entries());
    }

    #[test]
    fn all_pinned_gives_diagonal_scalar_optimum() {
        // diagonal entry minimizes (theta + x)^2 s / 2 - log(theta + x) over x >= 0,
        // i.e. theta + x = 1 / sqrt(s) when that exceeds theta
        let s = cov(SymMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.64]));
        let v0 = DVector::zeros(2);
        let null = NullSet::all(2);
        let prob = LaplacianProblem { sigma_hat: &s, theta0: 1.0, v0: &v0, lambda: 0.0, null_set: Some(&null) };
        let out = solve_l_given_theta_v0(&prob, &tight(), None).unwrap();
        assert!(out.trace.converged);
        let l = out.estimate.entries();
        assert_eq!(l[(0, 1)], 0.0);
        assert_abs_diff_eq!(l[(0, 0)], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(l[(1, 1)], 0.25, epsilon = 1e-6);
    }

    #[test]
    fn rejects_penalty_with_null_set() {
        let s = cov(SymMatrix::identity(2, 2));
        let v0 = DVector::zeros(2);
        let null = NullSet::all(2);
        let prob = LaplacianProblem { sigma_hat: &s, theta0: 1.0, v0: &v0, lambda: 0.1, null_set: Some(&null) };
        assert!(solve_l_given_theta_v0(&prob, &AdmmSettings::default(), None).is_err());
    }

    #[test]
    fn iterates_stay_feasible() {
        let s = cov(SymMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.2, 0.4, 0.15, 0.1, 0.15, 0.6]));
        let v0 = DVector::zeros(3);
        let prob = LaplacianProblem { sigma_hat: &s, theta0: 1.0, v0: &v0, lambda: 0.05, null_set: None };
        let settings = AdmmSettings { max_iter: 7, ..AdmmSettings::default() };
        let out = solve_l_given_theta_v0(&prob, &settings, None).unwrap();
        let z_eig = EigenDecomposition::new(&out.state.z);
        assert!(z_eig.min() >= -1e-10);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(out.state.w[(i, j)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let s = cov(SymMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.5]));
        let v0 = DVector::zeros(2);
        let prob = LaplacianProblem { sigma_hat: &s, theta0: 1.0, v0: &v0, lambda: 0.01, null_set: None };
        let settings = AdmmSettings { max_iter: 2, eps_abs: 1e-12, eps_rel: 1e-12, rho: None };
        let out = solve_l_given_theta_v0(&prob, &settings, None).unwrap();
        assert!(!out.trace.converged);
        assert_eq!(out.trace.iterations, 2);
    }
}
