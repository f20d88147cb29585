//! ADMM over `(theta0, L)` with `v0` fixed.
//!
//! Same splitting as the Laplacian solver plus `theta0 = phi`, `phi >= eps`.
//! The `(theta0, L)` block is a bordered Sylvester system solved through a
//! Schur complement on the scalar; the `(phi, Z)` block is solved by an inner
//! alternation between `phi` and the shifted eigenvalues `lambda*_j = phi + z_j`.

use nalgebra::DVector;
use serde::Serialize;

use super::laplacian::SplitState;
use super::{dual_scale, log_barrier_root, w_update, AdmmSettings, AdmmTrace, LaplacianEstimate};
use crate::error::{GarError, Result};
use crate::graph::NullSet;
use crate::linalg::{frobenius_sq, EigenDecomposition, SampleCovariance, SymMatrix};
use crate::model::GarModel;

/// How the `(phi, Z)` block is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum PhiZMethod {
    /// Profile out `Z` in closed form and root-solve the convex 1-d problem in `phi`.
    #[default]
    Exact,
    /// Alternate exact `phi` and `lambda*` updates until the inner residual passes.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerPhiZSettings {
    pub delta_abs: f64,
    pub delta_rel: f64,
    pub max_inner_iter: usize,
    /// Lower bound for `phi`.
    pub eps_floor: f64,
    pub method: PhiZMethod,
}

impl Default for InnerPhiZSettings {
    fn default() -> Self {
        Self { delta_abs: 1e-5, delta_rel: 1e-3, max_inner_iter: 1000, eps_floor: 1e-6, method: PhiZMethod::Exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSplitState {
    pub split: SplitState,
    pub theta0: f64,
    pub phi: f64,
    /// Scaled dual of `theta0 - phi = 0`.
    pub t: f64,
    /// Eigenvalues of the last `Z`, ascending.
    pub z_eigs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct JointProblem<'a> {
    pub sigma_hat: &'a SampleCovariance,
    /// Strictly positive unit vector.
    pub v0: &'a DVector<f64>,
    pub null_set: &'a NullSet,
    /// Starting `phi`; `None` starts from `eps_floor`.
    pub phi_init: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct JointSolve {
    pub model: GarModel,
    pub estimate: LaplacianEstimate,
    pub trace: AdmmTrace,
    pub state: JointSplitState,
}

/// Solve `[[D_x, S_x], [S_x^T, delta_x]] [vec(L~); theta0] = [-vec(E); rhs_scalar]`
/// where `D_x = I (x) D + D (x) I`, `S_x = 2 vec(Sigma~)` and
/// `delta_x = 2 trace(Sigma) + rho`.
pub fn solve_bordered_system(
    d_eigvals: &[f64],
    sigma_tilde: &SymMatrix,
    e_k: &SymMatrix,
    rhs_scalar: f64,
    rho: f64,
    trace_sigma_hat: f64,
) -> Result<(SymMatrix, f64)> {
    let p = d_eigvals.len();
    if sigma_tilde.shape() != (p, p) || e_k.shape() != (p, p) {
        return Err(GarError::DimensionMismatch(format!("bordered system of order {p}")));
    }
    let delta = 2.0 * trace_sigma_hat + rho;
    let mut cross = 0.0; // S_x^T D_x^{-1} (-vec E)
    let mut quad = 0.0; // S_x^T D_x^{-1} S_x
    for j in 0..p {
        for i in 0..p {
            let sum = d_eigvals[i] + d_eigvals[j];
            if sum <= 1e-14 {
                return Err(GarError::SingularPair { i, j, sum });
            }
            let s = 2.0 * sigma_tilde[(i, j)];
            cross -= s * e_k[(i, j)] / sum;
            quad += s * s / sum;
        }
    }
    let schur = delta - quad;
    if schur <= 1e-12 {
        return Err(GarError::SchurSingular(schur));
    }
    let theta0 = (rhs_scalar - cross) / schur;
    let l_tilde = SymMatrix::from_fn(p, p, |i, j| {
        (-e_k[(i, j)] - theta0 * 2.0 * sigma_tilde[(i, j)]) / (d_eigvals[i] + d_eigvals[j])
    });
    Ok((l_tilde, theta0))
}

/// Result of the inner `(phi, Z)` alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiZUpdate {
    pub phi: f64,
    /// Eigenvalues of the new `Z` (the `lambda*_j - phi`), aligned with the input eigenvalues.
    pub z_eigs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `G*(lambda*, phi) = -2 sum log lambda*_j + rho/2 sum (lambda*_j - phi - lambda_j)^2 + rho/2 (phi - c)^2`
/// with `c = theta0 + t`.
pub fn inner_objective(lambda_star: &[f64], phi: f64, eigvals: &[f64], anchor: f64, rho: f64) -> f64 {
    let mut g = 0.5 * rho * (phi - anchor).powi(2);
    for (&ls, &lam) in lambda_star.iter().zip(eigvals) {
        g += -2.0 * ls.ln() + 0.5 * rho * (ls - phi - lam).powi(2);
    }
    g
}

/// Minimizer over `phi >= eps_floor` of `G*` with `lambda*` held fixed.
pub fn phi_step(lambda_star: &[f64], eigvals: &[f64], anchor: f64, eps_floor: f64) -> f64 {
    let p = eigvals.len() as f64;
    let s: f64 = lambda_star.iter().zip(eigvals).map(|(ls, lam)| ls - lam).sum();
    ((s + anchor) / (p + 1.0)).max(eps_floor)
}

/// Exact minimizer of `G*` over `phi >= eps_floor`, `z >= 0`.
///
/// For fixed `phi` the optimal `z_j` is the Laplacian solver's eigen-shrinkage with
/// `theta0 = phi`; the profiled objective is convex in `phi` with derivative
/// `rho (phi - anchor) - 2 sum 1 / (phi + z_j(phi))`, whose root is bracketed by
/// `[eps_floor, (anchor + sqrt(anchor^2 + 8 p / rho)) / 2]`.
pub fn phi_z_exact(eigvals: &[f64], anchor: f64, rho: f64, eps_floor: f64) -> PhiZUpdate {
    let p = eigvals.len() as f64;
    let slope = |phi: f64| -> f64 {
        let s: f64 = eigvals.iter().map(|&lam| 1.0 / log_barrier_root(phi + lam, rho).max(phi)).sum();
        rho * (phi - anchor) - 2.0 * s
    };
    let mut lo = eps_floor;
    let mut iterations = 0;
    let phi = if slope(lo) >= 0.0 {
        lo
    } else {
        let mut hi = (0.5 * (anchor + (anchor * anchor + 8.0 * p / rho).sqrt())).max(2.0 * eps_floor);
        while slope(hi) < 0.0 {
            hi *= 2.0;
        }
        while hi - lo > 1e-15 * hi && iterations < 200 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let z_eigs = eigvals.iter().map(|&lam| (log_barrier_root(phi + lam, rho) - phi).max(0.0)).collect();
    PhiZUpdate { phi, z_eigs, iterations, converged: true }
}

/// Alternating `phi` / `lambda*` updates for the `(phi, Z)` block.
///
/// `eigvals` are the eigenvalues of `L + U`; `anchor = theta0 + t`.
pub fn phi_z_update(
    phi_prev: f64,
    z_eigs_prev: &[f64],
    eigvals: &[f64],
    anchor: f64,
    rho: f64,
    inner: &InnerPhiZSettings,
) -> PhiZUpdate {
    let p = eigvals.len();
    let mut phi_c = phi_prev.max(inner.eps_floor);
    let mut star_c: Vec<f64> = z_eigs_prev.iter().map(|z| phi_c + z.max(0.0)).collect();
    let mut star_new = vec![0.0; p];
    let abs_tol = inner.delta_abs * ((p + 1) as f64).sqrt();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < inner.max_inner_iter {
        iterations += 1;
        let phi_new = phi_step(&star_c, eigvals, anchor, inner.eps_floor);
        for j in 0..p {
            star_new[j] = phi_new.max(log_barrier_root(phi_new + eigvals[j], rho));
        }
        let mut diff = (phi_new - phi_c).powi(2);
        let mut norm_new = phi_new * phi_new;
        let mut norm_c = phi_c * phi_c;
        for j in 0..p {
            diff += (star_new[j] - star_c[j]).powi(2);
            norm_new += star_new[j] * star_new[j];
            norm_c += star_c[j] * star_c[j];
        }
        let tol = abs_tol + inner.delta_rel * norm_new.sqrt().max(norm_c.sqrt());
        phi_c = phi_new;
        std::mem::swap(&mut star_c, &mut star_new);
        if diff.sqrt() <= tol {
            converged = true;
            break;
        }
    }
    let z_eigs = star_c.iter().map(|ls| (ls - phi_c).max(0.0)).collect();
    PhiZUpdate { phi: phi_c, z_eigs, iterations, converged }
}

pub fn solve_joint_theta_l(
    problem: &JointProblem<'_>,
    settings: &AdmmSettings,
    inner: &InnerPhiZSettings,
) -> Result<JointSolve> {
    settings.validate()?;
    let sigma = &problem.sigma_hat.sigma_hat;
    let p = sigma.nrows();
    let v0 = problem.v0;
    if v0.len() != p || problem.null_set.p() != p {
        return Err(GarError::DimensionMismatch(format!("problem dimension is {p}")));
    }
    if v0.iter().any(|&x| !(x > 0.0)) {
        return Err(GarError::InvalidInput("v0 must be strictly positive".into()));
    }

    let rho = settings.rho_for(0.0);
    let mut c = sigma + SymMatrix::identity(p, p) * rho + (v0 * v0.transpose()) * (0.5 * rho);
    crate::linalg::symmetrize(&mut c);
    let c_eig = EigenDecomposition::new(&c);
    let sigma_tilde = c_eig.to_eigenbasis(sigma);
    let trace_sigma = problem.sigma_hat.trace();
    debug_assert!((sigma_tilde.trace() - trace_sigma).abs() <= 1e-10 * trace_sigma.abs().max(1.0));

    let abs_primal = ((p * (2 * p + 1) + 1) as f64).sqrt() * settings.eps_abs;
    let abs_dual = ((p * p + 1) as f64).sqrt() * settings.eps_abs;

    let mut split = SplitState::zeros(p);
    let mut theta0;
    let mut phi = problem.phi_init.unwrap_or(inner.eps_floor).max(inner.eps_floor);
    let mut t = 0.0;
    let mut z_eigs = DVector::zeros(p);
    let mut trace = AdmmTrace::new(rho);
    let mut best: Option<(f64, JointSplitState)> = None;
    let mut last: Option<JointSplitState> = None;

    for k in 1..=settings.max_iter {
        let rv = &split.r * v0.transpose();
        let e_raw = (&split.w + &split.v) * rho - (&split.z - &split.u) * rho + (&rv + rv.transpose()) * (0.5 * rho);
        let e = c_eig.to_eigenbasis(&e_raw);
        let (l_tilde, theta_new) =
            solve_bordered_system(c_eig.d.as_slice(), &sigma_tilde, &e, rho * (phi - t), rho, trace_sigma)?;
        theta0 = theta_new;
        let mut l = c_eig.from_eigenbasis(&l_tilde);
        crate::linalg::symmetrize(&mut l);

        let shifted = EigenDecomposition::new(&(&l + &split.u));
        let upd = match inner.method {
            PhiZMethod::Exact => phi_z_exact(shifted.d.as_slice(), theta0 + t, rho, inner.eps_floor),
            PhiZMethod::Alternating => {
                phi_z_update(phi, z_eigs.as_slice(), shifted.d.as_slice(), theta0 + t, rho, inner)
            }
        };
        if !upd.converged {
            trace.inner_cap_hits += 1;
        }
        let new_z_eigs = DVector::from_vec(upd.z_eigs);
        let z = shifted.compose(&new_z_eigs);
        let w = w_update(&l, &split.v, Some(problem.null_set));

        let lz = &l - &z;
        let lw = &l + &w;
        let lv = &l * v0;
        split.u += &lz;
        split.v += &lw;
        split.r += &lv;
        t += theta0 - upd.phi;

        let primal =
            (frobenius_sq(&lz) + frobenius_sq(&lw) + lv.norm_squared() + (theta0 - upd.phi).powi(2)).sqrt();
        let dual = rho * ((&split.z - &z + &w - &split.w).norm_squared() + (phi - upd.phi).powi(2)).sqrt();
        let eps_primal = abs_primal
            + settings.eps_rel
                * (2.0 * frobenius_sq(&l) + lv.norm_squared() + theta0 * theta0)
                    .sqrt()
                    .max((frobenius_sq(&z) + frobenius_sq(&w) + upd.phi * upd.phi).sqrt());
        let ds = dual_scale(&split.u, &split.v, &split.r, v0);
        let eps_dual = abs_dual + settings.eps_rel * rho * (ds * ds + t * t).sqrt();
        if !primal.is_finite() || !dual.is_finite() || !theta0.is_finite() {
            return Err(GarError::NonFiniteObjective(k));
        }

        split.l = l;
        split.z = z;
        split.w = w;
        phi = upd.phi;
        z_eigs = new_z_eigs;
        let done = trace.record(primal, dual, eps_primal, eps_dual);
        let snapshot = JointSplitState { split: split.clone(), theta0, phi, t, z_eigs: z_eigs.clone() };
        if done {
            last = Some(snapshot);
            break;
        }
        let ratio = trace.last_ratio();
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, snapshot.clone()));
        }
        last = Some(snapshot);
    }

    let state = if trace.converged { last } else { best.map(|(_, s)| s).or(last) }
        .ok_or_else(|| GarError::InvalidInput("max_iter must be positive".into()))?;
    if !(state.theta0 > 0.0) {
        return Err(GarError::NonPd(state.theta0));
    }
    let estimate = LaplacianEstimate::finish(state.split.l.clone(), Some(problem.null_set), Some(v0));
    let model = GarModel::new(state.theta0, estimate.laplacian.clone(), v0.clone())?;
    Ok(JointSolve { model, estimate, trace, state })
}
