//! ADMM for a strictly positive unit vector minimizing `||(S - lambda* I) v||^2`.
//!
//! Splitting `v = w` with `||v|| = 1` on the `v` block and `w >= eps` on the `w` block.
//! The `v` block is a trust-region-type problem solved exactly in the eigenbasis of `S`.

use nalgebra::DVector;
use serde::Serialize;

use super::{AdmmSettings, AdmmTrace};
use crate::error::{GarError, Result};
use crate::linalg::{max_asymmetry, EigenDecomposition, SymMatrix};

#[derive(Debug, Clone)]
pub struct EigvecProblem {
    pub s: SymMatrix,
    pub lambda_star: f64,
    pub eps_floor: f64,
}

impl EigvecProblem {
    pub fn new(s: SymMatrix) -> Self {
        Self { s, lambda_star: 0.0, eps_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigvecSolve {
    #[serde(skip)]
    pub v: DVector<f64>,
    pub trace: AdmmTrace,
    /// `0.5 ||(S - lambda* I) v||^2` at the returned vector.
    pub objective: f64,
    /// `v`-updates that landed in the degenerate (boundary) case.
    pub boundary_updates: usize,
}

/// `f(mu) = sum t_i^2 / (a_i + 2 mu)^2`.
pub fn mu_secular(t_tilde_sq: &[f64], shifted_eigs_sq: &[f64], mu: f64) -> f64 {
    t_tilde_sq.iter().zip(shifted_eigs_sq).map(|(t, a)| t / (a + 2.0 * mu).powi(2)).sum()
}

/// Multiplier `mu` with `f(mu) = 1` on the branch where every `a_i + 2 mu > 0`.
///
/// When `f < 1` on the whole branch the left end of the branch is returned;
/// callers detect that case with [`mu_secular`].
pub fn mu_root_solve(t_tilde_sq: &[f64], shifted_eigs_sq: &[f64]) -> Result<f64> {
    let total: f64 = t_tilde_sq.iter().sum();
    if !(total > 0.0) || t_tilde_sq.len() != shifted_eigs_sq.len() {
        return Err(GarError::InvalidInput("mu root needs a nonzero right-hand side".into()));
    }
    let a_min = shifted_eigs_sq.iter().copied().fold(f64::INFINITY, f64::min);
    // work in sigma = 2 mu + a_min > 0; g(sigma) is strictly decreasing
    let g = |sigma: f64| -> f64 {
        t_tilde_sq.iter().zip(shifted_eigs_sq).map(|(t, a)| t / (a - a_min + sigma).powi(2)).sum()
    };
    let mut hi = total.sqrt() + a_min;
    let mut lo = 0.0;
    if g(hi) >= 1.0 {
        return Ok(0.5 * (hi - a_min));
    }
    // the branch end: g(0+) is finite only if the weight on the smallest a_i vanishes
    let lo_probe = hi * 1e-300f64.max(f64::MIN_POSITIVE);
    if g(lo_probe) < 1.0 {
        return Ok(0.5 * (lo_probe - a_min));
    }
    for _ in 0..2000 {
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut sigma = if lo > 0.0 { 0.5 * (lo + hi) } else { hi };
    // Newton polish on 1/sqrt(g), which is close to linear in sigma
    for _ in 0..4 {
        let (mut f, mut df) = (0.0, 0.0);
        for (t, a) in t_tilde_sq.iter().zip(shifted_eigs_sq) {
            let den = a - a_min + sigma;
            f += t / (den * den);
            df -= 2.0 * t / (den * den * den);
        }
        if (f - 1.0).abs() <= 1e-15 || df == 0.0 {
            break;
        }
        let h = 1.0 / f.sqrt() - 1.0;
        let dh = -0.5 * df / (f * f.sqrt());
        let next = sigma - h / dh;
        if next > 0.0 && next.is_finite() && (g(next) - 1.0).abs() < (f - 1.0).abs() {
            sigma = next;
        } else {
            break;
        }
    }
    Ok(0.5 * (sigma - a_min))
}

/// Exact minimizer of `0.5 v^T C v - t^T v` over the unit sphere, with `C = Q diag(a) Q^T`.
///
/// Returns `(v, mu, boundary)`.
pub(crate) fn sphere_update(
    eig: &EigenDecomposition,
    a: &[f64],
    t: &DVector<f64>,
) -> Result<(DVector<f64>, f64, bool)> {
    let p = a.len();
    let t_tilde = eig.q.tr_mul(t);
    let t_sq: Vec<f64> = t_tilde.iter().map(|x| x * x).collect();
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    if t_sq.iter().sum::<f64>() <= 0.0 {
        // any unit vector in the bottom eigenspace is optimal
        let k = (0..p).find(|&i| a[i] == a_min).unwrap_or(0);
        let mut v = eig.q.column(k).into_owned();
        if v.sum() < 0.0 {
            v.neg_mut();
        }
        return Ok((v, -0.5 * a_min, true));
    }
    let mu = mu_root_solve(&t_sq, a)?;
    let f = mu_secular(&t_sq, a, mu);
    let gap_tol = 1e-12 * (1.0 + a.iter().copied().fold(0.0, f64::max));
    if f >= 1.0 - 1e-10 {
        let coef = DVector::from_iterator(p, (0..p).map(|i| t_tilde[i] / (a[i] + 2.0 * mu)));
        let mut v = &eig.q * coef;
        let norm = v.norm();
        v /= norm;
        return Ok((v, mu, false));
    }
    // boundary case: fill the deficit along the bottom eigenspace
    let mu = -0.5 * a_min;
    let mut coef = DVector::zeros(p);
    let mut bottom = Vec::new();
    for i in 0..p {
        if a[i] - a_min <= gap_tol {
            bottom.push(i);
        } else {
            coef[i] = t_tilde[i] / (a[i] - a_min);
        }
    }
    let deficit = (1.0 - coef.norm_squared()).max(0.0).sqrt();
    let k = bottom[0];
    let sign = if eig.q.column(k).sum() >= 0.0 { 1.0 } else { -1.0 };
    coef[k] = sign * deficit;
    let mut v = &eig.q * coef;
    let norm = v.norm();
    v /= norm;
    Ok((v, mu, true))
}

pub fn solve_positive_eigvec(prob: &EigvecProblem, settings: &AdmmSettings) -> Result<EigvecSolve> {
    let settings = settings.for_eigvec();
    settings.validate()?;
    let p = prob.s.nrows();
    if p == 0 || !prob.s.is_square() {
        return Err(GarError::DimensionMismatch(format!("S is {}x{}", prob.s.nrows(), prob.s.ncols())));
    }
    if max_asymmetry(&prob.s) > 1e-10 {
        return Err(GarError::InvalidInput("S must be symmetric".into()));
    }
    if !(prob.eps_floor > 0.0) || !(prob.lambda_star >= 0.0) {
        return Err(GarError::InvalidInput("need eps_floor > 0 and lambda_star >= 0".into()));
    }
    let rho = settings.rho_for(0.0);
    let eig = EigenDecomposition::new(&prob.s);
    let a: Vec<f64> = eig.d.iter().map(|l| (l - prob.lambda_star).powi(2)).collect();

    let abs_primal = ((2 * p) as f64).sqrt() * settings.eps_abs;
    let abs_dual = (p as f64).sqrt() * settings.eps_abs;
    let mut w = DVector::from_element(p, prob.eps_floor);
    let mut u = DVector::zeros(p);
    let mut v = w.clone();
    let mut trace = AdmmTrace::new(rho);
    let mut boundary_updates = 0;
    let mut best: Option<(f64, DVector<f64>)> = None;

    for k in 1..=settings.max_iter {
        let t = (&w - &u) * rho;
        let (v_new, _mu, boundary) = sphere_update(&eig, &a, &t)?;
        boundary_updates += boundary as usize;
        v = v_new;
        let w_new = (&v + &u).map(|x| x.max(prob.eps_floor));
        u += &v - &w_new;
        let primal = (&v - &w_new).norm();
        let dual = rho * (&w_new - &w).norm();
        w = w_new;
        let eps_primal = abs_primal + settings.eps_rel * v.norm().max(w.norm());
        let eps_dual = abs_dual + settings.eps_rel * rho * u.norm();
        if !primal.is_finite() || !dual.is_finite() {
            return Err(GarError::NonFiniteObjective(k));
        }
        if trace.record(primal, dual, eps_primal, eps_dual) {
            break;
        }
        let ratio = trace.last_ratio();
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, v.clone()));
        }
    }
    if !trace.converged {
        if let Some((_, b)) = best {
            v = b;
        }
    }
    let shifted = &prob.s * &v - &v * prob.lambda_star;
    let objective = 0.5 * shifted.norm_squared();
    Ok(EigvecSolve { v, trace, objective, boundary_updates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mu_closed_forms() {
        assert_abs_diff_eq!(mu_root_solve(&[1.0], &[0.0]).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(mu_root_solve(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn mu_residual_is_tiny() {
        let t = [0.3, 1.7, 0.02, 0.9, 2.5];
        let a = [0.0, 0.4, 1.1, 2.0, 9.0];
        let mu = mu_root_solve(&t, &a).unwrap();
        assert!((mu_secular(&t, &a, mu) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_node_laplacian() {
        let prob = EigvecProblem::new(SymMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let out = solve_positive_eigvec(&prob, &AdmmSettings::default()).unwrap();
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(out.v[0], h, epsilon = 1e-4);
        assert_abs_diff_eq!(out.v[1], h, epsilon = 1e-4);
    }

    #[test]
    fn zero_matrix_is_feasible() {
        let prob = EigvecProblem::new(SymMatrix::zeros(3, 3));
        let out = solve_positive_eigvec(&prob, &AdmmSettings::default()).unwrap();
        assert_abs_diff_eq!(out.v.norm(), 1.0, epsilon = 1e-10);
        assert!(out.v.iter().all(|&x| x >= prob.eps_floor - 1e-6));
    }
}
