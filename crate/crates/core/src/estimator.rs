//! The four-step GAR estimator, eBIC tuning and the parametric-bootstrap fit score.
//!
//! 0. `theta0` from the largest eigenvalue of the sample covariance.
//! 1. Penalized Laplacian over the relaxed space (no `v0` constraint), per `lambda`.
//! 2. Thresholding gives a graph; the unpenalized Laplacian is refit on it.
//! 3. A positive null vector of the refit, then the joint `(theta0, L)` fit given it.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::admm::eigvec::{solve_positive_eigvec, EigvecProblem};
use crate::admm::joint::{solve_joint_theta_l, InnerPhiZSettings, JointProblem};
use crate::admm::laplacian::{solve_l_given_theta_v0, LaplacianProblem, LaplacianSolve};
use crate::admm::{AdmmSettings, TraceSummary};
use crate::error::{GarError, Result};
use crate::graph::{topology_from_laplacian, GraphTopology, NullSet};
use crate::linalg::{sample_covariance, EigenDecomposition, SampleCovariance, SymMatrix};
use crate::model::GarModel;
use crate::par::Execution;
use crate::rng::{self, Domain};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// eBIC edge-prior weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub enum Gamma {
    /// `0.5` when `p / n <= 0.5`, else `1`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(self, p: usize, n: usize) -> f64 {
        match self {
            Gamma::Auto if p as f64 / n as f64 <= 0.5 => 0.5,
            Gamma::Auto => 1.0,
            Gamma::Fixed(g) => g,
        }
    }
}

/// Starting value of the auxiliary `phi` in the joint solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum PhiInit {
    /// The Step 0 value of `theta0`.
    #[default]
    Warm,
    /// The floor `eps`.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSettings {
    /// Laplacian and joint solvers.
    pub admm: AdmmSettings,
    /// Positive-eigenvector solver.
    pub eigvec: AdmmSettings,
    pub inner: InnerPhiZSettings,
    pub gamma: Gamma,
    pub phi_init: PhiInit,
    /// Reuse the Step 1 iterate to start the Step 2 refit.
    pub warm_start: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            admm: AdmmSettings::default(),
            eigvec: AdmmSettings { rho: Some(1.0), ..AdmmSettings::default() },
            inner: InnerPhiZSettings::default(),
            gamma: Gamma::Auto,
            phi_init: PhiInit::Warm,
            warm_start: false,
            execution: Execution::Parallel,
        }
    }
}

/// `sqrt(log p / n)`, the scale of both tuning parameters.
pub fn tuning_scale(p: usize, n: usize) -> f64 {
    ((p as f64).ln().max(0.0) / n as f64).sqrt()
}

/// Largest threshold constant: 0.05 at p = 100, 0.075 at 250, 0.1 at 500,
/// log-linear in `p` between anchors and clamped outside them.
pub fn c_star(p: usize) -> f64 {
    const ANCHORS: [(f64, f64); 3] = [(100.0, 0.05), (250.0, 0.075), (500.0, 0.1)];
    let lp = (p.max(1) as f64).ln();
    if lp <= ANCHORS[0].0.ln() {
        return ANCHORS[0].1;
    }
    for w in ANCHORS.windows(2) {
        let (x0, y0) = (w[0].0.ln(), w[0].1);
        let (x1, y1) = (w[1].0.ln(), w[1].1);
        if lp <= x1 {
            return y0 + (y1 - y0) * (lp - x0) / (x1 - x0);
        }
    }
    ANCHORS[2].1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningGrid {
    pub lambda_values: Vec<f64>,
    pub eps_thre_values: Vec<f64>,
}

impl TuningGrid {
    /// Number of thresholds in the default grid.
    pub const DEFAULT_EPS_COUNT: usize = 10;
    /// The smallest threshold constant is `c_star / EPS_RANGE_RATIO`.
    pub const EPS_RANGE_RATIO: f64 = 10.0;

    /// `lambda = C s` for `C in {0.5, 1}` and ten log-spaced thresholds `C s`,
    /// `C in [c_star / 10, c_star]`, where `s = sqrt(log p / n)`.
    pub fn default_for(p: usize, n: usize) -> Self {
        let s = tuning_scale(p, n);
        let hi = c_star(p);
        let lo = hi / Self::EPS_RANGE_RATIO;
        let k = Self::DEFAULT_EPS_COUNT;
        let eps_thre_values = (0..k)
            .map(|i| {
                let t = i as f64 / (k - 1) as f64;
                s * (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            })
            .collect();
        Self { lambda_values: vec![0.5 * s, s], eps_thre_values }
    }

    pub fn single(lambda: f64, eps_thre: f64) -> Self {
        Self { lambda_values: vec![lambda], eps_thre_values: vec![eps_thre] }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| {
            !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
        };
        if ok(&self.lambda_values) && ok(&self.eps_thre_values) {
            Ok(())
        } else {
            Err(GarError::InvalidInput("grid values must be positive, finite and strictly ascending".into()))
        }
    }

    pub fn len(&self) -> usize {
        self.lambda_values.len() * self.eps_thre_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Step 0: `1 / sqrt(lambda_max(Sigma))`.
pub fn theta0_initial(sigma_hat: &SampleCovariance) -> Result<f64> {
    let top = EigenDecomposition::new(&sigma_hat.sigma_hat).max();
    if !(top > 1e-14) {
        return Err(GarError::DegenerateCovariance(top));
    }
    Ok(1.0 / top.sqrt())
}

/// `g(theta0, L) = 0.5 trace((theta0 I + L)^2 S) - log det(theta0 I + L)`.
pub fn neg_loglik(theta0: f64, l: &SymMatrix, sigma_hat: &SampleCovariance) -> Result<f64> {
    let p = l.nrows();
    if sigma_hat.sigma_hat.nrows() != p {
        return Err(GarError::DimensionMismatch(format!("L is {p}x{p}, covariance is {}x{}", sigma_hat.p, sigma_hat.p)));
    }
    let mut root = l.clone();
    for i in 0..p {
        root[(i, i)] += theta0;
    }
    let eig = EigenDecomposition::new(&root);
    if !(eig.min() > 0.0) {
        return Err(GarError::NonPd(eig.min()));
    }
    let log_det: f64 = eig.d.iter().map(|x| x.ln()).sum();
    let m = &root * &sigma_hat.sigma_hat;
    let quad = m.component_mul(&root.transpose()).sum();
    Ok(0.5 * quad - log_det)
}

/// Gaussian log-likelihood of `n` centered observations with covariance `(theta0 I + L)^{-2}`.
pub fn gaussian_loglik(g: f64, n: usize, p: usize) -> f64 {
    -(n as f64) * g - 0.5 * (n * p) as f64 * LN_2PI
}

/// Step 1 at a given `lambda`.
pub fn fit_step1(
    sigma_hat: &SampleCovariance,
    theta0: f64,
    lambda: f64,
    settings: &AdmmSettings,
) -> Result<LaplacianSolve> {
    let v0 = DVector::zeros(sigma_hat.p);
    let problem = LaplacianProblem { sigma_hat, theta0, v0: &v0, lambda, null_set: None };
    solve_l_given_theta_v0(&problem, settings, None)
}

/// Step 2: unpenalized refit with the null set pinned to zero.
pub fn fit_step2(
    sigma_hat: &SampleCovariance,
    theta0: f64,
    null_set: &NullSet,
    settings: &AdmmSettings,
    warm_start: Option<&LaplacianSolve>,
) -> Result<LaplacianSolve> {
    let v0 = DVector::zeros(sigma_hat.p);
    let problem = LaplacianProblem { sigma_hat, theta0, v0: &v0, lambda: 0.0, null_set: Some(null_set) };
    let warm = warm_start.map(|ws| {
        // keep the unscaled duals rho * (U, V, r) fixed across the change of rho
        let scale = ws.trace.rho / settings.rho_for(0.0);
        let mut s = ws.state.clone();
        s.u *= scale;
        s.v *= scale;
        s.r *= scale;
        s
    });
    solve_l_given_theta_v0(&problem, settings, warm.as_ref())
}

#[derive(Debug, Clone)]
pub struct NullVector {
    pub v0: DVector<f64>,
    /// One entry per component with at least two nodes.
    pub traces: Vec<TraceSummary>,
}

impl NullVector {
    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged)
    }
}

/// Positive unit null vector of a block-diagonal Laplacian estimate.
///
/// Each connected component of `topology` gets its own positive unit vector,
/// weighted by `sqrt(size / p)`; singletons get weight `sqrt(1 / p)`.
pub fn positive_null_vector(l: &SymMatrix, topology: &GraphTopology, settings: &AdmmSettings) -> Result<NullVector> {
    let p = l.nrows();
    let mut v0 = DVector::zeros(p);
    let mut traces = Vec::new();
    for comp in topology.components() {
        let weight = (comp.len() as f64 / p as f64).sqrt();
        if comp.len() == 1 {
            v0[comp[0]] = weight;
            continue;
        }
        let sub = SymMatrix::from_fn(comp.len(), comp.len(), |a, b| l[(comp[a], comp[b])]);
        let out = solve_positive_eigvec(&EigvecProblem::new(sub), settings)?;
        traces.push(out.trace.summary());
        for (k, &node) in comp.iter().enumerate() {
            v0[node] = weight * out.v[k];
        }
    }
    Ok(NullVector { v0, traces })
}

#[derive(Debug, Clone)]
pub struct Step3Fit {
    pub model: GarModel,
    pub eigvec: Vec<TraceSummary>,
    pub joint: TraceSummary,
}

impl Step3Fit {
    pub fn converged(&self) -> bool {
        self.joint.converged && self.eigvec.iter().all(|t| t.converged)
    }
}

/// Step 3: positive null vector of the Step 2 refit, then the joint fit given it.
pub fn fit_step3(
    sigma_hat: &SampleCovariance,
    l_step2: &SymMatrix,
    null_set: &NullSet,
    theta0_init: f64,
    settings: &FitSettings,
) -> Result<Step3Fit> {
    let nv = positive_null_vector(l_step2, &null_set.free_topology(), &settings.eigvec)?;
    let phi_init = match settings.phi_init {
        PhiInit::Warm => Some(theta0_init),
        PhiInit::Floor => None,
    };
    let problem = JointProblem { sigma_hat, v0: &nv.v0, null_set, phi_init };
    let out = solve_joint_theta_l(&problem, &settings.admm, &settings.inner)?;
    Ok(Step3Fit { model: out.model, eigvec: nv.traces, joint: out.trace.summary() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EbicScore {
    pub score: f64,
    /// `2 n g`, or `-2 loglik` for an external fit.
    pub loglik_term: f64,
    pub complexity_term: f64,
    pub s_hat: usize,
    pub gamma: f64,
}

/// `log(Q choose s)` via log-gamma.
pub fn log_binomial(q: usize, s: usize) -> f64 {
    if s > q {
        return f64::NEG_INFINITY;
    }
    let lg = |x: usize| libm::lgamma(x as f64 + 1.0);
    lg(q) - lg(q - s) - lg(s)
}

/// `2 n g + s log n + 2 gamma log(Q choose s)` with `Q = p (p - 1) / 2`.
pub fn ebic(g: f64, n: usize, p: usize, s_hat: usize, gamma: f64) -> Result<EbicScore> {
    ebic_with_term(2.0 * n as f64 * g, n, p, s_hat, gamma)
}

/// eBIC of an externally fitted model from its Gaussian log-likelihood and edge count.
///
/// The likelihood term is `-2 loglik`, which includes the `n p log(2 pi)` constant;
/// compare it with [`FitReport::loglik`] fed through this same function.
pub fn ebic_from_loglik(loglik: f64, n: usize, p: usize, s_hat: usize, gamma: f64) -> Result<EbicScore> {
    ebic_with_term(-2.0 * loglik, n, p, s_hat, gamma)
}

fn ebic_with_term(loglik_term: f64, n: usize, p: usize, s_hat: usize, gamma: f64) -> Result<EbicScore> {
    if !(0.0..=1.0).contains(&gamma) || n == 0 {
        return Err(GarError::InvalidInput(format!("need gamma in [0, 1] and n > 0, got {gamma}, {n}")));
    }
    let q = p * p.saturating_sub(1) / 2;
    if s_hat > q {
        return Err(GarError::InvalidInput(format!("{s_hat} edges exceed the {q} possible pairs")));
    }
    let complexity_term = s_hat as f64 * (n as f64).ln() + 2.0 * gamma * log_binomial(q, s_hat);
    Ok(EbicScore { score: loglik_term + complexity_term, loglik_term, complexity_term, s_hat, gamma })
}

/// One `(lambda, eps_thre)` cell of the tuning grid.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub lambda: f64,
    pub eps_thre: f64,
    pub edges: usize,
    pub converged: bool,
    pub ebic: Option<EbicScore>,
    pub neg_loglik: Option<f64>,
    pub step1: TraceSummary,
    pub step2: Option<TraceSummary>,
    pub step3: Option<TraceSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub theta0_initial: f64,
    pub grid: TuningGrid,
    /// Cells in grid order: `lambda` outer, `eps_thre` inner.
    pub cells: Vec<CellResult>,
    pub selected: usize,
    pub model: GarModel,
    /// Selected graph.
    pub topology: GraphTopology,
    pub neg_loglik: f64,
    /// Gaussian log-likelihood including the `log(2 pi)` constant.
    pub loglik: f64,
    /// `theta0`, the `p` diagonal entries and one weight per edge.
    pub n_params: usize,
}

impl FitReport {
    pub fn selected_cell(&self) -> &CellResult {
        &self.cells[self.selected]
    }
}

struct RefitOutcome {
    step2: Option<TraceSummary>,
    step3: Option<Step3Fit>,
    neg_loglik: Option<f64>,
    error: Option<String>,
}

/// Steps 0-3 over the grid on raw data (always mean-centered).
pub fn fit_full(data: &DMatrix<f64>, grid: &TuningGrid, settings: &FitSettings) -> Result<FitReport> {
    let cov = sample_covariance(data, true)?;
    fit_covariance(&cov, grid, settings)
}

/// Steps 0-3 over the grid on a precomputed sample covariance.
pub fn fit_covariance(cov: &SampleCovariance, grid: &TuningGrid, settings: &FitSettings) -> Result<FitReport> {
    grid.validate()?;
    let (n, p) = (cov.n, cov.p);
    let gamma = settings.gamma.resolve(p, n);
    let theta0 = theta0_initial(cov)?;
    let exec = settings.execution;

    let step1: Vec<Result<LaplacianSolve>> =
        exec.map(&grid.lambda_values, |&lambda| fit_step1(cov, theta0, lambda, &settings.admm));
    let step1 = step1.into_iter().collect::<Result<Vec<_>>>()?;

    // distinct graphs across the grid, in first-seen order
    let mut index: HashMap<GraphTopology, usize> = HashMap::new();
    let mut distinct: Vec<(GraphTopology, usize)> = Vec::new();
    let mut cell_graph = Vec::with_capacity(grid.len());
    for (li, s1) in step1.iter().enumerate() {
        for &eps in &grid.eps_thre_values {
            let topo = topology_from_laplacian(s1.estimate.entries(), eps)?;
            let k = *index.entry(topo.clone()).or_insert_with(|| {
                distinct.push((topo, li));
                distinct.len() - 1
            });
            cell_graph.push(k);
        }
    }

    let refits: Vec<RefitOutcome> = exec.map(&distinct, |(topo, li)| {
        let null = NullSet::complement_of(topo);
        let warm = settings.warm_start.then_some(&step1[*li]);
        let s2 = match fit_step2(cov, theta0, &null, &settings.admm, warm) {
            Ok(s) => s,
            Err(e) => return RefitOutcome { step2: None, step3: None, neg_loglik: None, error: Some(e.to_string()) },
        };
        let step2 = Some(s2.trace.summary());
        match fit_step3(cov, s2.estimate.entries(), &null, theta0, settings) {
            Ok(s3) => {
                let g = neg_loglik(s3.model.theta0, s3.model.l(), cov);
                let (neg_loglik, error) = match g {
                    Ok(g) => (Some(g), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                RefitOutcome { step2, step3: Some(s3), neg_loglik, error }
            }
            Err(e) => RefitOutcome { step2, step3: None, neg_loglik: None, error: Some(e.to_string()) },
        }
    });

    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize)> = None;
    for (c, &k) in cell_graph.iter().enumerate() {
        let li = c / grid.eps_thre_values.len();
        let ei = c % grid.eps_thre_values.len();
        let s1 = &step1[li];
        let out = &refits[k];
        let edges = distinct[k].0.len();
        let converged = s1.trace.converged
            && out.step2.is_some_and(|t| t.converged)
            && out.step3.as_ref().is_some_and(|s| s.converged())
            && out.neg_loglik.is_some();
        let ebic = match out.neg_loglik {
            Some(g) => Some(ebic(g, n, p, edges, gamma)?),
            None => None,
        };
        if converged {
            let score = ebic.map(|e| e.score).unwrap_or(f64::INFINITY);
            if best.is_none_or(|(b, _)| score < b) {
                best = Some((score, c));
            }
        }
        cells.push(CellResult {
            lambda: grid.lambda_values[li],
            eps_thre: grid.eps_thre_values[ei],
            edges,
            converged,
            ebic,
            neg_loglik: out.neg_loglik,
            step1: s1.trace.summary(),
            step2: out.step2,
            step3: out.step3.as_ref().map(|s| s.joint),
            error: out.error.clone(),
        });
    }

    let (_, selected) = best.ok_or(GarError::AllCellsFailed)?;
    let k = cell_graph[selected];
    let model = refits[k].step3.as_ref().map(|s| s.model.clone()).ok_or(GarError::AllCellsFailed)?;
    let topology = distinct[k].0.clone();
    let g = refits[k].neg_loglik.ok_or(GarError::AllCellsFailed)?;
    Ok(FitReport {
        n,
        p,
        gamma,
        theta0_initial: theta0,
        grid: grid.clone(),
        n_params: 1 + p + topology.len(),
        cells,
        selected,
        model,
        topology,
        neg_loglik: g,
        loglik: gaussian_loglik(g, n, p),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfResult {
    pub gf: f64,
    /// Requested bootstrap draws.
    pub b: usize,
    pub lambda: f64,
    pub ell_obs: f64,
    /// Log-likelihoods of the successful draws, in draw order.
    pub ell_boot: Vec<f64>,
    /// Draws whose refit raised an error (excluded from `gf`).
    pub failed: usize,
    /// Refits (observed included) that hit the iteration cap.
    pub unconverged: usize,
}

/// Step 0 + Step 1 on a covariance, returning the plug-in model and its log-likelihood.
fn step1_plugin(cov: &SampleCovariance, lambda: f64, settings: &AdmmSettings) -> Result<(f64, SymMatrix, f64, bool)> {
    let theta0 = theta0_initial(cov)?;
    let s1 = fit_step1(cov, theta0, lambda, settings)?;
    let l = s1.estimate.entries().clone();
    let g = neg_loglik(theta0, &l, cov)?;
    Ok((theta0, l, gaussian_loglik(g, cov.n, cov.p), s1.trace.converged))
}

/// `n` draws of `(theta0 I + L)^{-1} z`, `z ~ N(0, I)`, as rows.
pub fn sample_from_root(transfer: &SymMatrix, n: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let p = transfer.nrows();
    let z = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    // rows: y^T = z^T T^T = z^T T (T symmetric)
    z * transfer
}

/// Parametric-bootstrap goodness of fit of the Step 1 model at `lambda`
/// (default `sqrt(log p / n)`).
pub fn goodness_of_fit(
    data: &DMatrix<f64>,
    lambda: Option<f64>,
    b: usize,
    seed: u64,
    settings: &FitSettings,
) -> Result<GfResult> {
    let cov = sample_covariance(data, true)?;
    goodness_of_fit_covariance(&cov, lambda, b, seed, settings)
}

pub fn goodness_of_fit_covariance(
    cov: &SampleCovariance,
    lambda: Option<f64>,
    b: usize,
    seed: u64,
    settings: &FitSettings,
) -> Result<GfResult> {
    if b == 0 {
        return Err(GarError::InvalidInput("need at least one bootstrap draw".into()));
    }
    let (n, p) = (cov.n, cov.p);
    let lambda = lambda.unwrap_or_else(|| tuning_scale(p, n));
    if !(lambda > 0.0) {
        return Err(GarError::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let (theta0, l, ell_obs, obs_converged) = step1_plugin(cov, lambda, &settings.admm)?;
    let plugin = GarModel {
        theta0,
        laplacian: crate::graph::NormalizedLaplacian { entries: l, tag: crate::graph::SpaceTag::Relaxed },
        v0: DVector::from_element(p, 1.0 / (p as f64).sqrt()),
    };
    let transfer = plugin.transfer()?;
    let draws: Vec<Result<(f64, bool)>> = settings.execution.map_range(b, |k| {
        let mut rng = rng::stream(seed, Domain::Bootstrap, k as u64);
        let y = sample_from_root(&transfer, n, &mut rng);
        let cov_b = sample_covariance(&y, true)?;
        let (_, _, ell, conv) = step1_plugin(&cov_b, lambda, &settings.admm)?;
        Ok((ell, conv))
    });
    let mut ell_boot = Vec::with_capacity(b);
    let mut failed = 0;
    let mut unconverged = usize::from(!obs_converged);
    for d in draws {
        match d {
            Ok((ell, conv)) => {
                ell_boot.push(ell);
                unconverged += usize::from(!conv);
            }
            Err(_) => failed += 1,
        }
    }
    if ell_boot.is_empty() {
        return Err(GarError::AllCellsFailed);
    }
    let hits = ell_boot.iter().filter(|&&e| e <= ell_obs).count();
    Ok(GfResult { gf: hits as f64 / ell_boot.len() as f64, b, lambda, ell_obs, ell_boot, failed, unconverged })
}

/// Refit with `theta0`, `v0` and the edge pattern fixed at their true values.
pub fn oracle_fit(
    sigma_hat: &SampleCovariance,
    true_theta0: f64,
    true_v0: &DVector<f64>,
    true_topology: &GraphTopology,
    settings: &AdmmSettings,
) -> Result<(GarModel, TraceSummary)> {
    let null = NullSet::complement_of(true_topology);
    let problem =
        LaplacianProblem { sigma_hat, theta0: true_theta0, v0: true_v0, lambda: 0.0, null_set: Some(&null) };
    let out = solve_l_given_theta_v0(&problem, settings, None)?;
    let model = GarModel::new(true_theta0, out.estimate.laplacian, true_v0.clone())?;
    Ok((model, out.trace.summary()))
}
