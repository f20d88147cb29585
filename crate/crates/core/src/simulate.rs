//! Random GAR designs, data generation, recovery metrics and replicated experiments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{GarError, Result};
use crate::estimator::{self, FitSettings, TuningGrid};
use crate::graph::{normalized_laplacian_from_adjacency, Adjacency, GraphTopology};
use crate::linalg::{sample_covariance, EigenDecomposition, SymMatrix};
use crate::model::GarModel;
use crate::rng::{self, Domain};

/// What to do with nodes that draw no incident edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum IsolationPolicy {
    /// Redraw the whole graph, up to [`RESAMPLE_BUDGET`] times.
    Resample,
    /// Draw from the design conditioned on every node having positive degree,
    /// by edge-wise Gibbs sweeps started from a patched draw.
    #[default]
    Condition,
    /// Give each isolated node a self-loop with a weight from the design range.
    SelfLoop,
}

/// Gibbs sweeps over all node pairs under [`IsolationPolicy::Condition`].
pub const CONDITION_SWEEPS: usize = 50;
pub const RESAMPLE_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimDesign {
    pub p: usize,
    pub n: usize,
    pub edge_prob: f64,
    pub self_loop_prob: f64,
    pub weight_range: (f64, f64),
    pub theta0: f64,
    pub theta1: f64,
    pub seed: u64,
    pub isolation: IsolationPolicy,
}

impl SimDesign {
    /// Edge probability `2 / p`, no self-loops, weights `U[0.5, 1]`, `theta0 = 1`, `theta1 = 2`.
    pub fn baseline(p: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            edge_prob: if p > 0 { (2.0 / p as f64).min(1.0) } else { 0.0 },
            self_loop_prob: 0.0,
            weight_range: (0.5, 1.0),
            theta0: 1.0,
            theta1: 2.0,
            seed,
            isolation: IsolationPolicy::Condition,
        }
    }

    /// Baseline with edge probability `5 / p`.
    pub fn dense(p: usize, n: usize, seed: u64) -> Self {
        Self { edge_prob: (5.0 / p as f64).min(1.0), ..Self::baseline(p, n, seed) }
    }

    /// Baseline with self-loop probability `40 / p`.
    pub fn self_loops(p: usize, n: usize, seed: u64) -> Self {
        Self { self_loop_prob: (40.0 / p as f64).min(1.0), ..Self::baseline(p, n, seed) }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        let (lo, hi) = self.weight_range;
        if self.p == 0 {
            return Err(GarError::InvalidInput("p must be positive".into()));
        }
        if self.n < 2 {
            return Err(GarError::InvalidInput("n must be at least 2".into()));
        }
        if !prob(self.edge_prob) || !prob(self.self_loop_prob) {
            return Err(GarError::InvalidInput("probabilities must lie in [0, 1]".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(GarError::InvalidInput(format!("invalid weight range [{lo}, {hi}]")));
        }
        if !(self.theta0 > 0.0 && self.theta1 > 0.0) {
            return Err(GarError::InvalidInput("theta0 and theta1 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GraphDraw {
    pub adjacency: Adjacency,
    /// Whole-graph redraws (resample policy).
    pub resamples: usize,
    /// Nodes isolated in the first draw that the policy had to repair
    /// (self-loop and conditioning policies).
    pub patched: Vec<usize>,
}

fn draw_weight(range: (f64, f64), rng: &mut impl Rng) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Edge structure: `present[(i, j)]` for `i != j`, self-loops on the diagonal.
struct Structure {
    present: DMatrix<bool>,
    incident: Vec<usize>,
}

impl Structure {
    fn draw(design: &SimDesign, rng: &mut impl Rng) -> Self {
        let p = design.p;
        let mut s = Self { present: DMatrix::from_element(p, p, false), incident: vec![0; p] };
        for j in 0..p {
            for i in 0..j {
                if rng.random_bool(design.edge_prob) {
                    s.set(i, j, true);
                }
            }
        }
        for i in 0..p {
            if rng.random_bool(design.self_loop_prob) {
                s.set(i, i, true);
            }
        }
        s
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        if self.present[(i, j)] == on {
            return;
        }
        self.present[(i, j)] = on;
        self.present[(j, i)] = on;
        let delta = |c: usize| if on { c + 1 } else { c - 1 };
        self.incident[i] = delta(self.incident[i]);
        if i != j {
            self.incident[j] = delta(self.incident[j]);
        }
    }

    fn isolated(&self) -> Vec<usize> {
        (0..self.incident.len()).filter(|&i| self.incident[i] == 0).collect()
    }

    /// Single-site Gibbs update of `(i, j)` restricted to graphs without isolated nodes.
    fn gibbs(&mut self, i: usize, j: usize, prob: f64, rng: &mut impl Rng) {
        let on = rng.random_bool(prob);
        let last = self.incident[i] == 1 || self.incident[j] == 1;
        if on || !self.present[(i, j)] || !last {
            self.set(i, j, on);
        }
    }

    fn condition(&mut self, design: &SimDesign, rng: &mut impl Rng) -> Result<()> {
        let p = design.p;
        for i in self.isolated() {
            if p > 1 && design.edge_prob > 0.0 {
                let j = (i + rng.random_range(1..p)) % p;
                self.set(i, j, true);
            } else if design.self_loop_prob > 0.0 {
                self.set(i, i, true);
            } else {
                return Err(GarError::InvalidInput("design cannot avoid isolated nodes".into()));
            }
        }
        for _ in 0..CONDITION_SWEEPS {
            for j in 0..p {
                for i in 0..j {
                    self.gibbs(i, j, design.edge_prob, rng);
                }
                self.gibbs(j, j, design.self_loop_prob, rng);
            }
        }
        Ok(())
    }

    fn weights(&self, range: (f64, f64), rng: &mut impl Rng) -> DMatrix<f64> {
        let p = self.incident.len();
        let mut w = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..=j {
                if self.present[(i, j)] {
                    let x = draw_weight(range, rng);
                    w[(i, j)] = x;
                    w[(j, i)] = x;
                }
            }
        }
        w
    }
}

pub fn generate_graph(design: &SimDesign) -> Result<GraphDraw> {
    design.validate()?;
    let mut rng = rng::stream(design.seed, Domain::Graph, 0);
    let mut resamples = 0;
    loop {
        let mut s = Structure::draw(design, &mut rng);
        let isolated = s.isolated();
        if !isolated.is_empty() {
            match design.isolation {
                IsolationPolicy::Resample => {
                    resamples += 1;
                    if resamples >= RESAMPLE_BUDGET {
                        return Err(GarError::ResampleBudgetExceeded(RESAMPLE_BUDGET));
                    }
                    continue;
                }
                IsolationPolicy::SelfLoop => isolated.iter().for_each(|&i| s.set(i, i, true)),
                IsolationPolicy::Condition => s.condition(design, &mut rng)?,
            }
        }
        let w = s.weights(design.weight_range, &mut rng);
        return Ok(GraphDraw { adjacency: Adjacency::new(w)?, resamples, patched: isolated });
    }
}

/// Ground truth of a simulated design.
#[derive(Debug, Clone)]
pub struct GarTruth {
    pub theta0: f64,
    pub theta1: f64,
    pub adjacency: Adjacency,
    /// Normalized Laplacian `L_N`.
    pub l_normalized: SymMatrix,
    /// `theta1 L_N`, the Laplacian of the reparametrized model.
    pub l: SymMatrix,
    /// `sqrt(degrees)`, unit norm.
    pub v0: DVector<f64>,
    pub topology: GraphTopology,
    pub resamples: usize,
    pub patched: Vec<usize>,
}

impl GarTruth {
    pub fn from_design(design: &SimDesign) -> Result<Self> {
        let draw = generate_graph(design)?;
        Self::from_adjacency(draw.adjacency, design.theta0, design.theta1, draw.resamples, draw.patched)
    }

    pub fn from_adjacency(
        adjacency: Adjacency,
        theta0: f64,
        theta1: f64,
        resamples: usize,
        patched: Vec<usize>,
    ) -> Result<Self> {
        let l_normalized = normalized_laplacian_from_adjacency(&adjacency)?.entries;
        let sqrt_d = adjacency.degrees().map(f64::sqrt);
        let v0 = &sqrt_d / sqrt_d.norm();
        Ok(Self {
            theta0,
            theta1,
            topology: adjacency.topology(),
            l: &l_normalized * theta1,
            l_normalized,
            v0,
            adjacency,
            resamples,
            patched,
        })
    }

    /// `(theta0 I + theta1 L_N)^{-2}`.
    pub fn covariance(&self) -> SymMatrix {
        let eig = EigenDecomposition::new(&self.l);
        eig.compose(&eig.d.map(|x| (self.theta0 + x).powi(-2)))
    }
}

/// `n` rows of `(theta0 I + theta1 L)^{-1} z`, `z ~ N(0, I)`, from the design's sample stream.
pub fn sample_gar(design: &SimDesign, l_normalized: &SymMatrix) -> Result<DMatrix<f64>> {
    design.validate()?;
    if l_normalized.nrows() != design.p || !l_normalized.is_square() {
        return Err(GarError::DimensionMismatch(format!("design has p = {}, L is {}x{}", design.p, l_normalized.nrows(), l_normalized.ncols())));
    }
    let eig = EigenDecomposition::new(l_normalized);
    let scale = eig.d.map(|x| 1.0 / (design.theta0 + design.theta1 * x));
    if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(GarError::NonPd(design.theta0 + design.theta1 * eig.min()));
    }
    let transfer = eig.compose(&scale);
    let mut rng = rng::stream(design.seed, Domain::Sample, 0);
    Ok(estimator::sample_from_root(&transfer, design.n, &mut rng))
}

/// Scale-free (Barabasi-Albert, one edge per new node) precision matrix with
/// off-diagonal `0.3` on edges and diagonal `|lambda_min| + 0.2`, turned into a correlation matrix.
///
/// Positive precision off-diagonals cannot come from a GAR model, so data drawn from this
/// covariance serve as a misspecified control.
pub fn power_law_covariance(p: usize, seed: u64) -> Result<SymMatrix> {
    if p < 2 {
        return Err(GarError::InvalidInput("power-law control needs p >= 2".into()));
    }
    let mut rng = rng::stream(seed, Domain::Control, 0);
    let mut omega = SymMatrix::zeros(p, p);
    let mut degree = vec![0usize; p];
    omega[(0, 1)] = 0.3;
    omega[(1, 0)] = 0.3;
    degree[0] = 1;
    degree[1] = 1;
    for new in 2..p {
        let total: usize = degree[..new].iter().sum();
        let mut pick = rng.random_range(0..total);
        let mut target = 0;
        while pick >= degree[target] {
            pick -= degree[target];
            target += 1;
        }
        omega[(new, target)] = 0.3;
        omega[(target, new)] = 0.3;
        degree[new] += 1;
        degree[target] += 1;
    }
    let shift = EigenDecomposition::new(&omega).min().abs() + 0.2;
    for i in 0..p {
        omega[(i, i)] = shift;
    }
    let eig = EigenDecomposition::new(&omega);
    let sigma = eig.compose(&eig.d.map(|x| 1.0 / x));
    let d = sigma.diagonal().map(|x| 1.0 / x.sqrt());
    let mut corr = SymMatrix::from_fn(p, p, |i, j| sigma[(i, j)] * d[i] * d[j]);
    for i in 0..p {
        corr[(i, i)] = 1.0;
    }
    Ok(corr)
}

/// `n` rows from `N(0, sigma)` via a Cholesky factor.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let chol = sigma.clone().cholesky().ok_or(GarError::NonPd(f64::NAN))?;
    let mut rng = rng::stream(seed, Domain::Sample, 0);
    let z = DMatrix::<f64>::from_fn(n, sigma.nrows(), |_, _| StandardNormal.sample(&mut rng));
    Ok(z * chol.l().transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub power: f64,
    pub fdr: f64,
    pub f1: f64,
    /// `(theta0_hat - theta0)^2`.
    pub theta0_err: f64,
    /// `||v0_hat - v0||^2`; NaN when the estimator does not produce `v0`.
    pub v0_err: f64,
    /// `||L_hat - L||_F^2 / ||L||_F^2`.
    pub l_err: f64,
}

/// `(power, fdr, f1)`; empty discoveries give FDR 0, empty truth gives power 1, F1 is 0 when undefined.
pub fn edge_metrics(estimated: &GraphTopology, truth: &GraphTopology) -> (f64, f64, f64) {
    let tp = estimated.edges.intersection(&truth.edges).count() as f64;
    let found = estimated.len() as f64;
    let real = truth.len() as f64;
    let power = if real == 0.0 { 1.0 } else { tp / real };
    let fdr = if found == 0.0 { 0.0 } else { 1.0 - tp / found };
    let precision = 1.0 - fdr;
    let f1 = if precision + power == 0.0 { 0.0 } else { 2.0 * precision * power / (precision + power) };
    (power, fdr, f1)
}

/// Relative squared Frobenius error; falls back to absolute when the truth is zero.
pub fn relative_sq_error(estimate: &SymMatrix, truth: &SymMatrix) -> f64 {
    let denom = truth.norm_squared();
    let num = (estimate - truth).norm_squared();
    if denom > 0.0 {
        num / denom
    } else {
        num
    }
}

/// Metrics of a fitted model whose estimated graph is `topology`.
pub fn evaluate(model: &GarModel, topology: &GraphTopology, truth: &GarTruth) -> Result<MetricsRow> {
    let p = truth.l.nrows();
    if model.p() != p || topology.p != p {
        return Err(GarError::DimensionMismatch(format!("truth has p = {p}, model has p = {}", model.p())));
    }
    let (power, fdr, f1) = edge_metrics(topology, &truth.topology);
    // both vectors are positive, so no sign alignment is needed
    let v0_err = (&model.v0 - &truth.v0).norm_squared();
    Ok(MetricsRow {
        power,
        fdr,
        f1,
        theta0_err: (model.theta0 - truth.theta0).powi(2),
        v0_err,
        l_err: relative_sq_error(model.l(), &truth.l),
    })
}

/// Estimator evaluated by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Arm {
    /// Steps 0-3 with eBIC selection.
    Full,
    /// Laplacian refit with true `theta0`, `v0` and edge pattern.
    Oracle,
    /// Steps 0-1 at `lambda` (default `sqrt(log p / n)`); the graph is the support of the split `W = -L`.
    Step1 { lambda: Option<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub metrics: Option<MetricsRow>,
    pub converged: bool,
    pub true_edges: usize,
    pub estimated_edges: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub design: SimDesign,
    pub arm: Arm,
    pub rows: Vec<ReplicateRow>,
    /// Means over replicates that produced metrics.
    pub mean: Option<MetricsRow>,
    pub failed: usize,
}

/// Per-replicate pieces shared by all arms.
pub struct Replicate {
    pub design: SimDesign,
    pub truth: GarTruth,
    pub data: DMatrix<f64>,
}

impl Replicate {
    /// Replicate `r` of a design: its own seed, graph and sample.
    pub fn draw(design: &SimDesign, r: usize) -> Result<Self> {
        let design = design.with_seed(rng::child_seed(design.seed, Domain::Replicate, r as u64));
        let truth = GarTruth::from_design(&design)?;
        let data = sample_gar(&design, &truth.l_normalized)?;
        Ok(Self { design, truth, data })
    }
}

/// Fit one replicate with the given arm; returns metrics, convergence and the edge count.
pub fn run_arm(
    rep: &Replicate,
    arm: Arm,
    grid: Option<&TuningGrid>,
    settings: &FitSettings,
) -> Result<(MetricsRow, bool, usize)> {
    let (n, p) = (rep.design.n, rep.design.p);
    match arm {
        Arm::Full => {
            let default_grid;
            let grid = match grid {
                Some(g) => g,
                None => {
                    default_grid = TuningGrid::default_for(p, n);
                    &default_grid
                }
            };
            let report = estimator::fit_full(&rep.data, grid, settings)?;
            let m = evaluate(&report.model, &report.topology, &rep.truth)?;
            Ok((m, report.selected_cell().converged, report.topology.len()))
        }
        Arm::Oracle => {
            let cov = sample_covariance(&rep.data, true)?;
            let (model, trace) =
                estimator::oracle_fit(&cov, rep.truth.theta0, &rep.truth.v0, &rep.truth.topology, &settings.admm)?;
            let m = evaluate(&model, &rep.truth.topology, &rep.truth)?;
            Ok((m, trace.converged, rep.truth.topology.len()))
        }
        Arm::Step1 { lambda } => {
            let cov = sample_covariance(&rep.data, true)?;
            let theta0 = estimator::theta0_initial(&cov)?;
            let lambda = lambda.unwrap_or_else(|| estimator::tuning_scale(p, n));
            let s1 = estimator::fit_step1(&cov, theta0, lambda, &settings.admm)?;
            let l = s1.estimate.entries();
            // the sparse split variable carries exact zeros; L itself is only feasible to tolerance
            let w = &s1.state.w;
            let support = GraphTopology {
                p,
                edges: (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|&(i, j)| w[(i, j)] > 0.0).collect(),
            };
            let (power, fdr, f1) = edge_metrics(&support, &rep.truth.topology);
            let m = MetricsRow {
                power,
                fdr,
                f1,
                theta0_err: (theta0 - rep.truth.theta0).powi(2),
                v0_err: f64::NAN,
                l_err: relative_sq_error(l, &rep.truth.l),
            };
            Ok((m, s1.trace.converged, support.len()))
        }
    }
}

/// `replicates` independent draws of a design, each fitted with `arm`.
///
/// Replicates run through `settings.execution`; each uses its own seed derived
/// from `(design.seed, r)`, so results do not depend on scheduling.
pub fn run_experiment(
    design: &SimDesign,
    replicates: usize,
    arm: Arm,
    grid: Option<&TuningGrid>,
    settings: &FitSettings,
) -> Result<ExperimentResult> {
    design.validate()?;
    let inner = FitSettings { execution: crate::par::Execution::Sequential, ..settings.clone() };
    let rows: Vec<ReplicateRow> = settings.execution.map_range(replicates, |r| {
        let seed = rng::child_seed(design.seed, Domain::Replicate, r as u64);
        let outcome = Replicate::draw(design, r).and_then(|rep| {
            let true_edges = rep.truth.topology.len();
            run_arm(&rep, arm, grid, &inner).map(|x| (x, true_edges))
        });
        match outcome {
            Ok(((m, converged, est), true_edges)) => ReplicateRow {
                replicate: r,
                seed,
                metrics: Some(m),
                converged,
                true_edges,
                estimated_edges: est,
                error: None,
            },
            Err(e) => ReplicateRow {
                replicate: r,
                seed,
                metrics: None,
                converged: false,
                true_edges: 0,
                estimated_edges: 0,
                error: Some(e.to_string()),
            },
        }
    });
    let ok: Vec<MetricsRow> = rows.iter().filter_map(|r| r.metrics).collect();
    let failed = rows.len() - ok.len();
    Ok(ExperimentResult { design: design.clone(), arm, mean: mean_metrics(&ok), rows, failed })
}

pub fn mean_metrics(rows: &[MetricsRow]) -> Option<MetricsRow> {
    if rows.is_empty() {
        return None;
    }
    let k = rows.len() as f64;
    let avg = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
    Some(MetricsRow {
        power: avg(|m| m.power),
        fdr: avg(|m| m.fdr),
        f1: avg(|m| m.f1),
        theta0_err: avg(|m| m.theta0_err),
        v0_err: avg(|m| m.v0_err),
        l_err: avg(|m| m.l_err),
    })
}

/// Replicate table as CSV with header
/// `replicate,theta0_err,v0_err,l_err,power,fdr,f1,converged`.
pub fn write_replicate_csv<W: std::io::Write>(rows: &[ReplicateRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "theta0_err", "v0_err", "l_err", "power", "fdr", "f1", "converged"])?;
    for r in rows {
        let m = r.metrics.unwrap_or(MetricsRow {
            power: f64::NAN,
            fdr: f64::NAN,
            f1: f64::NAN,
            theta0_err: f64::NAN,
            v0_err: f64::NAN,
            l_err: f64::NAN,
        });
        w.write_record([
            r.replicate.to_string(),
            m.theta0_err.to_string(),
            m.v0_err.to_string(),
            m.l_err.to_string(),
            m.power.to_string(),
            m.fdr.to_string(),
            m.f1.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()
}
