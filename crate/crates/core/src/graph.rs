//! Weighted undirected graphs, their normalized Laplacians, and the
//! characterization checks used to validate candidate Laplacians.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GarError, Result};
use crate::linalg::{max_asymmetry, EigenDecomposition, SymMatrix};

pub const DEFAULT_SYM_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// Symmetric nonnegative weight matrix. Diagonal entries are self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    weights: DMatrix<f64>,
}

impl Adjacency {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(GarError::DimensionMismatch(format!(
                "adjacency is {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GarError::InvalidInput("adjacency weights must be finite and nonnegative".into()));
        }
        if max_asymmetry(&weights) > DEFAULT_SYM_TOL {
            return Err(GarError::InvalidInput("adjacency must be symmetric".into()));
        }
        Ok(Self { weights })
    }

    pub fn p(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.p(), self.weights.row_iter().map(|r| r.sum()))
    }

    /// Off-diagonal support; self-loops are not edges.
    pub fn topology(&self) -> GraphTopology {
        let p = self.p();
        let mut edges = BTreeSet::new();
        for j in 0..p {
            for i in 0..j {
                if self.weights[(i, j)] > 0.0 {
                    edges.insert((i, j));
                }
            }
        }
        GraphTopology { p, edges }
    }

    pub fn self_loop_count(&self) -> usize {
        (0..self.p()).filter(|&i| self.weights[(i, i)] > 0.0).count()
    }
}

/// Which parameter space a Laplacian-shaped matrix was estimated in.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceTag {
    /// Built exactly from an adjacency matrix.
    Exact,
    /// PSD, symmetric, nonpositive off-diagonals.
    Relaxed,
    /// Relaxed plus zeros on a null set.
    Constrained(NullSet),
    /// Constrained plus `L v0 = 0` for the given positive unit vector.
    Final { null_set: NullSet, v0: DVector<f64> },
}

impl SpaceTag {
    pub fn name(&self) -> &'static str {
        match self {
            SpaceTag::Exact => "exact",
            SpaceTag::Relaxed => "relaxed",
            SpaceTag::Constrained(_) => "constrained",
            SpaceTag::Final { .. } => "final",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    pub entries: SymMatrix,
    pub tag: SpaceTag,
}

impl NormalizedLaplacian {
    pub fn p(&self) -> usize {
        self.entries.nrows()
    }
}

/// `I - D^{-1/2} A D^{-1/2}`.
pub fn normalized_laplacian_from_adjacency(a: &Adjacency) -> Result<NormalizedLaplacian> {
    let p = a.p();
    let d = a.degrees();
    if let Some(i) = (0..p).find(|&i| d[i] <= 0.0) {
        return Err(GarError::IsolatedNode(i));
    }
    let inv_sqrt = d.map(|x| 1.0 / x.sqrt());
    let mut entries = DMatrix::from_fn(p, p, |i, j| -a.weights[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..p {
        entries[(i, i)] += 1.0;
    }
    Ok(NormalizedLaplacian { entries, tag: SpaceTag::Exact })
}

/// One named condition of a characterization check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub holds: bool,
    /// `false` for conditions reported only as consequences.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationVerdict {
    pub conditions: Vec<Condition>,
    pub passed: bool,
    /// Null space of dimension > 1 (disconnected graph); positivity was
    /// judged on the projection of the all-ones vector.
    pub degenerate_null_space: bool,
    /// Sign-normalized, unit-norm positive null vector when one was found.
    pub null_vector: Option<DVector<f64>>,
}

impl ValidationVerdict {
    fn from_conditions(conditions: Vec<Condition>) -> Self {
        let passed = conditions.iter().filter(|c| c.required).all(|c| c.holds);
        Self { conditions, passed, degenerate_null_space: false, null_vector: None }
    }

    pub fn holds(&self, name: &str) -> Option<bool> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.holds)
    }
}

fn off_diagonal_nonpositive(m: &SymMatrix, tol: f64) -> bool {
    let p = m.nrows();
    (0..p).all(|i| (0..p).all(|j| i == j || m[(i, j)] <= tol))
}

/// Graph-Laplacian characterization: symmetric, zero row sums, nonpositive
/// off-diagonals; PSD with smallest eigenvalue zero is reported as a consequence.
pub fn check_laplacian(m: &SymMatrix, tol: f64) -> ValidationVerdict {
    if !m.is_square() {
        return ValidationVerdict::from_conditions(vec![Condition { name: "square", holds: false, required: true }]);
    }
    let symmetric = max_asymmetry(m) <= tol;
    let scale = m.amax().max(1.0);
    let row_sums = m.row_iter().all(|r| r.sum().abs() <= tol * scale * m.nrows() as f64);
    let offdiag = off_diagonal_nonpositive(m, tol);
    let psd = if m.nrows() == 0 {
        true
    } else {
        let eig = EigenDecomposition::new(m);
        eig.min() >= -tol * scale && eig.min().abs() <= tol * scale * m.nrows() as f64
    };
    ValidationVerdict::from_conditions(vec![
        Condition { name: "symmetric", holds: symmetric, required: true },
        Condition { name: "zero_row_sums", holds: row_sums, required: true },
        Condition { name: "off_diagonal_nonpositive", holds: offdiag, required: true },
        Condition { name: "psd_min_eigenvalue_zero", holds: psd, required: false },
    ])
}

/// Normalized-Laplacian characterization: symmetric, diagonal in `[0, 1]`,
/// off-diagonals in `[-1, 0]`, PSD with smallest eigenvalue zero, and a
/// strictly positive vector in the null space.
pub fn check_normalized_laplacian(m: &SymMatrix, tol: f64) -> ValidationVerdict {
    if !m.is_square() || m.nrows() == 0 {
        return ValidationVerdict::from_conditions(vec![Condition { name: "square", holds: false, required: true }]);
    }
    let p = m.nrows();
    let symmetric = max_asymmetry(m) <= tol;
    let diag_ok = (0..p).all(|i| m[(i, i)] >= -tol && m[(i, i)] <= 1.0 + tol);
    let offdiag_ok = (0..p).all(|i| (0..p).all(|j| i == j || (m[(i, j)] <= tol && m[(i, j)] >= -1.0 - tol)));

    let mut sym = m.clone();
    crate::linalg::symmetrize(&mut sym);
    let eig = EigenDecomposition::new(&sym);
    let psd = eig.min() >= -tol && eig.min().abs() <= tol;

    let null_idx: Vec<usize> = (0..p).filter(|&k| eig.d[k].abs() <= tol).collect();
    let mut degenerate = false;
    let candidate = match null_idx.len() {
        0 => None,
        1 => {
            let mut v: DVector<f64> = eig.q.column(null_idx[0]).into_owned();
            let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
            if lead < 0.0 {
                v.neg_mut();
            }
            Some(v)
        }
        _ => {
            degenerate = true;
            let ones = DVector::from_element(p, 1.0);
            let mut v = DVector::zeros(p);
            for &k in &null_idx {
                let u = eig.q.column(k);
                v += u * u.dot(&ones);
            }
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            Some(v)
        }
    };
    let positive_null = candidate.as_ref().is_some_and(|v| v.iter().all(|&x| x > tol));

    let mut verdict = ValidationVerdict::from_conditions(vec![
        Condition { name: "symmetric", holds: symmetric, required: true },
        Condition { name: "diagonal_in_unit_interval", holds: diag_ok, required: true },
        Condition { name: "off_diagonal_in_minus_one_zero", holds: offdiag_ok, required: true },
        Condition { name: "psd_min_eigenvalue_zero", holds: psd, required: true },
        Condition { name: "positive_null_vector", holds: positive_null, required: true },
    ]);
    verdict.degenerate_null_space = degenerate;
    if positive_null {
        verdict.null_vector = candidate;
    }
    verdict
}

/// Undirected edge set over `p` nodes; pairs stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GraphTopology {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl GraphTopology {
    pub fn empty(p: usize) -> Self {
        Self { p, edges: BTreeSet::new() }
    }

    pub fn complete(p: usize) -> Self {
        let edges = (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
        Self { p, edges }
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b || a >= p || b >= p {
                return Err(GarError::InvalidInput(format!("invalid edge ({a}, {b}) for p = {p}")));
            }
            edges.insert((a.min(b), a.max(b)));
        }
        Ok(Self { p, edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.p).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j) in &self.edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..self.p {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Relabel nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j])))
            .collect();
        Self { p: self.p, edges }
    }
}

/// Off-diagonal positions pinned to zero: the complement of a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullSet {
    p: usize,
    pinned: Vec<bool>,
}

impl NullSet {
    pub fn complement_of(topology: &GraphTopology) -> Self {
        let p = topology.p;
        let mut pinned = vec![true; p * p];
        for i in 0..p {
            pinned[i * p + i] = false;
        }
        for &(i, j) in &topology.edges {
            pinned[i * p + j] = false;
            pinned[j * p + i] = false;
        }
        Self { p, pinned }
    }

    /// Every off-diagonal pair pinned.
    pub fn all(p: usize) -> Self {
        Self::complement_of(&GraphTopology::empty(p))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_null(&self, i: usize, j: usize) -> bool {
        self.pinned[i * self.p + j]
    }

    pub fn free_topology(&self) -> GraphTopology {
        let p = self.p;
        let edges = (0..p)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| !self.is_null(i, j))
            .collect();
        GraphTopology { p, edges }
    }

    pub fn null_count(&self) -> usize {
        self.pinned.iter().filter(|&&b| b).count() / 2
    }
}

/// Edge present iff `|L_ij| > eps_thre`; entries at exactly the threshold are null.
pub fn topology_from_laplacian(l: &SymMatrix, eps_thre: f64) -> Result<GraphTopology> {
    if !(eps_thre > 0.0) {
        return Err(GarError::InvalidInput(format!("threshold must be positive, got {eps_thre}")));
    }
    let p = l.nrows();
    let mut edges = BTreeSet::new();
    for j in 0..p {
        for i in 0..j {
            if l[(i, j)].abs() > eps_thre {
                edges.insert((i, j));
            }
        }
    }
    Ok(GraphTopology { p, edges })
}

/// One line per edge: `i<TAB>j<TAB>weight`, 0-based, weight `= -L_ij`.
pub fn write_edge_list(l: &SymMatrix, topology: &GraphTopology) -> String {
    let mut out = String::new();
    for &(i, j) in &topology.edges {
        let _ = writeln!(out, "{i}\t{j}\t{}", -l[(i, j)]);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

pub fn parse_edge_list(text: &str) -> Result<Vec<EdgeRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || GarError::InvalidInput(format!("edge list line {}: expected i<TAB>j<TAB>weight", lineno + 1));
        if fields.len() != 3 {
            return Err(bad());
        }
        let i = fields[0].trim().parse().map_err(|_| bad())?;
        let j = fields[1].trim().parse().map_err(|_| bad())?;
        let weight = fields[2].trim().parse().map_err(|_| bad())?;
        out.push(EdgeRecord { i, j, weight });
    }
    Ok(out)
}
