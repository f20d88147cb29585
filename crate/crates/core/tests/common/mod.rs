//! Brute-force references shared by the oracle suites and the acceptance run.
#![allow(dead_code)]

use gar_core::estimator::sample_from_root;
use gar_core::graph::{normalized_laplacian_from_adjacency, Adjacency};
use gar_core::linalg::{sample_covariance, EigenDecomposition, SampleCovariance, SymMatrix};
use gar_core::rng::{self, Domain};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + SymMatrix::identity(p, p) * 0.1
}

/// Euclidean projection onto {PSD} ∩ {off-diagonals <= 0} by Dykstra's alternating projections.
pub fn project_relaxed(x: &SymMatrix) -> SymMatrix {
    let p = x.nrows();
    let psd = |m: &SymMatrix| {
        let e = EigenDecomposition::new(m);
        e.compose(&e.d.map(|v| v.max(0.0)))
    };
    let nonpos = |m: &SymMatrix| SymMatrix::from_fn(p, p, |i, j| if i == j { m[(i, j)] } else { m[(i, j)].min(0.0) });
    let mut y = x.clone();
    let (mut a, mut b) = (SymMatrix::zeros(p, p), SymMatrix::zeros(p, p));
    for _ in 0..2000 {
        let u = psd(&(&y + &a));
        a += &y - &u;
        let next = nonpos(&(&u + &b));
        b += &u - &next;
        let moved = (&next - &y).norm();
        y = next;
        if moved < 1e-15 {
            break;
        }
    }
    y
}

/// Projected gradient on `0.5 tr((t I + L)^2 S) - log det(t I + L) - lambda sum_{i != j} L_ij`,
/// which equals the penalized objective on the feasible set.
pub fn step1_reference(cov: &SymMatrix, theta0: f64, lambda: f64) -> SymMatrix {
    let p = cov.nrows();
    let lip = EigenDecomposition::new(cov).max() + 1.0 / (theta0 * theta0);
    let step = 1.0 / lip;
    let off = SymMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { 1.0 });
    let mut l = SymMatrix::zeros(p, p);
    for _ in 0..200_000 {
        let m = &l + SymMatrix::identity(p, p) * theta0;
        let m_inv = m.clone().try_inverse().unwrap();
        let grad = (&m * cov + cov * &m) * 0.5 - m_inv - &off * lambda;
        let next = project_relaxed(&(&l - grad * step));
        let moved = (&next - &l).norm();
        l = next;
        if moved < 1e-13 {
            break;
        }
    }
    l
}

pub fn random_problem(seed: u64) -> (SampleCovariance, f64) {
    let mut rng = rng::stream(seed, Domain::Control, 0);
    let p = if rng.random::<bool>() { 2 } else { 3 };
    let mut w = DMatrix::zeros(p, p);
    for k in 1..p {
        let parent = rng.random_range(0..k);
        let x = rng.random_range(0.2..1.0);
        w[(k, parent)] = x;
        w[(parent, k)] = x;
    }
    let l = normalized_laplacian_from_adjacency(&Adjacency::new(w).unwrap()).unwrap().entries * 2.0;
    let eig = EigenDecomposition::new(&l);
    let transfer = eig.compose(&eig.d.map(|x| 1.0 / (1.0 + x)));
    let n = rng.random_range(20..200);
    let y = sample_from_root(&transfer, n, &mut rng);
    (sample_covariance(&y, true).unwrap(), rng.random_range(0.01..0.5))
}

/// Dense `(I ⊗ C + C ⊗ I)` operator on column-major `vec`.
pub fn kronecker_sum(c: &SymMatrix) -> DMatrix<f64> {
    let p = c.nrows();
    let mut k = DMatrix::zeros(p * p, p * p);
    for j in 0..p {
        for i in 0..p {
            let row = i + j * p;
            for m in 0..p {
                k[(row, m + j * p)] += c[(i, m)];
                k[(row, i + m * p)] += c[(m, j)];
            }
        }
    }
    k
}

/// Minimum of `f` over `lo, lo + h, ..., hi`.
pub fn grid_min(lo: f64, hi: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let steps = ((hi - lo) / h).ceil() as usize;
    (0..=steps).map(|k| f(lo + k as f64 * h)).fold(f64::INFINITY, f64::min)
}

/// Random connected weighted graph: a random spanning tree plus extra edges and self-loops.
pub fn random_adjacency(p: usize, seed: u64) -> Adjacency {
    let mut rng = rng::stream(seed, Domain::Graph, 0);
    let mut w = DMatrix::zeros(p, p);
    for k in 1..p {
        let parent = rng.random_range(0..k);
        let x = rng.random_range(0.1..2.0);
        w[(k, parent)] = x;
        w[(parent, k)] = x;
    }
    let extra = rng.random_range(0.0..0.6);
    for j in 0..p {
        for i in 0..j {
            if rng.random::<f64>() < extra {
                let x = rng.random_range(0.1..2.0);
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
        if rng.random::<f64>() < 0.2 {
            w[(j, j)] = rng.random_range(0.1..1.0);
        }
    }
    Adjacency::new(w).unwrap()
}
