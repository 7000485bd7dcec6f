//! Classical baselines: column-stochastic Markov chains and finite
//! deterministic maps.
//!
//! Transition matrices follow the column convention: entry `(x, y)` is the
//! probability of moving *from* state `y` *to* state `x`, so every column
//! sums to one and distributions evolve as `μ ↦ Pμ`.

use nalgebra::DMatrix;

use crate::entropy::{
    eta_unchecked, join, limit_estimate, ConvergenceReport, Partition, ProbVector,
    DERIVED_SUM_TOL,
};
use crate::error::{invalid, Error, Result};

const ENTRY_TOL: f64 = 1e-12;
const POWER_ITERATION_CAP: usize = 100_000;
const STATIONARY_RESIDUAL: f64 = 1e-12;
/// Default window for [`entropy_rate`] convergence.
pub const RATE_WINDOW: usize = 3;
/// Default number of weighted paths [`process_joint_entropy`] may enumerate.
pub const DEFAULT_PATH_BUDGET: u128 = 10_000_000;

/// Column-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return invalid(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        for x in 0..entries.nrows() {
            for y in 0..entries.ncols() {
                let p = entries[(x, y)];
                if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&p) {
                    return invalid(format!("entry ({x},{y}) = {p} outside [0, 1]"));
                }
            }
        }
        for (y, col) in entries.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > ENTRY_TOL {
                return invalid(format!("column {y} sums to {s}"));
            }
        }
        Ok(Self(entries))
    }

    /// Builds from rows, `rows[x][y] = p_{x,y}`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("transition matrix rows have unequal lengths");
        }
        Self::new(DMatrix::from_fn(n, n, |x, y| rows[x][y]))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Deterministic chain sending `y ↦ image[y]`.
    pub fn from_map(image: &[usize]) -> Result<Self> {
        let n = image.len();
        if let Some(&bad) = image.iter().find(|&&x| x >= n) {
            return invalid(format!("image value {bad} outside 0..{n}"));
        }
        Self::new(DMatrix::from_fn(n, n, |x, y| {
            if image[y] == x {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    /// `p_{to, from}`.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.0[(to, from)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `Pμ`.
    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|x| (0..n).map(|y| self.0[(x, y)] * mu[y]).sum())
            .collect()
    }

    /// `Σ_x η(p_{x,y})` for each source column `y`.
    pub fn column_entropies(&self) -> Vec<f64> {
        self.0
            .column_iter()
            .map(|c| c.iter().map(|&p| eta_unchecked(p)).sum())
            .collect()
    }

    fn check_dist(&self, mu: &ProbVector) -> Result<()> {
        if mu.len() != self.size() {
            return invalid(format!(
                "distribution over {} states, matrix over {}",
                mu.len(),
                self.size()
            ));
        }
        Ok(())
    }
}

/// Unbiased random walk on the `n`-cycle: `p_{v±1, v} = ½`.
pub fn cycle_walk(n: usize) -> Result<TransitionMatrix> {
    if n < 3 {
        return invalid(format!("cycle walk needs at least 3 vertices, got {n}"));
    }
    let mut m = DMatrix::zeros(n, n);
    for v in 0..n {
        m[((v + 1) % n, v)] += 0.5;
        m[((v + n - 1) % n, v)] += 0.5;
    }
    TransitionMatrix::new(m)
}

pub fn matrix_power(p: &TransitionMatrix, m: usize) -> Result<TransitionMatrix> {
    if m < 1 {
        return invalid("matrix power exponent must be at least 1");
    }
    let mut acc = p.0.clone();
    for _ in 1..m {
        acc = &acc * &p.0;
    }
    // Clear rounding drift before re-validating stochasticity.
    for mut col in acc.column_iter_mut() {
        col.iter_mut().for_each(|x| *x = x.max(0.0));
        let s = col.sum();
        col /= s;
    }
    TransitionMatrix::new(acc)
}

fn l1_residual(p: &TransitionMatrix, mu: &[f64]) -> f64 {
    p.apply(mu)
        .iter()
        .zip(mu)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Invariant distribution `Pμ = μ`.
///
/// Runs power iteration from the uniform vector; for periodic chains the
/// average of two consecutive iterates is also tested. Falls back to a direct
/// linear solve when iteration stalls.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<ProbVector> {
    let n = p.size();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITERATION_CAP {
        if l1_residual(p, &x) < STATIONARY_RESIDUAL {
            return ProbVector::with_tolerance(x, DERIVED_SUM_TOL);
        }
        let next = p.apply(&x);
        let avg: Vec<f64> = x.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        if l1_residual(p, &avg) < STATIONARY_RESIDUAL {
            return ProbVector::with_tolerance(avg, DERIVED_SUM_TOL);
        }
        x = next;
    }
    solve_stationary(p)
}

fn solve_stationary(p: &TransitionMatrix) -> Result<ProbVector> {
    let n = p.size();
    // (P − I)μ = 0 with the last equation replaced by Σμ = 1.
    let mut a = &p.0 - DMatrix::<f64>::identity(n, n);
    let mut b = nalgebra::DVector::zeros(n);
    a.row_mut(n - 1).fill(1.0);
    b[n - 1] = 1.0;
    let mu = a.lu().solve(&b);
    let residual = mu
        .as_ref()
        .map(|m| l1_residual(p, m.as_slice()))
        .unwrap_or(f64::INFINITY);
    match mu {
        Some(m) if residual < 1e-10 && m.iter().all(|&x| x > -1e-12) => {
            ProbVector::with_tolerance(m.iter().map(|x| x.max(0.0)).collect(), DERIVED_SUM_TOL)
        }
        _ => Err(Error::Numeric {
            what: "stationary distribution did not converge".into(),
            residual,
        }),
    }
}

/// `H(P) = Σ_y μ_y Σ_x η(p_{x,y})`.
pub fn markov_entropy(p: &TransitionMatrix, mu: &ProbVector) -> Result<f64> {
    p.check_dist(mu)?;
    Ok(p.column_entropies()
        .iter()
        .zip(mu.as_slice())
        .map(|(h, m)| h * m)
        .sum())
}

/// The sequence `Σ_y (Pⁿμ₀)_y Σ_x η(p_{x,y})` for `n = 0..=n_max`.
pub fn entropy_rate(
    p: &TransitionMatrix,
    mu0: &ProbVector,
    n_max: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    p.check_dist(mu0)?;
    let col_h = p.column_entropies();
    let mut dist = mu0.as_slice().to_vec();
    let mut seq = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            dist = p.apply(&dist);
        }
        seq.push(col_h.iter().zip(&dist).map(|(h, m)| h * m).sum());
    }
    limit_estimate(&seq, tol, RATE_WINDOW)
}

/// A self-map of `0..len` given by its image table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMap(Vec<usize>);

impl FiniteMap {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        if n == 0 {
            return invalid("finite map on an empty set");
        }
        if let Some(&bad) = image.iter().find(|&&x| x >= n) {
            return invalid(format!("image value {bad} outside 0..{n}"));
        }
        Ok(Self(image))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    /// `i ↦ i + shift mod n`.
    pub fn rotation(n: usize, shift: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (i + shift) % n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.0
    }

    pub fn compose(&self, inner: &FiniteMap) -> FiniteMap {
        FiniteMap(inner.0.iter().map(|&i| self.0[i]).collect())
    }
}

/// `(1/n)·H(∨_{k<n} f^{-k}(C))` with exact preimage partitions.
pub fn ks_estimate(f: &FiniteMap, mu: &ProbVector, c: &Partition, n: usize) -> Result<f64> {
    if n < 1 {
        return invalid("KS estimate needs n ≥ 1");
    }
    if f.len() != mu.len() || c.universe() != f.len() {
        return invalid(format!(
            "map over {}, distribution over {}, partition over {} states",
            f.len(),
            mu.len(),
            c.universe()
        ));
    }
    let mut parts = Vec::with_capacity(n);
    let mut fk = FiniteMap::identity(f.len())?;
    for _ in 0..n {
        parts.push(c.pullback(fk.image())?);
        fk = f.compose(&fk);
    }
    Ok(join(&parts)?.entropy(mu)? / n as f64)
}

/// Number of positive-probability paths of length `n + 1`.
fn count_paths(p: &TransitionMatrix, mu0: &ProbVector, n: usize) -> u128 {
    let size = p.size();
    let mut counts: Vec<u128> = mu0.as_slice().iter().map(|&m| (m > 0.0) as u128).collect();
    for _ in 0..n {
        counts = (0..size)
            .map(|x| {
                (0..size)
                    .filter(|&y| p.get(x, y) > 0.0)
                    .fold(0u128, |acc, y| acc.saturating_add(counts[y]))
            })
            .collect();
    }
    counts.iter().fold(0u128, |a, &c| a.saturating_add(c))
}

/// `H(X_0, …, X_n)` by exact enumeration of the positive-probability paths.
pub fn process_joint_entropy(
    p: &TransitionMatrix,
    mu0: &ProbVector,
    n: usize,
    budget: u128,
) -> Result<f64> {
    p.check_dist(mu0)?;
    let required = count_paths(p, mu0, n);
    if required > budget {
        return Err(Error::Budget {
            what: format!("joint entropy paths of length {}", n + 1),
            required,
            limit: budget,
        });
    }
    let size = p.size();
    let successors: Vec<Vec<(usize, f64)>> = (0..size)
        .map(|y| {
            (0..size)
                .map(|x| (x, p.get(x, y)))
                .filter(|&(_, q)| q > 0.0)
                .collect()
        })
        .collect();

    fn walk(succ: &[Vec<(usize, f64)>], at: usize, weight: f64, left: usize) -> f64 {
        if left == 0 {
            return eta_unchecked(weight);
        }
        succ[at]
            .iter()
            .map(|&(x, q)| walk(succ, x, weight * q, left - 1))
            .sum()
    }

    Ok(mu0
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(x0, &m)| walk(&successors, x0, m, n))
        .sum())
}
