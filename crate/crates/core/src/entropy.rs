//! Shannon entropy of finite distributions, partition algebra and
//! convergence bookkeeping for entropy-rate sequences.
//!
//! All entropies are in nats.

use std::collections::BTreeMap;
use std::ops::Index;

use crate::error::{invalid, Error, Result};

/// Sum tolerance for freshly constructed probability vectors.
pub const FRESH_SUM_TOL: f64 = 1e-12;
/// Sum tolerance for distributions derived by long accumulations.
pub const DERIVED_SUM_TOL: f64 = 1e-10;

/// `η(x) = −x ln x`, with `η(0) = 0`.
pub fn eta(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return invalid(format!("eta is defined on [0, ∞), got {x}"));
    }
    Ok(eta_unchecked(x))
}

#[inline]
pub(crate) fn eta_unchecked(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// A finite probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to one within [`FRESH_SUM_TOL`].
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(entries, FRESH_SUM_TOL)
    }

    pub fn with_tolerance(entries: Vec<f64>, tol: f64) -> Result<Self> {
        if entries.is_empty() {
            return invalid("probability vector is empty");
        }
        for (i, &p) in entries.iter().enumerate() {
            if !(-tol..=1.0 + tol).contains(&p) {
                return invalid(format!("probability entry {i} = {p} outside [0, 1]"));
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > tol {
            return invalid(format!(
                "probabilities sum to {sum} (off by {:.3e}, tolerance {tol:.0e})",
                (sum - 1.0).abs()
            ));
        }
        Ok(Self(entries.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("uniform distribution over zero outcomes");
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return invalid(format!("point mass at {at} outside 0..{n}"));
        }
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `H(p) = Σ η(p_i)`.
pub fn entropy(p: &ProbVector) -> f64 {
    p.0.iter().map(|&x| eta_unchecked(x)).sum()
}

/// A finite partition of the outcome range `0..universe`.
///
/// Blocks are kept sorted internally and ordered by their smallest member.
#[derive(Debug, Clone)]
pub struct Partition {
    universe: usize,
    blocks: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl Partition {
    pub fn new(universe: usize, blocks: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        if blocks.len() != labels.len() {
            return invalid(format!(
                "{} blocks but {} labels",
                blocks.len(),
                labels.len()
            ));
        }
        let mut seen = vec![false; universe];
        let mut pairs = Vec::with_capacity(blocks.len());
        for (mut block, label) in blocks.into_iter().zip(labels) {
            if block.is_empty() {
                return invalid(format!("block '{label}' is empty"));
            }
            block.sort_unstable();
            for &i in &block {
                if i >= universe {
                    return invalid(format!("outcome {i} outside 0..{universe}"));
                }
                if seen[i] {
                    return invalid(format!("outcome {i} appears in more than one block"));
                }
                seen[i] = true;
            }
            pairs.push((block, label));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return invalid(format!("outcome {missing} is not covered by any block"));
        }
        pairs.sort_by_key(|(b, _)| b[0]);
        let (blocks, labels) = pairs.into_iter().unzip();
        Ok(Self {
            universe,
            blocks,
            labels,
        })
    }

    /// Partition into singletons.
    pub fn atomic(universe: usize) -> Result<Self> {
        Self::new(
            universe,
            (0..universe).map(|i| vec![i]).collect(),
            (0..universe).map(|i| i.to_string()).collect(),
        )
    }

    /// Partition with the single block `0..universe`.
    pub fn trivial(universe: usize) -> Result<Self> {
        Self::new(universe, vec![(0..universe).collect()], vec!["all".into()])
    }

    /// Groups outcomes by the value of `key`.
    pub fn from_key_fn<K: Ord + ToString>(
        universe: usize,
        key: impl Fn(usize) -> K,
    ) -> Result<Self> {
        let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
        for i in 0..universe {
            groups.entry(key(i)).or_default().push(i);
        }
        let (labels, blocks) = groups.into_iter().map(|(k, b)| (k.to_string(), b)).unzip();
        Self::new(universe, blocks, labels)
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index of the block holding each outcome.
    pub fn block_of(&self) -> Vec<usize> {
        let mut owner = vec![0; self.universe];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                owner[i] = b;
            }
        }
        owner
    }

    /// Preimage `f⁻¹(C)` under a map given by its image table; empty
    /// preimages are dropped.
    pub fn pullback(&self, image: &[usize]) -> Result<Self> {
        if image.len() != self.universe {
            return invalid(format!(
                "map has domain {} but partition covers {}",
                image.len(),
                self.universe
            ));
        }
        let owner = self.block_of();
        let mut blocks = vec![Vec::new(); self.blocks.len()];
        for (i, &fi) in image.iter().enumerate() {
            if fi >= self.universe {
                return invalid(format!("f({i}) = {fi} outside 0..{}", self.universe));
            }
            blocks[owner[fi]].push(i);
        }
        let (blocks, labels): (Vec<_>, Vec<_>) = blocks
            .into_iter()
            .zip(self.labels.iter().cloned())
            .filter(|(b, _)| !b.is_empty())
            .unzip();
        Self::new(self.universe, blocks, labels)
    }

    /// Probability of each block under `mu`.
    pub fn masses(&self, mu: &ProbVector) -> Result<Vec<f64>> {
        if mu.len() != self.universe {
            return invalid(format!(
                "distribution has {} outcomes, partition covers {}",
                mu.len(),
                self.universe
            ));
        }
        Ok(self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| mu[i]).sum())
            .collect())
    }

    /// `H_μ(C)`.
    pub fn entropy(&self, mu: &ProbVector) -> Result<f64> {
        Ok(self.masses(mu)?.into_iter().map(eta_unchecked).sum())
    }
}

/// Equality of the underlying set systems; labels and order are ignored.
impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        let canon = |p: &Partition| {
            let mut b = p.blocks.clone();
            b.sort();
            b
        };
        self.universe == other.universe && canon(self) == canon(other)
    }
}

/// Join `∨ C_k`: all non-empty intersections, ordered lexicographically by
/// the tuple of constituent block indices.
pub fn join(parts: &[Partition]) -> Result<Partition> {
    let Some(first) = parts.first() else {
        return invalid("join of an empty family of partitions");
    };
    let universe = first.universe;
    if let Some(p) = parts.iter().find(|p| p.universe != universe) {
        return invalid(format!(
            "cannot join partitions over {} and {} outcomes",
            universe, p.universe
        ));
    }
    let owners: Vec<Vec<usize>> = parts.iter().map(Partition::block_of).collect();
    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..universe {
        let key: Vec<usize> = owners.iter().map(|o| o[i]).collect();
        cells.entry(key).or_default().push(i);
    }
    let mut blocks = Vec::with_capacity(cells.len());
    let mut labels = Vec::with_capacity(cells.len());
    for (key, block) in cells {
        let label = key
            .iter()
            .zip(parts)
            .map(|(&b, p)| p.labels[b].as_str())
            .collect::<Vec<_>>()
            .join("&");
        blocks.push(block);
        labels.push(label);
    }
    Ok(Partition {
        universe,
        blocks,
        labels,
    })
}

/// True iff `d ≤ c`, i.e. every block of `d` is a union of blocks of `c`.
pub fn is_coarser(d: &Partition, c: &Partition) -> Result<bool> {
    if d.universe != c.universe {
        return invalid(format!(
            "partitions cover {} and {} outcomes",
            d.universe, c.universe
        ));
    }
    let d_owner = d.block_of();
    Ok(c.blocks
        .iter()
        .all(|block| block.iter().all(|&i| d_owner[i] == d_owner[block[0]])))
}

/// Joint pmf of a finite sequence of discrete random variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    support: BTreeMap<Vec<usize>, f64>,
    length: usize,
}

impl JointDistribution {
    /// Zero weights are dropped from the support.
    pub fn new(entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Self> {
        let mut support: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut length = None;
        for (key, w) in entries {
            if !(w >= 0.0) {
                return invalid(format!("negative weight {w} at {key:?}"));
            }
            match length {
                None => length = Some(key.len()),
                Some(l) if l != key.len() => {
                    return invalid(format!(
                        "key {key:?} has length {}, expected {l}",
                        key.len()
                    ))
                }
                _ => {}
            }
            if w > 0.0 {
                *support.entry(key).or_insert(0.0) += w;
            }
        }
        let Some(length) = length else {
            return invalid("joint distribution has no entries");
        };
        let total: f64 = support.values().sum();
        if (total - 1.0).abs() > DERIVED_SUM_TOL {
            return invalid(format!("joint weights sum to {total}"));
        }
        Ok(Self { support, length })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.support
    }

    /// Marginal over the listed coordinates, in the listed order.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        if let Some(&c) = coords.iter().find(|&&c| c >= self.length) {
            return invalid(format!("coordinate {c} outside 0..{}", self.length));
        }
        if coords.is_empty() {
            return invalid("marginal over no coordinates");
        }
        let mut support: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (key, &w) in &self.support {
            let k: Vec<usize> = coords.iter().map(|&c| key[c]).collect();
            *support.entry(k).or_insert(0.0) += w;
        }
        Ok(Self {
            support,
            length: coords.len(),
        })
    }

    /// Entropy of the whole tuple.
    pub fn entropy(&self) -> f64 {
        self.support.values().map(|&w| eta_unchecked(w)).sum()
    }
}

/// `H(C | D)` for a joint over `(C-index, D-index)` pairs.
pub fn conditional_entropy(joint: &JointDistribution) -> Result<f64> {
    if joint.len() != 2 {
        return invalid(format!(
            "conditional entropy needs a pair distribution, got length {}",
            joint.len()
        ));
    }
    let given = joint.marginal(&[1])?;
    let mut h = 0.0;
    for (key, &w) in joint.support() {
        let md = given.support[&vec![key[1]]];
        if md > 0.0 {
            h += md * eta_unchecked(w / md);
        }
    }
    Ok(h)
}

/// A sequence of entropy estimates together with its running Cesàro means.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub direct_sequence: Vec<f64>,
    pub cesaro_sequence: Vec<f64>,
    pub converged_value: Option<f64>,
    pub converged: bool,
    pub steps_used: usize,
}

/// Running means `b_n = (a_0 + … + a_n)/(n + 1)`.
pub fn cesaro_means(seq: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    seq.iter()
        .enumerate()
        .map(|(i, &a)| {
            acc += a;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Whether the last `window` successive differences of `seq` are below `tol`.
pub(crate) fn tail_settled(seq: &[f64], tol: f64, window: usize) -> bool {
    seq.len() > window
        && seq[seq.len() - window - 1..]
            .windows(2)
            .all(|w| (w[1] - w[0]).abs() < tol)
}

/// Declares convergence when the last `window` successive differences are all
/// below `tol`; the converged value is then the final entry.
pub fn limit_estimate(seq: &[f64], tol: f64, window: usize) -> Result<ConvergenceReport> {
    if seq.is_empty() {
        return invalid("limit estimate of an empty sequence");
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    if window == 0 {
        return invalid("convergence window must be at least 1");
    }
    if let Some(x) = seq.iter().find(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            what: "non-finite entry in sequence".into(),
            residual: *x,
        });
    }
    let converged = tail_settled(seq, tol, window);
    Ok(ConvergenceReport {
        direct_sequence: seq.to_vec(),
        cesaro_sequence: cesaro_means(seq),
        converged_value: converged.then(|| seq[seq.len() - 1]),
        converged,
        steps_used: seq.len(),
    })
}
