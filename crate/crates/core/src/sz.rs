//! Entropy rate of the measured outcome process.
//!
//! The process is generated from `ρ` by measuring with an instrument `T`
//! coarse-grained over a partition, then alternating `Θ(X) = UXU†` and
//! `T(A)`. The probability of an initial block sequence `A_0 … A_n` is
//! `tr(T(A_n) Θ … Θ T(A_0) ρ)`.
//!
//! [`SzRun`] enumerates these sequences depth by depth as a tree of
//! [`TrajectoryBranch`]es and records the conditional entropies
//! `a_n = H(X_n | X_0 … X_{n−1})`. Branches whose normalized conditional
//! states coincide have identical futures, so they are merged.

use std::collections::HashMap;

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::classical::TransitionMatrix;
use crate::entropy::{
    cesaro_means, eta_unchecked, limit_estimate, tail_settled, ConvergenceReport, Partition,
    ProbVector,
};
use crate::error::{invalid, Error, Result};
use crate::quantum::{
    apply_unchecked, check_orthonormal, outcome_pmf, DensityState, Instrument, InstrumentKind,
    Operator, StateVector,
};

/// Pruned mass above which a run is reported as inaccurate.
pub const PRUNED_MASS_BOUND: f64 = 1e-6;
const UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SzOptions {
    /// Deepest `n` for which `a_n` is computed.
    pub n_max: usize,
    /// Convergence is not tested before this depth.
    pub n_min: usize,
    pub tol: f64,
    pub window: usize,
    pub prune_eps: f64,
    pub merge_tol: f64,
    pub merge: bool,
    /// Keep terminal-run statistics so that merged runs stay classifiable.
    pub track_runs: bool,
    pub strict: bool,
    pub branch_budget: usize,
}

impl Default for SzOptions {
    fn default() -> Self {
        Self {
            n_max: 25,
            n_min: 0,
            tol: 1e-7,
            window: 3,
            prune_eps: 1e-14,
            merge_tol: 1e-10,
            merge: true,
            track_runs: false,
            strict: false,
            branch_budget: 1_000_000,
        }
    }
}

impl SzOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.window == 0 {
            return invalid("convergence needs tol > 0 and window ≥ 1");
        }
        if !(self.prune_eps >= 0.0) || !(self.merge_tol > 0.0) {
            return invalid("prune_eps must be ≥ 0 and merge_tol > 0");
        }
        if self.branch_budget == 0 {
            return invalid("branch budget must be positive");
        }
        Ok(())
    }
}

/// Shape of the terminal constant run of a block sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunStats {
    /// The whole sequence is one run.
    pub constant: bool,
    /// Terminal run length minus one is odd.
    pub odd: bool,
}

impl RunStats {
    fn extend(self, same_block: bool) -> Self {
        if same_block {
            Self {
                constant: self.constant,
                odd: !self.odd,
            }
        } else {
            Self {
                constant: false,
                odd: false,
            }
        }
    }

    fn of_sequence(seq: &[usize]) -> Self {
        let last = seq[seq.len() - 1];
        let run = seq.iter().rev().take_while(|&&b| b == last).count();
        Self {
            constant: run == seq.len(),
            odd: (run - 1) % 2 == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBranch {
    /// Full block history; dropped when branches are merged.
    pub block_sequence: Option<Vec<usize>>,
    pub last_block: usize,
    pub run: Option<RunStats>,
    /// Probability of the branch, equal to the trace of `conditional_op`.
    pub weight: f64,
    /// Unnormalized post-measurement operator.
    pub conditional_op: Operator,
}

/// Masses of the constant, even-run and odd-run classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMasses {
    pub c: f64,
    pub e: f64,
    pub o: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRecord {
    pub depth: usize,
    pub a_n: f64,
    pub cesaro: f64,
    pub branch_count: usize,
    pub merged_count: usize,
    pub pruned_mass: f64,
    pub classes: Option<ClassMasses>,
}

#[derive(Debug, Clone)]
pub struct SzRun {
    unitary: Operator,
    instrument: Instrument,
    partition: Partition,
    opts: SzOptions,
    branches: Vec<TrajectoryBranch>,
    depth: usize,
    conditional_entropies: Vec<f64>,
    merged_count: usize,
    pruned_mass: f64,
    records: Vec<DepthRecord>,
}

type MergeKey = (usize, Vec<i64>, Option<RunStats>);

fn fingerprint(op: &DMatrix<Complex64>, weight: f64, grid: f64) -> Vec<i64> {
    let scale = 1.0 / (weight * grid);
    op.iter()
        .flat_map(|z| [(z.re * scale).round() as i64, (z.im * scale).round() as i64])
        .collect()
}

fn check_setup(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
    partition: &Partition,
) -> Result<()> {
    if unitary.dim() != t.dim() || rho.dim() != t.dim() {
        return invalid(format!(
            "dimension mismatch: unitary {}, instrument {}, state {}",
            unitary.dim(),
            t.dim(),
            rho.dim()
        ));
    }
    if partition.universe() != t.len() {
        return invalid(format!(
            "partition covers {} outcomes, instrument has {}",
            partition.universe(),
            t.len()
        ));
    }
    let r = unitary.unitarity_residual();
    if r > UNITARY_TOL {
        return invalid(format!("step operator is not unitary: residual {r:.3e}"));
    }
    Ok(())
}

impl SzRun {
    /// Measures `ρ` once, producing the depth-0 branches and `a_0 = H(X_0)`.
    pub fn start(
        unitary: &Operator,
        t: &Instrument,
        rho: &DensityState,
        partition: &Partition,
        opts: &SzOptions,
    ) -> Result<Self> {
        opts.validate()?;
        check_setup(unitary, t, rho, partition)?;
        let mut run = Self {
            unitary: unitary.clone(),
            instrument: t.clone(),
            partition: partition.clone(),
            opts: opts.clone(),
            branches: Vec::new(),
            depth: 0,
            conditional_entropies: Vec::new(),
            merged_count: 0,
            pruned_mass: 0.0,
            records: Vec::new(),
        };
        let root = TrajectoryBranch {
            block_sequence: Some(Vec::new()),
            last_block: usize::MAX,
            run: None,
            weight: 1.0,
            conditional_op: rho.op().clone(),
        };
        run.expand(vec![root], false)?;
        Ok(run)
    }

    /// Extends every branch by one step `Θ` followed by a measurement.
    pub fn advance(&mut self) -> Result<()> {
        let parents = std::mem::take(&mut self.branches);
        self.expand(parents, true)?;
        self.depth += 1;
        Ok(())
    }

    fn expand(&mut self, parents: Vec<TrajectoryBranch>, evolve: bool) -> Result<()> {
        let keep_sequences = !self.opts.merge;
        let mut children: Vec<TrajectoryBranch> = Vec::new();
        let mut index: HashMap<MergeKey, usize> = HashMap::new();
        let mut a_n = 0.0;
        let mut merged = 0;
        let mut pruned = 0.0;

        for parent in parents {
            let state = if evolve {
                self.unitary.conjugate(&parent.conditional_op)?
            } else {
                parent.conditional_op
            };
            let kids: Vec<(usize, Operator, f64)> = self
                .partition
                .blocks()
                .iter()
                .enumerate()
                .map(|(b, outcomes)| {
                    let op = apply_unchecked(&self.instrument, outcomes, state.matrix());
                    let w = op.trace().re;
                    (b, op, w)
                })
                .collect();
            let total: f64 = kids.iter().map(|k| k.2.max(0.0)).sum();
            if total > 0.0 {
                a_n += kids
                    .iter()
                    .map(|k| total * eta_unchecked(k.2.max(0.0) / total))
                    .sum::<f64>();
            }

            for (b, op, w) in kids {
                if w < self.opts.prune_eps || w <= 0.0 {
                    pruned += w.max(0.0);
                    continue;
                }
                let track = self.opts.track_runs || keep_sequences;
                let run = track.then(|| match parent.run {
                    Some(r) => r.extend(parent.last_block == b),
                    None => RunStats {
                        constant: true,
                        odd: false,
                    },
                });
                let block_sequence = if keep_sequences {
                    parent.block_sequence.as_ref().map(|s| {
                        let mut s = s.clone();
                        s.push(b);
                        s
                    })
                } else {
                    None
                };
                if self.opts.merge {
                    let key = (
                        b,
                        fingerprint(op.matrix(), w, self.opts.merge_tol),
                        if self.opts.track_runs { run } else { None },
                    );
                    if let Some(&i) = index.get(&key) {
                        let target = &mut children[i];
                        target.weight += w;
                        target.conditional_op =
                            Operator::wrap(target.conditional_op.matrix() + op.matrix());
                        merged += 1;
                        continue;
                    }
                    index.insert(key, children.len());
                }
                children.push(TrajectoryBranch {
                    block_sequence,
                    last_block: b,
                    run,
                    weight: w,
                    conditional_op: op,
                });
                if children.len() > self.opts.branch_budget {
                    return Err(Error::Budget {
                        what: format!("live branches at depth {}", self.depth + evolve as usize),
                        required: children.len() as u128,
                        limit: self.opts.branch_budget as u128,
                    });
                }
            }
        }

        self.branches = children;
        self.conditional_entropies.push(a_n);
        self.merged_count += merged;
        self.pruned_mass += pruned;
        let classes = if self.opts.track_runs {
            Some(self.classes()?)
        } else {
            None
        };
        let cesaro = *cesaro_means(&self.conditional_entropies)
            .last()
            .expect("non-empty");
        let record = DepthRecord {
            depth: self.conditional_entropies.len() - 1,
            a_n,
            cesaro,
            branch_count: self.branches.len(),
            merged_count: merged,
            pruned_mass: self.pruned_mass,
            classes,
        };
        debug!(
            "depth {} a_n {:.15} branches {} merged {}",
            record.depth, a_n, record.branch_count, merged
        );
        self.records.push(record);
        Ok(())
    }

    pub fn branches(&self) -> &[TrajectoryBranch] {
        &self.branches
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn conditional_entropies(&self) -> &[f64] {
        &self.conditional_entropies
    }

    /// Total merges performed so far.
    pub fn merged_count(&self) -> usize {
        self.merged_count
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn records(&self) -> &[DepthRecord] {
        &self.records
    }

    pub fn options(&self) -> &SzOptions {
        &self.opts
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    pub fn report(&self) -> Result<ConvergenceReport> {
        limit_estimate(&self.conditional_entropies, self.opts.tol, self.opts.window)
    }

    fn classes(&self) -> Result<ClassMasses> {
        let mut m = ClassMasses {
            c: 0.0,
            e: 0.0,
            o: 0.0,
        };
        for b in &self.branches {
            let stats = match (&b.run, &b.block_sequence) {
                (Some(r), _) => *r,
                (None, Some(seq)) if !seq.is_empty() => RunStats::of_sequence(seq),
                _ => {
                    return Err(Error::Unsupported(
                        "branches were merged without run tracking; \
                         enable track_runs to classify"
                            .into(),
                    ))
                }
            };
            match (stats.constant, stats.odd) {
                (true, _) => m.c += b.weight,
                (false, false) => m.e += b.weight,
                (false, true) => m.o += b.weight,
            }
        }
        Ok(m)
    }
}

/// `tr(T(A_n) Θ … Θ T(A_0) ρ)`.
pub fn cylinder_probability(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
    blocks: &[Vec<usize>],
) -> Result<f64> {
    if blocks.is_empty() {
        return invalid("cylinder needs at least one block");
    }
    if unitary.dim() != t.dim() || rho.dim() != t.dim() {
        return invalid("dimension mismatch between unitary, instrument and state");
    }
    if let Some(&bad) = blocks.iter().flatten().find(|&&i| i >= t.len()) {
        return invalid(format!("outcome {bad} outside 0..{}", t.len()));
    }
    let mut x = apply_unchecked(t, &blocks[0], rho.op().matrix());
    for block in &blocks[1..] {
        let y = unitary.conjugate(&x)?;
        x = apply_unchecked(t, block, y.matrix());
    }
    Ok(x.trace().re)
}

/// `P_{ij} = |⟨a_i|U|a_j⟩|²`.
pub fn cs_transition_matrix(u: &Operator, basis: &[StateVector]) -> Result<TransitionMatrix> {
    check_orthonormal(basis)?;
    if basis.len() != u.dim() {
        return invalid(format!(
            "basis of {} vectors against operator of dim {}",
            basis.len(),
            u.dim()
        ));
    }
    let images: Vec<StateVector> = basis.iter().map(|a| u.matrix() * a).collect();
    let n = basis.len();
    TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        basis[i].dotc(&images[j]).norm_sqr()
    }))
}

/// Runs the trajectory tree until `a_n` settles (after `n_min`) or `n_max`.
pub fn sz_entropy_run(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
    partition: &Partition,
    opts: &SzOptions,
) -> Result<SzRun> {
    let mut run = SzRun::start(unitary, t, rho, partition, opts)?;
    while run.depth < opts.n_max {
        if run.depth >= opts.n_min
            && tail_settled(&run.conditional_entropies, opts.tol, opts.window)
        {
            break;
        }
        run.advance()?;
    }
    if run.pruned_mass > PRUNED_MASS_BOUND {
        if opts.strict {
            return Err(Error::Accuracy {
                pruned: run.pruned_mass,
                bound: PRUNED_MASS_BOUND,
            });
        }
        warn!(
            "pruned mass {:.3e} exceeds {PRUNED_MASS_BOUND:.0e}",
            run.pruned_mass
        );
    }
    Ok(run)
}

/// The same process with trivial dynamics `Θ = id`.
pub fn measurement_entropy(
    t: &Instrument,
    rho: &DensityState,
    partition: &Partition,
    opts: &SzOptions,
) -> Result<ConvergenceReport> {
    sz_entropy_run(&Operator::identity(t.dim())?, t, rho, partition, opts)?.report()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub sz_entropy: ConvergenceReport,
    pub measurement_entropy: ConvergenceReport,
    /// `sz − measurement`, present only when both converged.
    pub dynamical_entropy: Option<f64>,
    pub settings: SzOptions,
}

pub fn dynamical_entropy(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
    partition: &Partition,
    opts: &SzOptions,
) -> Result<EntropyReport> {
    let sz = sz_entropy_run(unitary, t, rho, partition, opts)?.report()?;
    let meas = measurement_entropy(t, rho, partition, opts)?;
    Ok(EntropyReport::new(sz, meas, opts))
}

impl EntropyReport {
    /// Combines the two sequences; the difference is taken only when both
    /// converged.
    pub fn new(sz: ConvergenceReport, meas: ConvergenceReport, opts: &SzOptions) -> Self {
        let dynamical_entropy = match (sz.converged_value, meas.converged_value) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        Self {
            sz_entropy: sz,
            measurement_entropy: meas,
            dynamical_entropy,
            settings: opts.clone(),
        }
    }
}

/// Current class masses of a run over a vertex-indexed partition.
pub fn classify_constant_runs(run: &SzRun) -> Result<ClassMasses> {
    run.classes()
}

/// Transition matrix and initial law of the outcome chain of a rank-one
/// instrument.
pub fn markov_reduction(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
) -> Result<(TransitionMatrix, ProbVector)> {
    let basis = match (t.kind(), t.basis()) {
        (InstrumentKind::CoherentStates, Some(b)) => b,
        _ => {
            return Err(Error::Unsupported(
                "Markov reduction needs a rank-one projective instrument".into(),
            ))
        }
    };
    Ok((cs_transition_matrix(unitary, basis)?, outcome_pmf(t, rho)?))
}

/// Largest converged dynamical entropy over the supplied partitions.
///
/// This is a lower bound on the supremum over all partitions, which is not
/// computed.
pub fn max_over_partitions(
    unitary: &Operator,
    t: &Instrument,
    rho: &DensityState,
    partitions: &[Partition],
    opts: &SzOptions,
) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in partitions.iter().enumerate() {
        let r = dynamical_entropy(unitary, t, rho, c, opts)?;
        if let Some(h) = r.dynamical_entropy {
            if best.is_none_or(|(_, b)| h > b) {
                best = Some((i, h));
            }
        }
    }
    Ok(best)
}
