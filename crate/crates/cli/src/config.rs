//! Experiment configuration files.

use std::path::Path;

use num_complex::Complex64;
use qdent::entropy::Partition;
use qdent::quantum::{
    index_labels, lvn_instrument, make_density, maximally_mixed, pure_state, DensityState,
    Instrument, Operator, StateVector,
};
use qdent::sz::SzOptions;
use qdent::walks::{
    coin_position_instrument, coined_walk, eigencheck, hadamard_eigenvector, hadamard_walk,
    operator_power, position_instrument, CoinedWalk, ShiftPermutation,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A matrix entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for Complex64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WalkSpec {
    Hadamard {
        #[serde(alias = "N")]
        n: usize,
    },
    Explicit {
        coin_count: usize,
        vertex_count: usize,
        /// `shift[i]` is the image of basis index `i`.
        shift: Vec<usize>,
        /// One coin per vertex, or a single coin used everywhere.
        coins: Vec<MatrixSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentSpec {
    Coherent,
    Rank2Position,
    ExplicitKraus {
        kraus: Vec<MatrixSpec>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    MaximallyMixed,
    Eigenstate,
    Explicit {
        #[serde(default)]
        matrix: Option<MatrixSpec>,
        #[serde(default)]
        vector: Option<Vec<Entry>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    Atomic,
    VertexBlocks,
    Explicit {
        blocks: Vec<Vec<usize>>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub n_max: usize,
    pub n_min: usize,
    pub tol: f64,
    pub window: usize,
    pub prune_eps: f64,
    pub merge_tol: f64,
    pub merge: bool,
    pub strict: bool,
    pub branch_budget: usize,
    /// Report constant / even-run / odd-run class masses per depth.
    pub classify: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        let d = SzOptions::default();
        Self {
            n_max: d.n_max,
            n_min: d.n_min,
            tol: d.tol,
            window: d.window,
            prune_eps: d.prune_eps,
            merge_tol: d.merge_tol,
            merge: d.merge,
            strict: d.strict,
            branch_budget: d.branch_budget,
            classify: false,
        }
    }
}

impl RunSpec {
    pub fn options(&self) -> SzOptions {
        SzOptions {
            n_max: self.n_max,
            n_min: self.n_min,
            tol: self.tol,
            window: self.window,
            prune_eps: self.prune_eps,
            merge_tol: self.merge_tol,
            merge: self.merge,
            track_runs: self.classify,
            strict: self.strict,
            branch_budget: self.branch_budget,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub walk: WalkSpec,
    #[serde(default = "one")]
    pub power: usize,
    pub instrument: InstrumentSpec,
    pub state: StateSpec,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub run: RunSpec,
}

/// Everything a run needs, built and cross-checked from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub walk: CoinedWalk,
    pub step: Operator,
    pub instrument: Instrument,
    pub state: DensityState,
    pub partition: Partition,
    pub options: SzOptions,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn matrix(spec: &MatrixSpec, what: &str) -> Result<Operator, CliError> {
    let rows: Vec<Vec<Complex64>> = spec
        .iter()
        .map(|r| r.iter().map(|&e| e.into()).collect())
        .collect();
    Operator::from_complex_rows(&rows).map_err(|e| config_err(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            config_err(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn build(&self) -> Result<Experiment, CliError> {
        if self.power < 1 {
            return Err(config_err("power must be at least 1"));
        }
        let walk = match &self.walk {
            WalkSpec::Hadamard { n } => {
                if *n < 2 {
                    return Err(config_err(format!("walk.n must be at least 2, got {n}")));
                }
                hadamard_walk(*n)?
            }
            WalkSpec::Explicit {
                coin_count,
                vertex_count,
                shift,
                coins,
            } => {
                let shift = ShiftPermutation::new(shift.clone(), *coin_count, *vertex_count)?;
                let mut ops = coins
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix(m, &format!("walk.coins[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                if ops.len() == 1 {
                    ops = vec![ops[0].clone(); *vertex_count];
                }
                coined_walk(shift, ops)?
            }
        };
        let n = walk.vertex_count();
        let dim = walk.dim();
        let step = operator_power(&walk.unitary, self.power)?;

        let instrument = match &self.instrument {
            InstrumentSpec::Coherent => coherent_for(&walk)?,
            InstrumentSpec::Rank2Position => {
                if walk.shift.coin_count() != 2 {
                    return Err(config_err("rank2_position needs a two-state coin"));
                }
                position_instrument(n)?
            }
            InstrumentSpec::ExplicitKraus { kraus, labels } => {
                let ops = kraus
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix(m, &format!("instrument.kraus[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let labels = labels.clone().unwrap_or_else(|| index_labels(ops.len()));
                // Projective families get the stronger checks and the rank-one fast path.
                match lvn_instrument(ops.clone(), labels.clone()) {
                    Ok(t) => t,
                    Err(_) => Instrument::general(ops, labels)?,
                }
            }
        };
        if instrument.dim() != dim {
            return Err(config_err(format!(
                "instrument acts on dim {}, walk on dim {dim}",
                instrument.dim()
            )));
        }

        let state = match &self.state {
            StateSpec::MaximallyMixed => maximally_mixed(dim)?,
            StateSpec::Eigenstate => {
                let v = hadamard_eigenvector(n)?;
                if v.len() != dim {
                    return Err(config_err("eigenstate needs a two-state coin"));
                }
                eigencheck(&walk.unitary, &v)?;
                pure_state(&v)?
            }
            StateSpec::Explicit { matrix: m, vector } => match (m, vector) {
                (Some(m), None) => make_density(matrix(m, "state.matrix")?)?,
                (None, Some(v)) => {
                    let v = StateVector::from_iterator(v.len(), v.iter().map(|&e| e.into()));
                    pure_state(&v)?
                }
                _ => return Err(config_err("state.explicit needs exactly one of matrix, vector")),
            },
        };
        if state.dim() != dim {
            return Err(config_err(format!(
                "state has dim {}, walk has dim {dim}",
                state.dim()
            )));
        }

        let outcomes = instrument.len();
        let partition = match &self.partition {
            PartitionSpec::Atomic => Partition::atomic(outcomes)?,
            PartitionSpec::VertexBlocks => {
                if outcomes % n != 0 {
                    return Err(config_err(format!(
                        "vertex_blocks needs a multiple of {n} outcomes, instrument has {outcomes}"
                    )));
                }
                Partition::new(
                    outcomes,
                    (0..n)
                        .map(|v| (v..outcomes).step_by(n).collect())
                        .collect(),
                    (0..n).map(|v| format!("C{v}")).collect(),
                )?
            }
            PartitionSpec::Explicit { blocks, labels } => {
                let labels = labels.clone().unwrap_or_else(|| index_labels(blocks.len()));
                Partition::new(outcomes, blocks.clone(), labels)?
            }
        };

        Ok(Experiment {
            walk,
            step,
            instrument,
            state,
            partition,
            options: self.run.options(),
        })
    }
}

fn coherent_for(walk: &CoinedWalk) -> Result<Instrument, CliError> {
    if walk.shift.coin_count() == 2 {
        return Ok(coin_position_instrument(walk.vertex_count())?);
    }
    let dim = walk.dim();
    let basis = (0..dim).map(|i| qdent::quantum::basis_vector(dim, i)).collect();
    Ok(qdent::quantum::coherent_instrument(basis, index_labels(dim))?)
}
