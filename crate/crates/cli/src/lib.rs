//! Config-driven experiments, the closed-form reproduction table and the
//! classical cycle-walk report behind the `qdent` binary.

pub mod config;

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use qdent::classical::{
    cycle_walk, entropy_rate, markov_entropy, matrix_power, stationary_distribution,
};
use qdent::entropy::{ConvergenceReport, Partition, ProbVector};
use qdent::quantum::{maximally_mixed, pure_state, InstrumentKind};
use qdent::sz::{
    dynamical_entropy, markov_reduction, measurement_entropy, sz_entropy_run, ClassMasses,
    DepthRecord, EntropyReport, SzOptions,
};
use qdent::walks::{
    coin_position_instrument, hadamard_eigenvector, hadamard_walk, position_instrument,
    unitary_power, vertex_partition,
};
use serde::Serialize;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Library(#[from] qdent::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    /// 0 success, 1 tolerance or accuracy failure, 2 usage or config error,
    /// 3 resource budget exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Library(qdent::Error::Accuracy { .. })
            | CliError::Library(qdent::Error::Numeric { .. }) => 1,
            CliError::Library(qdent::Error::Budget { .. }) => 3,
            _ => 2,
        }
    }
}

/// Rounds to 15 significant digits so that emitted numbers are stable.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn fmt_num(x: f64) -> String {
    format!("{}", sig15(x))
}

/// Nats, or bits when requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Nats,
    Bits,
}

impl Unit {
    pub fn show(self, h: f64) -> String {
        match self {
            Unit::Nats => fmt_num(h),
            Unit::Bits => fmt_num(h / LN_2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub converged: bool,
    pub value: Option<f64>,
    pub last: f64,
    pub steps_used: usize,
}

impl From<&ConvergenceReport> for SequenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self {
            converged: r.converged,
            value: r.converged_value.map(sig15),
            last: sig15(*r.direct_sequence.last().unwrap_or(&f64::NAN)),
            steps_used: r.steps_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub c: f64,
    pub e: f64,
    pub o: f64,
}

impl From<ClassMasses> for ClassSummary {
    fn from(m: ClassMasses) -> Self {
        Self {
            c: sig15(m.c),
            e: sig15(m.e),
            o: sig15(m.o),
        }
    }
}

/// Contents of `<stem>.summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub unit: &'static str,
    pub config: ExperimentConfig,
    pub sz_entropy: SequenceSummary,
    pub measurement_entropy: SequenceSummary,
    pub dynamical_entropy: Option<f64>,
    /// Entropy rate of the outcome chain, for rank-one instruments on the
    /// atomic partition.
    pub markov_entropy_rate: Option<f64>,
    pub final_branch_count: usize,
    pub pruned_mass: f64,
    pub classes: Option<ClassSummary>,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<DepthRecord>,
    pub report: EntropyReport,
    pub summary: Summary,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub duration_seconds: f64,
}

pub const CSV_HEADER: &str = "depth,a_n,cesaro,branch_count,merged_count,pruned_mass,c_n,e_n,o_n";

pub fn depth_csv(rows: &[DepthRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (c, e, o) = match r.classes {
            Some(m) => (fmt_num(m.c), fmt_num(m.e), fmt_num(m.o)),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{c},{e},{o}",
            r.depth,
            fmt_num(r.a_n),
            fmt_num(r.cesaro),
            r.branch_count,
            r.merged_count,
            fmt_num(r.pruned_mass),
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a configured experiment and writes `<stem>.depths.csv` and
/// `<stem>.summary.json` into `out_dir` (default: beside the config).
pub fn run_config(
    path: &Path,
    out_dir: Option<&Path>,
    strict: bool,
) -> Result<RunRecord, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    config.run.strict |= strict;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let dir = if dir.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        dir
    };
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut record = execute(&config)?;
    record.csv_path = dir.join(format!("{stem}.depths.csv"));
    record.summary_path = dir.join(format!("{stem}.summary.json"));
    write_file(&record.csv_path, &depth_csv(&record.rows))?;
    let json = serde_json::to_string_pretty(&record.summary).expect("summary serializes");
    write_file(&record.summary_path, &(json + "\n"))?;
    Ok(record)
}

/// Runs a parsed config without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let exp = config.build()?;
    let opts = &exp.options;
    let run = sz_entropy_run(&exp.step, &exp.instrument, &exp.state, &exp.partition, opts)?;
    let sz = run.report()?;
    let meas = measurement_entropy(&exp.instrument, &exp.state, &exp.partition, opts)?;
    let report = EntropyReport::new(sz, meas, opts);
    if !report.sz_entropy.converged {
        warn!("entropy sequence did not settle within n_max = {}", opts.n_max);
    }

    let markov_entropy_rate = if exp.instrument.kind() == InstrumentKind::CoherentStates
        && exp.partition == Partition::atomic(exp.instrument.len())?
    {
        let (p, mu0) = markov_reduction(&exp.step, &exp.instrument, &exp.state)?;
        entropy_rate(&p, &mu0, opts.n_max, opts.tol)?
            .converged_value
            .map(sig15)
    } else {
        None
    };

    let classes = run
        .records()
        .last()
        .and_then(|r| r.classes)
        .map(ClassSummary::from);
    let duration_seconds = started.elapsed().as_secs_f64();
    info!("run finished in {duration_seconds:.3} s");
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION"),
        unit: "nats",
        config: config.clone(),
        sz_entropy: (&report.sz_entropy).into(),
        measurement_entropy: (&report.measurement_entropy).into(),
        dynamical_entropy: report.dynamical_entropy.map(sig15),
        markov_entropy_rate,
        final_branch_count: run.branches().len(),
        pruned_mass: sig15(run.pruned_mass()),
        classes,
        duration_seconds,
    };
    Ok(RunRecord {
        config: config.clone(),
        rows: run.records().to_vec(),
        report,
        summary,
        csv_path: PathBuf::new(),
        summary_path: PathBuf::new(),
        duration_seconds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn error(&self) -> f64 {
        (self.computed - self.expected).abs()
    }

    pub fn passed(&self) -> bool {
        self.error() < self.tolerance
    }
}

/// Vertex count used by the reproduction table.
pub const CHECK_N: usize = 5;

fn converged(r: &EntropyReport, what: &str) -> Result<f64, CliError> {
    r.dynamical_entropy
        .ok_or_else(|| CliError::Tolerance(format!("{what}: entropy sequence did not converge")))
}

/// The closed-form values on the `N = 5` cycle, recomputed.
pub fn paper_check() -> Result<Vec<CheckRow>, CliError> {
    let n = CHECK_N;
    let mut rows = Vec::new();

    let p = cycle_walk(n)?;
    let uniform = ProbVector::uniform(n)?;
    rows.push(CheckRow {
        name: "H(P) cycle",
        expected: LN_2,
        computed: markov_entropy(&p, &uniform)?,
        tolerance: 1e-12,
    });
    rows.push(CheckRow {
        name: "H(P^2) cycle",
        expected: 1.5 * LN_2,
        computed: markov_entropy(&matrix_power(&p, 2)?, &uniform)?,
        tolerance: 1e-12,
    });

    let walk = hadamard_walk(n)?;
    let u1 = walk.unitary.clone();
    let u2 = unitary_power(&walk, 2)?;
    let coherent = coin_position_instrument(n)?;
    let rank2 = position_instrument(n)?;
    let mixed = maximally_mixed(2 * n)?;
    let eigen = pure_state(&hadamard_eigenvector(n)?)?;
    let cv = vertex_partition(n)?;
    let opts = SzOptions::default();

    let sz_rows = [
        ("SZ Θ eigenstate", &u1, &coherent, &eigen, Partition::atomic(2 * n)?, LN_2, 1e-9),
        ("SZ Θ C_V", &u1, &coherent, &mixed, cv.clone(), LN_2, 1e-9),
        ("SZ Θ² C_V", &u2, &coherent, &mixed, cv, 1.5 * LN_2, 1e-9),
        ("SZ Θ rank-2", &u1, &rank2, &mixed, Partition::atomic(n)?, LN_2, 1e-9),
        ("SZ Θ² rank-2", &u2, &rank2, &mixed, Partition::atomic(n)?, 4.0 / 3.0 * LN_2, 1e-5),
    ];
    for (name, u, t, rho, c, expected, tolerance) in sz_rows {
        let r = dynamical_entropy(u, t, rho, &c, &opts)?;
        rows.push(CheckRow {
            name,
            expected,
            computed: converged(&r, name)?,
            tolerance,
        });
    }
    Ok(rows)
}

pub fn check_table(rows: &[CheckRow], unit: Unit) -> String {
    let mut out = format!(
        "{:<16} {:>20} {:>20} {:>12} {:>8}  status   ({})\n",
        "row",
        "expected",
        "computed",
        "|error|",
        "tol",
        unit.name()
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>20} {:>20} {:>12.3e} {:>8.0e}  {}",
            r.name,
            unit.show(r.expected),
            unit.show(r.computed),
            r.error(),
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    out
}

/// Initial distribution for the classical report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Uniform,
    Point(usize),
}

impl std::str::FromStr for Start {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(Start::Uniform);
        }
        s.strip_prefix("point:")
            .and_then(|k| k.parse().ok())
            .map(Start::Point)
            .ok_or_else(|| format!("expected `uniform` or `point:K`, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub n: usize,
    pub power: usize,
    pub entropy: f64,
    pub stationary: ProbVector,
    pub rate: ConvergenceReport,
}

/// `H(P^m)` of the cycle walk and the entropy-rate sequence from `start`.
pub fn markov_cmd(
    n: usize,
    power: usize,
    start: Start,
    n_max: usize,
    tol: f64,
) -> Result<MarkovReport, CliError> {
    if n < 3 {
        return Err(CliError::Usage(format!("--n must be at least 3, got {n}")));
    }
    let p = matrix_power(&cycle_walk(n)?, power)?;
    let stationary = stationary_distribution(&p)?;
    let mu0 = match start {
        Start::Uniform => ProbVector::uniform(n)?,
        Start::Point(k) => ProbVector::point_mass(n, k)?,
    };
    Ok(MarkovReport {
        n,
        power,
        entropy: markov_entropy(&p, &stationary)?,
        stationary,
        rate: entropy_rate(&p, &mu0, n_max, tol)?,
    })
}

pub fn markov_table(r: &MarkovReport, unit: Unit) -> String {
    let mut out = format!(
        "H(P^{}) on the {}-cycle: {} {}\n",
        r.power,
        r.n,
        unit.show(r.entropy),
        unit.name()
    );
    let mu: Vec<String> = r.stationary.as_slice().iter().map(|&x| fmt_num(x)).collect();
    let _ = writeln!(out, "stationary: [{}]", mu.join(", "));
    let _ = writeln!(out, "{:>5} {:>20} {:>20}", "n", "rate", "cesaro");
    for (i, (a, b)) in r
        .rate
        .direct_sequence
        .iter()
        .zip(&r.rate.cesaro_sequence)
        .enumerate()
    {
        let _ = writeln!(out, "{i:>5} {:>20} {:>20}", unit.show(*a), unit.show(*b));
    }
    let _ = match r.rate.converged_value {
        Some(h) => writeln!(out, "converged: {} {}", unit.show(h), unit.name()),
        None => writeln!(out, "converged: no"),
    };
    out
}

pub fn run_summary_text(record: &RunRecord, unit: Unit) -> String {
    let s = &record.summary;
    let show = |x: Option<f64>| x.map(|h| unit.show(h)).unwrap_or_else(|| "not converged".into());
    let mut out = String::new();
    let _ = writeln!(out, "sz entropy:          {}", show(record.report.sz_entropy.converged_value));
    let _ = writeln!(
        out,
        "measurement entropy: {}",
        show(record.report.measurement_entropy.converged_value)
    );
    let _ = writeln!(out, "dynamical entropy:   {}", show(record.report.dynamical_entropy));
    if let Some(h) = s.markov_entropy_rate {
        let _ = writeln!(out, "outcome chain rate:  {}", unit.show(h));
    }
    let _ = writeln!(
        out,
        "depths: {}, final branches: {}, pruned mass: {:e} ({})",
        record.rows.len(),
        s.final_branch_count,
        s.pruned_mass,
        unit.name()
    );
    let _ = writeln!(out, "wrote {}", record.csv_path.display());
    let _ = writeln!(out, "wrote {}", record.summary_path.display());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(sig15(0.0), 0.0);
        assert_eq!(sig15(1.0 / 3.0).to_string(), "0.333333333333333");
        assert_eq!(sig15(LN_2).to_string(), "0.693147180559945");
        assert_eq!(sig15(-2.5e-20), -2.5e-20);
    }

    #[test]
    fn start_parsing() {
        assert_eq!("uniform".parse::<Start>(), Ok(Start::Uniform));
        assert_eq!("point:3".parse::<Start>(), Ok(Start::Point(3)));
        assert!("point:".parse::<Start>().is_err());
        assert!("delta".parse::<Start>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Tolerance("x".into()).exit_code(), 1);
        let budget = qdent::Error::Budget {
            what: "x".into(),
            required: 2,
            limit: 1,
        };
        assert_eq!(CliError::from(budget).exit_code(), 3);
        let acc = qdent::Error::Accuracy {
            pruned: 1.0,
            bound: 1e-6,
        };
        assert_eq!(CliError::from(acc).exit_code(), 1);
    }

    #[test]
    fn markov_rows() {
        let r = markov_cmd(5, 1, Start::Uniform, 10, 1e-12).unwrap();
        assert!((r.entropy - LN_2).abs() < 1e-15);
        let r = markov_cmd(5, 2, Start::Uniform, 10, 1e-12).unwrap();
        assert!((r.entropy - 1.5 * LN_2).abs() < 1e-15);
        let r = markov_cmd(3, 1, Start::Point(0), 50, 1e-12).unwrap();
        assert!((r.rate.converged_value.unwrap() - LN_2).abs() < 1e-12);
        assert!(matches!(
            markov_cmd(2, 1, Start::Uniform, 5, 1e-9),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn csv_leaves_classes_blank_when_not_requested() {
        let rows = vec![DepthRecord {
            depth: 0,
            a_n: LN_2,
            cesaro: LN_2,
            branch_count: 4,
            merged_count: 0,
            pruned_mass: 0.0,
            classes: None,
        }];
        let csv = depth_csv(&rows);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "0,0.693147180559945,0.693147180559945,4,0,0,,,"
        );
    }
}
