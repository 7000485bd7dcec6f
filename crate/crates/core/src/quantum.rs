//! Dense finite-dimensional operators, density states and Kraus instruments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::entropy::{ProbVector, DERIVED_SUM_TOL};
use crate::error::{invalid, Result};

/// Entrywise tolerance for Hermiticity, trace and instrument identities.
pub const OPERATOR_TOL: f64 = 1e-10;
/// Smallest eigenvalue a positive semidefinite operator may report.
pub const PSD_TOL: f64 = -1e-9;

pub type StateVector = DVector<Complex64>;

/// A dense square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<Complex64>);

impl Operator {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || !m.is_square() {
            return invalid(format!(
                "operator must be square with dim ≥ 1, got {}x{}",
                m.nrows(),
                m.ncols()
            ));
        }
        if let Some(z) = m.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid(format!("operator has non-finite entry {z}"));
        }
        Ok(Self(m))
    }

    /// Wraps a product of already-validated operators.
    pub(crate) fn wrap(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("operator rows have unequal lengths");
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn from_complex_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("operator rows have unequal lengths");
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn projector(v: &StateVector) -> Result<Self> {
        let u = normalized(v)?;
        Self::new(&u * u.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        same_dim(self, rhs)?;
        Ok(Self(&self.0 * &rhs.0))
    }

    /// `A ⊗ B` with `A` as the major factor.
    pub fn kron(&self, rhs: &Operator) -> Self {
        Self(self.0.kronecker(&rhs.0))
    }

    /// `U X U†` for `self = U`.
    pub fn conjugate(&self, x: &Operator) -> Result<Self> {
        same_dim(self, x)?;
        Ok(Self(&self.0 * &x.0 * self.0.adjoint()))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.dim() {
            return invalid(format!(
                "vector of length {} against operator of dim {}",
                v.len(),
                self.dim()
            ));
        }
        Ok(&self.0 * v)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// Largest entrywise modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        if self.dim() != rhs.dim() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `max |UU† − I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        let prod = Self(&self.0 * self.0.adjoint());
        prod.max_abs_diff(&Self(DMatrix::identity(self.dim(), self.dim())))
    }

    /// Smallest eigenvalue of the Hermitian part `(A + A†)/2`.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `⟨a|self|a⟩`.
    pub fn expectation(&self, a: &StateVector) -> Complex64 {
        (a.adjoint() * &self.0 * a)[(0, 0)]
    }
}

fn same_dim(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return invalid(format!("operator dims differ: {} vs {}", a.dim(), b.dim()));
    }
    Ok(())
}

pub fn basis_vector(dim: usize, i: usize) -> StateVector {
    let mut v = DVector::zeros(dim);
    v[i] = Complex64::new(1.0, 0.0);
    v
}

pub fn normalized(v: &StateVector) -> Result<StateVector> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return invalid(format!("cannot normalize vector of norm {n}"));
    }
    Ok(v.unscale(n))
}

/// A positive semidefinite operator of unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState(Operator);

impl DensityState {
    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

pub fn make_density(m: Operator) -> Result<DensityState> {
    let herm = m.hermitian_residual();
    if herm > OPERATOR_TOL {
        return invalid(format!("density operator not Hermitian: residual {herm:.3e}"));
    }
    let tr = m.trace();
    let off = (tr - Complex64::new(1.0, 0.0)).norm();
    if off > OPERATOR_TOL {
        return invalid(format!("density operator has trace {tr} (off by {off:.3e})"));
    }
    let min = m.min_eigenvalue();
    if min < PSD_TOL {
        return invalid(format!("density operator not positive: eigenvalue {min:.3e}"));
    }
    Ok(DensityState(m))
}

pub fn maximally_mixed(dim: usize) -> Result<DensityState> {
    if dim < 1 {
        return invalid("maximally mixed state needs dim ≥ 1");
    }
    make_density(Operator::identity(dim)?.scale(1.0 / dim as f64))
}

/// `|v⟩⟨v|` after normalizing `v`.
pub fn pure_state(v: &StateVector) -> Result<DensityState> {
    make_density(Operator::projector(v)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrumentKind {
    General,
    LudersVonNeumann,
    CoherentStates,
}

/// A finite Kraus family `{B_i}` with `Σ B_i† B_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    kraus: Vec<Operator>,
    labels: Vec<String>,
    kind: InstrumentKind,
    // Rank-one instruments keep their basis for the `⟨a|ρ|a⟩` fast path.
    basis: Option<Vec<StateVector>>,
}

fn check_family(kraus: &[Operator], labels: &[String]) -> Result<usize> {
    let Some(first) = kraus.first() else {
        return invalid("instrument has no Kraus operators");
    };
    if labels.len() != kraus.len() {
        return invalid(format!(
            "{} labels for {} Kraus operators",
            labels.len(),
            kraus.len()
        ));
    }
    let dim = first.dim();
    if let Some((i, b)) = kraus.iter().enumerate().find(|(_, b)| b.dim() != dim) {
        return invalid(format!("Kraus operator {i} has dim {}, expected {dim}", b.dim()));
    }
    let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
    for b in kraus {
        sum += b.0.adjoint() * &b.0;
    }
    let residual = Operator(sum).max_abs_diff(&Operator::identity(dim)?);
    if residual > OPERATOR_TOL {
        return invalid(format!("Kraus family not complete: residual {residual:.3e}"));
    }
    Ok(dim)
}

/// Labels `"0", "1", …`.
pub fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl Instrument {
    pub fn general(kraus: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        check_family(&kraus, &labels)?;
        Ok(Self {
            kraus,
            labels,
            kind: InstrumentKind::General,
            basis: None,
        })
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> InstrumentKind {
        self.kind
    }

    pub fn basis(&self) -> Option<&[StateVector]> {
        self.basis.as_deref()
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    pub fn is_projective(&self) -> bool {
        self.kind != InstrumentKind::General
    }
}

pub fn lvn_instrument(projections: Vec<Operator>, labels: Vec<String>) -> Result<Instrument> {
    check_family(&projections, &labels)?;
    for (i, p) in projections.iter().enumerate() {
        let herm = p.hermitian_residual();
        let idem = p.compose(p)?.max_abs_diff(p);
        if herm.max(idem) > OPERATOR_TOL {
            return invalid(format!(
                "operator {i} is not a projection: residual {:.3e}",
                herm.max(idem)
            ));
        }
    }
    let zero = Operator::zeros(projections[0].dim())?;
    for i in 0..projections.len() {
        for j in i + 1..projections.len() {
            let r = projections[i].compose(&projections[j])?.max_abs_diff(&zero);
            if r > OPERATOR_TOL {
                return invalid(format!(
                    "projections {i} and {j} are not orthogonal: residual {r:.3e}"
                ));
            }
        }
    }
    let rank_one = projections
        .iter()
        .all(|p| (p.trace().re - 1.0).abs() < 0.5);
    let basis = if rank_one {
        Some(
            projections
                .iter()
                .map(|p| {
                    let col = p.0.column_iter().max_by(|a, b| a.norm().total_cmp(&b.norm()));
                    normalized(&col.expect("non-empty").into_owned())
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(Instrument {
        kraus: projections,
        labels,
        kind: if rank_one {
            InstrumentKind::CoherentStates
        } else {
            InstrumentKind::LudersVonNeumann
        },
        basis,
    })
}

/// The rank-one instrument `{|a_i⟩⟨a_i|}` of an orthonormal basis.
pub fn coherent_instrument(basis: Vec<StateVector>, labels: Vec<String>) -> Result<Instrument> {
    check_orthonormal(&basis)?;
    let kraus = basis
        .iter()
        .map(|a| Operator::new(a * a.adjoint()))
        .collect::<Result<Vec<_>>>()?;
    check_family(&kraus, &labels)?;
    Ok(Instrument {
        kraus,
        labels,
        kind: InstrumentKind::CoherentStates,
        basis: Some(basis),
    })
}

pub fn check_orthonormal(basis: &[StateVector]) -> Result<()> {
    let dim = basis.first().map(|v| v.len()).unwrap_or(0);
    if dim == 0 || basis.len() != dim || basis.iter().any(|v| v.len() != dim) {
        return invalid(format!(
            "a basis of dimension {dim} needs {dim} vectors of that length, got {}",
            basis.len()
        ));
    }
    for i in 0..dim {
        for j in i..dim {
            let g = basis[i].dotc(&basis[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            let r = (g - Complex64::new(want, 0.0)).norm();
            if r > OPERATOR_TOL {
                return invalid(format!(
                    "basis not orthonormal at ({i},{j}): residual {r:.3e}"
                ));
            }
        }
    }
    Ok(())
}

fn check_outcomes(t: &Instrument, outcomes: &[usize]) -> Result<()> {
    if let Some(&bad) = outcomes.iter().find(|&&i| i >= t.len()) {
        return invalid(format!("outcome {bad} outside 0..{}", t.len()));
    }
    Ok(())
}

/// `T(E)ρ = Σ_{i∈E} B_i ρ B_i†`, unnormalized.
pub fn apply_instrument(t: &Instrument, outcomes: &[usize], rho: &Operator) -> Result<Operator> {
    check_outcomes(t, outcomes)?;
    if rho.dim() != t.dim() {
        return invalid(format!(
            "operator of dim {} against instrument of dim {}",
            rho.dim(),
            t.dim()
        ));
    }
    Ok(apply_unchecked(t, outcomes, rho.matrix()))
}

pub(crate) fn apply_unchecked(
    t: &Instrument,
    outcomes: &[usize],
    rho: &DMatrix<Complex64>,
) -> Operator {
    let dim = t.dim();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    match &t.basis {
        Some(basis) => {
            for &i in outcomes {
                let a = &basis[i];
                let w = (a.adjoint() * rho * a)[(0, 0)];
                out += a * a.adjoint() * w;
            }
        }
        None => {
            for &i in outcomes {
                let b = &t.kraus[i].0;
                out += b * rho * b.adjoint();
            }
        }
    }
    Operator(out)
}

/// `tr(B_i ρ B_i†)` for every outcome.
pub fn outcome_pmf(t: &Instrument, rho: &DensityState) -> Result<ProbVector> {
    if rho.dim() != t.dim() {
        return invalid(format!(
            "state of dim {} against instrument of dim {}",
            rho.dim(),
            t.dim()
        ));
    }
    let p = (0..t.len())
        .map(|i| apply_unchecked(t, &[i], rho.op().matrix()).trace().re.max(0.0))
        .collect();
    ProbVector::with_tolerance(p, DERIVED_SUM_TOL)
}
