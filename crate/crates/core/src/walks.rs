//! Coined unitary walks `U = S(Σ_v U_v ⊗ |v⟩⟨v|)`.
//!
//! States `|c, v⟩` are indexed `c·N + v` with `R = 0`, `L = 1`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::entropy::Partition;
use crate::error::{invalid, Error, Result};
use crate::quantum::{
    basis_vector, coherent_instrument, lvn_instrument, normalized, Instrument, Operator,
    StateVector, OPERATOR_TOL,
};

pub const R: usize = 0;
pub const L: usize = 1;

const POWER_UNITARITY_TOL: f64 = 1e-8;
const EIGEN_TOL: f64 = 1e-8;
const HOMOGENEITY_TOL: f64 = 1e-12;

/// Basis index of `|c, v⟩` on `n` vertices.
pub fn state_index(c: usize, v: usize, n: usize) -> usize {
    c * n + v
}

/// A bijection of the coin-vertex basis; `S|i⟩ = |sigma[i]⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftPermutation {
    sigma: Vec<usize>,
    coin_count: usize,
    vertex_count: usize,
}

impl ShiftPermutation {
    pub fn new(sigma: Vec<usize>, coin_count: usize, vertex_count: usize) -> Result<Self> {
        let n = coin_count * vertex_count;
        if n == 0 || sigma.len() != n {
            return invalid(format!(
                "shift over {coin_count} coins and {vertex_count} vertices needs {n} images, got {}",
                sigma.len()
            ));
        }
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return invalid(format!("shift is not a bijection (image {s})"));
            }
        }
        Ok(Self {
            sigma,
            coin_count,
            vertex_count,
        })
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn coin_count(&self) -> usize {
        self.coin_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Whether every image keeps its coin index.
    pub fn is_coin_preserving(&self) -> bool {
        self.sigma
            .iter()
            .enumerate()
            .all(|(i, &s)| i / self.vertex_count == s / self.vertex_count)
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.sigma.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &s) in self.sigma.iter().enumerate() {
            m[(s, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }
}

/// `(R, v) ↦ (R, v+1)` and `(L, v) ↦ (L, v−1)` mod `n`.
pub fn integer_shift(n: usize) -> Result<ShiftPermutation> {
    if n < 2 {
        return invalid(format!("integer shift needs at least 2 vertices, got {n}"));
    }
    let mut sigma = vec![0; 2 * n];
    for v in 0..n {
        sigma[state_index(R, v, n)] = state_index(R, (v + 1) % n, n);
        sigma[state_index(L, v, n)] = state_index(L, (v + n - 1) % n, n);
    }
    ShiftPermutation::new(sigma, 2, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoinedWalk {
    pub unitary: Operator,
    pub shift: ShiftPermutation,
    pub coins: Vec<Operator>,
    pub coin_preserving: bool,
    pub space_homogeneous: bool,
}

impl CoinedWalk {
    pub fn vertex_count(&self) -> usize {
        self.shift.vertex_count()
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }
}

pub fn hadamard_coin() -> Operator {
    let s = FRAC_1_SQRT_2;
    Operator::from_real_rows(&[vec![s, s], vec![s, -s]]).expect("finite 2x2")
}

pub fn coined_walk(shift: ShiftPermutation, coins: Vec<Operator>) -> Result<CoinedWalk> {
    let (nc, nv) = (shift.coin_count(), shift.vertex_count());
    if coins.len() != nv {
        return invalid(format!("{} coins for {nv} vertices", coins.len()));
    }
    for (v, u) in coins.iter().enumerate() {
        if u.dim() != nc {
            return invalid(format!("coin {v} has dim {}, expected {nc}", u.dim()));
        }
        let r = u.unitarity_residual();
        if r > OPERATOR_TOL {
            return invalid(format!("coin {v} is not unitary: residual {r:.3e}"));
        }
    }
    let mut block = DMatrix::<Complex64>::zeros(nc * nv, nc * nv);
    for (v, u) in coins.iter().enumerate() {
        for c_out in 0..nc {
            for c_in in 0..nc {
                block[(c_out * nv + v, c_in * nv + v)] = u.matrix()[(c_out, c_in)];
            }
        }
    }
    let unitary = Operator::new(shift.matrix() * block)?;
    let r = unitary.unitarity_residual();
    if r > OPERATOR_TOL {
        return Err(Error::Numeric {
            what: "assembled walk is not unitary".into(),
            residual: r,
        });
    }
    let space_homogeneous = coins
        .iter()
        .all(|u| u.max_abs_diff(&coins[0]) <= HOMOGENEITY_TOL);
    Ok(CoinedWalk {
        unitary,
        coin_preserving: shift.is_coin_preserving(),
        shift,
        coins,
        space_homogeneous,
    })
}

/// `S(h ⊗ I)` on the `n`-cycle.
pub fn hadamard_walk(n: usize) -> Result<CoinedWalk> {
    coined_walk(integer_shift(n)?, vec![hadamard_coin(); n])
}

/// `U^m` by repeated multiplication.
pub fn operator_power(u: &Operator, m: usize) -> Result<Operator> {
    if m < 1 {
        return invalid("unitary power exponent must be at least 1");
    }
    let mut acc = u.clone();
    for _ in 1..m {
        acc = acc.compose(u)?;
    }
    let r = acc.unitarity_residual();
    if r > POWER_UNITARITY_TOL {
        return Err(Error::Numeric {
            what: format!("power {m} lost unitarity"),
            residual: r,
        });
    }
    Ok(acc)
}

pub fn unitary_power(w: &CoinedWalk, m: usize) -> Result<Operator> {
    operator_power(&w.unitary, m)
}

/// Returns `λ` with `Uv = λv`, reading `λ` off the largest component of `v`.
pub fn eigencheck(u: &Operator, v: &StateVector) -> Result<Complex64> {
    let v = normalized(v)?;
    let uv = u.apply(&v)?;
    let k = v.icamax();
    let lambda = uv[k] / v[k];
    let residual = (uv - &v * lambda).norm();
    if residual > EIGEN_TOL {
        return Err(Error::NotEigenvector { residual });
    }
    Ok(lambda)
}

/// `((1+√2)|R⟩ + |L⟩) ⊗ Σ_v |v⟩`, normalized; fixed by the Hadamard walk.
pub fn hadamard_eigenvector(n: usize) -> Result<StateVector> {
    if n < 1 {
        return invalid("eigenvector needs at least one vertex");
    }
    let v = DVector::from_fn(2 * n, |i, _| {
        Complex64::new(if i / n == R { 1.0 + SQRT_2 } else { 1.0 }, 0.0)
    });
    normalized(&v)
}

/// Rank-one instrument on the coin-vertex basis, labelled `R,v` / `L,v`.
pub fn coin_position_instrument(n: usize) -> Result<Instrument> {
    let basis = (0..2 * n).map(|i| basis_vector(2 * n, i)).collect();
    let labels = (0..2 * n)
        .map(|i| format!("{},{}", if i / n == R { "R" } else { "L" }, i % n))
        .collect();
    coherent_instrument(basis, labels)
}

/// Rank-two projections `I_C ⊗ |v⟩⟨v|`, one per vertex.
pub fn position_instrument(n: usize) -> Result<Instrument> {
    if n < 1 {
        return invalid("position instrument needs at least one vertex");
    }
    let projections = (0..n)
        .map(|v| {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            m[(state_index(R, v, n), state_index(R, v, n))] = Complex64::new(1.0, 0.0);
            m[(state_index(L, v, n), state_index(L, v, n))] = Complex64::new(1.0, 0.0);
            Operator::new(m)
        })
        .collect::<Result<Vec<_>>>()?;
    lvn_instrument(projections, (0..n).map(|v| v.to_string()).collect())
}

/// Groups `|R, v⟩` and `|L, v⟩` into one block per vertex.
pub fn vertex_partition(n: usize) -> Result<Partition> {
    Partition::new(
        2 * n,
        (0..n)
            .map(|v| vec![state_index(R, v, n), state_index(L, v, n)])
            .collect(),
        (0..n).map(|v| format!("C{v}")).collect(),
    )
}
