//! Random constructions driven by proptest-generated coordinates.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qdent::quantum::{index_labels, lvn_instrument, make_density, DensityState, Instrument, Operator};

pub fn complex_matrix(rows: usize, cols: usize, xs: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        Complex64::new(xs[k], xs[k + 1])
    })
}

/// Columns of the thin QR factor of a random `rows × cols` matrix.
pub fn isometry(rows: usize, cols: usize, xs: &[f64]) -> DMatrix<Complex64> {
    let mut m = complex_matrix(rows, cols, xs);
    // Keep the sample well conditioned.
    for j in 0..cols {
        m[(j, j)] += Complex64::new(3.0, 0.0);
    }
    m.qr().q()
}

pub fn unitary(dim: usize, xs: &[f64]) -> Operator {
    Operator::new(isometry(dim, dim, xs)).unwrap()
}

pub fn density(dim: usize, xs: &[f64]) -> DensityState {
    let a = complex_matrix(dim, dim, xs);
    let m = &a * a.adjoint() + DMatrix::identity(dim, dim) * Complex64::new(1e-3, 0.0);
    let tr = m.trace();
    make_density(Operator::new(m / tr).unwrap()).unwrap()
}

/// Kraus family `B_i` cut from the row blocks of a `k·dim × dim` isometry.
pub fn general_instrument(dim: usize, k: usize, xs: &[f64]) -> Instrument {
    let v = isometry(k * dim, dim, xs);
    let kraus = (0..k)
        .map(|i| Operator::new(v.rows(i * dim, dim).into_owned()).unwrap())
        .collect();
    Instrument::general(kraus, index_labels(k)).unwrap()
}

/// Projections onto groups of columns of a random unitary.
pub fn lvn_from_groups(dim: usize, groups: &[usize], xs: &[f64]) -> Instrument {
    let q = isometry(dim, dim, xs);
    let projections = (0..=*groups.iter().max().unwrap())
        .map(|g| {
            let mut p = DMatrix::zeros(dim, dim);
            for (j, _) in groups.iter().enumerate().filter(|(_, &h)| h == g) {
                let col = q.column(j);
                p += col * col.adjoint();
            }
            Operator::new(p).unwrap()
        })
        .collect();
    lvn_instrument(projections, index_labels(*groups.iter().max().unwrap() + 1)).unwrap()
}

pub fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

/// A probability vector with strictly positive weights.
pub fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}
