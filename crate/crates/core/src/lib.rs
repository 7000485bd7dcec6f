//! Quantum dynamical entropy of coined unitary quantum walks.
//!
//! The crate computes the entropy rate of the outcome process generated by
//! alternating a unitary step `Θ(ρ) = UρU†` with a measurement instrument,
//! together with the classical Markov and Kolmogorov-Sinai baselines it is
//! compared against. Entropies are in nats throughout.
//!
//! Basis convention for walks on `N` vertices: the state `|c, v⟩` has index
//! `c·N + v`, with coin `R = 0` and `L = 1`.

pub mod classical;
pub mod entropy;
pub mod error;
pub mod quantum;
pub mod sz;
pub mod walks;

pub use entropy::{
    cesaro_means, conditional_entropy, entropy, eta, is_coarser, join, limit_estimate,
    ConvergenceReport, JointDistribution, Partition, ProbVector,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quantum::{DensityState, Instrument, InstrumentKind, Operator, StateVector};
pub use walks::{CoinedWalk, ShiftPermutation};
