//! Dense state-vector and density-operator simulation.
//!
//! Qubit ordering is little-endian everywhere: qubit `q` is bit `q` of a basis
//! index. Gate matrices follow the tensor-product convention, so the first
//! entry of a gate's target list is the most significant factor of its matrix
//! (`CNOT` with targets `[control, target]` is the familiar
//! `diag(I, X)` block matrix).

mod density;
mod gate;
mod kernel;
mod metrics;
mod pauli;
pub mod random;
mod state;

use nalgebra::DMatrix;
pub use num_complex::Complex64;

pub use density::{DensityOperator, ExpectationMode};
pub use gate::{unitarity_deviation, unitary_check, UnitaryGate};
pub use metrics::{
    fidelity, fidelity_pure, hermitian_eigenvalues, matrix_sqrt_psd, trace_distance,
};
pub use pauli::{
    basis_change, outer, pauli_eigenstate, BasisLabel, Pauli, PauliAxis, ProjectorSpec,
};
pub use state::PureState;

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for construction-time checks (unitarity, hermiticity, norms).
pub const CHECK_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Kronecker product of single-qubit or multi-qubit operators listed from
/// the lowest qubit upwards.
pub fn kron_le(factors: &[CMatrix]) -> CMatrix {
    let mut acc = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for f in factors {
        acc = f.kronecker(&acc);
    }
    acc
}
