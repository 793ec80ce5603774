use nalgebra::{DMatrix, SymmetricEigen};

use super::{c, CMatrix, DensityOperator, PureState};

/// Eigenvalues of a Hermitian matrix (hermiticity is assumed, not checked).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Slightly negative eigenvalues from rounding are clamped to zero.
pub fn matrix_sqrt_psd(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(m.clone());
    let vecs = &eig.eigenvectors;
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(l.max(0.0).sqrt(), 0.0)));
    vecs * roots * vecs.adjoint()
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let diff = a.matrix() - b.matrix();
    0.5 * hermitian_eigenvalues(&diff)
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²` of normalized operators.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let sa = matrix_sqrt_psd(a.matrix());
    let inner = &sa * b.matrix() * &sa;
    let root_trace: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    root_trace * root_trace
}

/// `|⟨ψ|φ⟩|²`, insensitive to global phase.
pub fn fidelity_pure(a: &PureState, b: &PureState) -> f64 {
    a.inner(b).norm_sqr()
}
