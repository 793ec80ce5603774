use nalgebra::DMatrix;
use num_complex::Complex64;

use super::kernel::{conjugate_in_place, left_multiply_in_place};
use super::state::check_targets;
use super::{
    c, max_abs_diff, BasisLabel, CMatrix, Pauli, ProjectorSpec, PureState, UnitaryGate, CHECK_TOL,
};
use crate::error::{Error, Result};

/// Whether [`DensityOperator::expectation`] divides by the carried trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationMode {
    /// `Tr(Oρ)`.
    Raw,
    /// `Tr(Oρ) / Tr(ρ)`.
    Normalized,
}

/// Density operator, possibly subnormalized.
///
/// Branch states of a wire cut are deliberately left unnormalized; their
/// trace (the Born weight of the branch) is carried in `trace_weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    num_qubits: usize,
    matrix: CMatrix,
    trace_weight: f64,
}

impl DensityOperator {
    pub fn from_pure(state: &PureState) -> DensityOperator {
        let amps = state.amplitudes();
        let dim = amps.len();
        let matrix = DMatrix::from_fn(dim, dim, |r, col| amps[r] * amps[col].conj());
        DensityOperator {
            num_qubits: state.num_qubits(),
            matrix,
            trace_weight: state.norm_sqr(),
        }
    }

    /// Wraps a matrix after checking shape, hermiticity and positivity.
    pub fn from_matrix(matrix: CMatrix) -> Result<DensityOperator> {
        let dim = matrix.nrows();
        if dim < 2 || !dim.is_power_of_two() || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim.next_power_of_two().max(2),
                found: dim,
            });
        }
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > CHECK_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let op = DensityOperator::from_matrix_unchecked(matrix);
        let min_eig = super::hermitian_eigenvalues(&op.matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(Error::Consistency(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(op)
    }

    /// Wraps a matrix without positivity checks; used for signed sums whose
    /// result is verified separately.
    pub fn from_matrix_unchecked(matrix: CMatrix) -> DensityOperator {
        let num_qubits = matrix.nrows().trailing_zeros() as usize;
        let trace_weight = matrix.trace().re;
        DensityOperator {
            num_qubits,
            matrix,
            trace_weight,
        }
    }

    pub fn maximally_mixed(num_qubits: usize) -> DensityOperator {
        let dim = 1usize << num_qubits;
        let matrix = CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0);
        DensityOperator {
            num_qubits,
            matrix,
            trace_weight: 1.0,
        }
    }

    /// Single-qubit state `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<DensityOperator> {
        let m = (Pauli::I.matrix()
            + Pauli::X.matrix() * c(r[0], 0.0)
            + Pauli::Y.matrix() * c(r[1], 0.0)
            + Pauli::Z.matrix() * c(r[2], 0.0))
            * c(0.5, 0.0);
        DensityOperator::from_matrix(m)
    }

    pub fn basis(label: BasisLabel) -> DensityOperator {
        DensityOperator::from_matrix_unchecked(label.projector())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace_weight(&self) -> f64 {
        self.trace_weight
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    fn refresh_weight(&mut self) {
        self.trace_weight = self.matrix.trace().re;
    }

    /// Copy scaled to unit trace.
    pub fn normalized(&self) -> Result<DensityOperator> {
        if self.trace_weight.abs() < 1e-300 {
            return Err(Error::ZeroWeight);
        }
        Ok(DensityOperator {
            num_qubits: self.num_qubits,
            matrix: &self.matrix * c(1.0 / self.trace_weight, 0.0),
            trace_weight: 1.0,
        })
    }

    pub fn scaled(&self, factor: f64) -> DensityOperator {
        DensityOperator {
            num_qubits: self.num_qubits,
            matrix: &self.matrix * c(factor, 0.0),
            trace_weight: self.trace_weight * factor,
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// `ρ ↦ UρU†`.
    pub fn apply(&mut self, gate: &UnitaryGate) -> Result<()> {
        check_targets(&gate.targets, self.num_qubits)?;
        conjugate_in_place(
            self.matrix.as_mut_slice(),
            self.num_qubits,
            &gate.targets,
            &gate.matrix,
        );
        self.refresh_weight();
        Ok(())
    }

    /// `ρ ↦ KρK†` for an arbitrary operator `K`.
    pub fn conjugate_by(&mut self, op: &CMatrix, targets: &[usize]) -> Result<()> {
        check_targets(targets, self.num_qubits)?;
        if op.nrows() != 1 << targets.len() {
            return Err(Error::Dimension {
                expected: 1 << targets.len(),
                found: op.nrows(),
            });
        }
        conjugate_in_place(self.matrix.as_mut_slice(), self.num_qubits, targets, op);
        self.refresh_weight();
        Ok(())
    }

    /// `(ΠρΠ, Tr(Πρ))`; the projected operator keeps its subnormalized trace.
    pub fn project(&self, proj: ProjectorSpec) -> Result<(DensityOperator, f64)> {
        let mut out = self.clone();
        out.conjugate_by(&proj.label.projector(), &[proj.target])?;
        let p = out.trace_weight;
        Ok((out, p))
    }

    /// Reduced operator on `keep`; output qubit `j` is input qubit `keep[j]`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        check_targets(keep, self.num_qubits)?;
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let spread = |local: usize, qubits: &[usize]| -> usize {
            qubits
                .iter()
                .enumerate()
                .fold(0, |acc, (j, &q)| acc | (((local >> j) & 1) << q))
        };
        let kept_idx: Vec<usize> = (0..1usize << keep.len()).map(|a| spread(a, keep)).collect();
        let traced_idx: Vec<usize> = (0..1usize << traced.len())
            .map(|t| spread(t, &traced))
            .collect();
        let out_dim = kept_idx.len();
        let matrix = DMatrix::from_fn(out_dim, out_dim, |r, col| {
            traced_idx
                .iter()
                .map(|t| self.matrix[(kept_idx[r] | t, kept_idx[col] | t)])
                .sum()
        });
        let mut out = DensityOperator::from_matrix_unchecked(matrix);
        out.num_qubits = keep.len();
        Ok(out)
    }

    /// `self ⊗ upper`, with `self` on the low qubits.
    pub fn tensor(&self, upper: &DensityOperator) -> DensityOperator {
        DensityOperator {
            num_qubits: self.num_qubits + upper.num_qubits,
            matrix: upper.matrix.kronecker(&self.matrix),
            trace_weight: self.trace_weight * upper.trace_weight,
        }
    }

    /// Replaces `qubit` by the pure state `label`: `Tr_q(ρ) ⊗_q |l⟩⟨l|`.
    pub fn replace_qubit(&self, qubit: usize, label: BasisLabel) -> Result<DensityOperator> {
        check_targets(&[qubit], self.num_qubits)?;
        let proj = label.projector();
        let bit = 1usize << qubit;
        let dim = self.dim();
        let matrix = DMatrix::from_fn(dim, dim, |r, col| {
            let (r0, c0) = (r & !bit, col & !bit);
            let reduced = self.matrix[(r0, c0)] + self.matrix[(r0 | bit, c0 | bit)];
            reduced * proj[((r >> qubit) & 1, (col >> qubit) & 1)]
        });
        Ok(DensityOperator::from_matrix_unchecked(matrix))
    }

    /// `Tr(Oρ)` (raw) or `Tr(Oρ)/Tr(ρ)` (normalized) for an operator on `targets`.
    pub fn expectation(
        &self,
        observable: &CMatrix,
        targets: &[usize],
        mode: ExpectationMode,
    ) -> Result<f64> {
        check_targets(targets, self.num_qubits)?;
        let dim = 1usize << targets.len();
        if observable.nrows() != dim || observable.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: observable.nrows(),
            });
        }
        let herm = max_abs_diff(observable, &observable.adjoint());
        if herm > CHECK_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let mut tmp = self.matrix.clone();
        left_multiply_in_place(tmp.as_mut_slice(), self.num_qubits, targets, observable);
        let raw = tmp.trace().re;
        match mode {
            ExpectationMode::Raw => Ok(raw),
            ExpectationMode::Normalized => {
                if self.trace_weight.abs() < 1e-300 {
                    Err(Error::ZeroWeight)
                } else {
                    Ok(raw / self.trace_weight)
                }
            }
        }
    }

    /// Raw `Tr(Pρ)` for a Pauli product, `paulis[j]` acting on `qubits[j]`.
    pub fn pauli_expectation(&self, paulis: &[(usize, Pauli)]) -> Result<f64> {
        let mut tmp = self.matrix.clone();
        let qubits: Vec<usize> = paulis.iter().map(|p| p.0).collect();
        check_targets(&qubits, self.num_qubits)?;
        for &(q, p) in paulis {
            if p != Pauli::I {
                left_multiply_in_place(tmp.as_mut_slice(), self.num_qubits, &[q], &p.matrix());
            }
        }
        Ok(tmp.trace().re)
    }

    /// Computational-basis diagonal; sums to the carried trace.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.matrix[(k, k)].re).collect()
    }
}

impl std::ops::Add for &DensityOperator {
    type Output = DensityOperator;
    fn add(self, rhs: &DensityOperator) -> DensityOperator {
        DensityOperator::from_matrix_unchecked(&self.matrix + &rhs.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::PauliAxis;

    fn ket(labels: &[BasisLabel]) -> DensityOperator {
        PureState::product(labels).to_density()
    }

    fn bell() -> DensityOperator {
        let mut s = PureState::product(&[
            BasisLabel::new(0, PauliAxis::X),
            BasisLabel::new(0, PauliAxis::Z),
        ]);
        s.apply(&UnitaryGate::cnot(0, 1).unwrap()).unwrap();
        s.to_density()
    }

    const Z0: BasisLabel = BasisLabel::new(0, PauliAxis::Z);
    const Z1: BasisLabel = BasisLabel::new(1, PauliAxis::Z);

    #[test]
    fn project_examples() {
        let rho = ket(&[Z0]);
        let (out, p) = rho.project(ProjectorSpec::new(PauliAxis::Z, 0, 0)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-15);

        let (out, p) = rho.project(ProjectorSpec::new(PauliAxis::X, 0, 0)).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let plus = BasisLabel::new(0, PauliAxis::X).projector() * c(0.5, 0.0);
        assert!(max_abs_diff(out.matrix(), &plus) < 1e-15);

        let y0 = ket(&[BasisLabel::new(0, PauliAxis::Y)]);
        let (_, p) = y0.project(ProjectorSpec::new(PauliAxis::Y, 1, 0)).unwrap();
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let reduced = bell().partial_trace(&[0]).unwrap();
        assert!(
            max_abs_diff(
                reduced.matrix(),
                DensityOperator::maximally_mixed(1).matrix()
            ) < 1e-15
        );

        // GHZ(3) oracle: (|000⟩+|111⟩)/√2, keep {0,1} -> (|00⟩⟨00|+|11⟩⟨11|)/2
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0, 0.0); 8];
        amps[0] = c(h, 0.0);
        amps[7] = c(h, 0.0);
        let ghz = PureState::from_amplitudes(amps).unwrap().to_density();
        let reduced = ghz.partial_trace(&[0, 1]).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = c(0.5, 0.0);
        want[(3, 3)] = c(0.5, 0.0);
        assert!(max_abs_diff(reduced.matrix(), &want) < 1e-15);

        assert!(matches!(ghz.partial_trace(&[]), Err(Error::EmptyKeep)));
    }

    #[test]
    fn partial_trace_reorders() {
        let rho = ket(&[Z0, Z1]);
        let swapped = rho.partial_trace(&[1, 0]).unwrap();
        assert!(max_abs_diff(swapped.matrix(), ket(&[Z1, Z0]).matrix()) < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let zero = ket(&[Z0]);
        assert!(
            (zero
                .expectation(&Pauli::Z.matrix(), &[0], ExpectationMode::Raw)
                .unwrap()
                - 1.0)
                .abs()
                < 1e-15
        );
        let b = bell();
        let zz = Pauli::Z.matrix().kronecker(&Pauli::Z.matrix());
        let yy = Pauli::Y.matrix().kronecker(&Pauli::Y.matrix());
        assert!((b.expectation(&zz, &[0, 1], ExpectationMode::Raw).unwrap() - 1.0).abs() < 1e-14);
        assert!((b.expectation(&yy, &[0, 1], ExpectationMode::Raw).unwrap() + 1.0).abs() < 1e-14);
        let mixed = DensityOperator::maximally_mixed(1);
        assert!(
            mixed
                .expectation(&Pauli::X.matrix(), &[0], ExpectationMode::Raw)
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!(matches!(
            mixed.expectation(&zz, &[0], ExpectationMode::Raw),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn normalized_expectation_divides_weight() {
        let (branch, p) = ket(&[Z0])
            .project(ProjectorSpec::new(PauliAxis::X, 1, 0))
            .unwrap();
        let raw = branch
            .expectation(&Pauli::X.matrix(), &[0], ExpectationMode::Raw)
            .unwrap();
        let norm = branch
            .expectation(&Pauli::X.matrix(), &[0], ExpectationMode::Normalized)
            .unwrap();
        assert!((raw + p).abs() < 1e-15);
        assert!((norm + 1.0).abs() < 1e-14);
    }

    #[test]
    fn replace_qubit_resets() {
        let b = bell();
        let out = b
            .replace_qubit(1, BasisLabel::new(1, PauliAxis::X))
            .unwrap();
        let want = DensityOperator::maximally_mixed(1)
            .tensor(&DensityOperator::basis(BasisLabel::new(1, PauliAxis::X)));
        assert!(max_abs_diff(out.matrix(), want.matrix()) < 1e-15);
    }

    #[test]
    fn from_matrix_rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2) * c(0.5, 0.0);
        m[(0, 1)] = c(0.3, 0.0);
        assert!(matches!(
            DensityOperator::from_matrix(m),
            Err(Error::NotHermitian(_))
        ));
    }
}
