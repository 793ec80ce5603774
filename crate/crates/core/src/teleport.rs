//! Teleportation with forged Bell pairs, and controlled-gate teleportation.
//!
//! Bell outcomes are numbered
//!
//! | s | Bell state | correction on Bob |
//! |---|------------|-------------------|
//! | 0 | Φ+         | I                 |
//! | 1 | Ψ+         | X                 |
//! | 2 | Φ−         | Z                 |
//! | 3 | Ψ−         | XZ                |
//!
//! with `|B_s⟩ = (I ⊗ σ_s)|Φ+⟩` on (input, Alice's half).

use crate::error::{Error, Result};
use crate::forging::QuasiDecomposition;
use crate::qsim::{
    c, fidelity, fidelity_pure, BasisLabel, CMatrix, DensityOperator, Pauli, PauliAxis,
    ProjectorSpec, PureState, UnitaryGate,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BellOutcome(u8);

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome(0),
        BellOutcome(1),
        BellOutcome(2),
        BellOutcome(3),
    ];

    pub fn new(s: u8) -> Result<BellOutcome> {
        if s < 4 {
            Ok(BellOutcome(s))
        } else {
            Err(Error::Consistency(format!("Bell outcome {s} out of range")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// `σ_s`, the Pauli relating `|B_s⟩` to `|Φ+⟩`; also Bob's correction.
    pub fn correction(self) -> CMatrix {
        match self.0 {
            0 => Pauli::I.matrix(),
            1 => Pauli::X.matrix(),
            2 => Pauli::Z.matrix(),
            _ => Pauli::X.matrix() * Pauli::Z.matrix(),
        }
    }

    /// `|B_s⟩` with the input qubit as the most significant factor.
    pub fn state_vector(self) -> Vec<num_complex::Complex64> {
        let sigma = self.correction();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![c(0.0, 0.0); 4];
        for k in 0..2 {
            for m in 0..2 {
                v[k * 2 + m] += sigma[(m, k)] * h;
            }
        }
        v
    }

    /// `𝒰_s(ρ) = σ_s ρ σ_s†`.
    pub fn correct(self, rho: &DensityOperator) -> DensityOperator {
        let s = self.correction();
        DensityOperator::from_matrix_unchecked(&s * rho.matrix() * s.adjoint())
    }
}

fn single_qubit(rho: &DensityOperator) -> Result<()> {
    if rho.num_qubits() != 1 {
        return Err(Error::Dimension {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `p(s|i) = Tr(Π_s ρ_C ⊗ ρ_A)`, evaluated both through the Bell projector
/// and through `Tr(ρ_A^T σ_s ρ_C σ_s†)/2`. The two must agree.
pub fn conditional_prob(
    rho_c: &DensityOperator,
    rho_a: &DensityOperator,
    s: BellOutcome,
) -> Result<f64> {
    single_qubit(rho_c)?;
    single_qubit(rho_a)?;
    let v = s.state_vector();
    let joint = rho_c.matrix().kronecker(rho_a.matrix());
    let mut projector = 0.0;
    for r in 0..4 {
        for k in 0..4 {
            projector += (v[r].conj() * joint[(r, k)] * v[k]).re;
        }
    }
    let sigma = s.correction();
    let transposed = (rho_a.matrix().transpose() * &sigma * rho_c.matrix() * sigma.adjoint())
        .trace()
        .re
        / 2.0;
    if (projector - transposed).abs() > 1e-10 {
        return Err(Error::Consistency(format!(
            "p(s|i) projector form {projector} vs transposed form {transposed}"
        )));
    }
    Ok(projector)
}

/// Unnormalized Bob state `Σ_i x_i p(s|i) 𝒰_s(ρ_B^i)` for one Bell outcome.
pub fn forged_branch(
    rho_c: &DensityOperator,
    decomp: &QuasiDecomposition,
    s: BellOutcome,
) -> Result<DensityOperator> {
    let mut acc = CMatrix::zeros(2, 2);
    for term in &decomp.terms {
        let p = conditional_prob(rho_c, &term.alice.density(), s)?;
        acc += s.correct(&term.bob.density()).matrix() * c(term.coefficient * p, 0.0);
    }
    Ok(DensityOperator::from_matrix_unchecked(acc))
}

/// Bob's output after teleporting `ρ_C` through `decomp` with the fixed
/// outcome `s0`, normalized.
pub fn forged_teleportation(
    rho_c: &DensityOperator,
    decomp: &QuasiDecomposition,
    s0: BellOutcome,
) -> Result<DensityOperator> {
    forged_branch(rho_c, decomp, s0)?.normalized()
}

/// Variant summed over all four outcomes; the weights already total one.
pub fn forged_teleportation_summed(
    rho_c: &DensityOperator,
    decomp: &QuasiDecomposition,
) -> Result<DensityOperator> {
    let mut acc = CMatrix::zeros(2, 2);
    for s in BellOutcome::ALL {
        acc += forged_branch(rho_c, decomp, s)?.matrix();
    }
    DensityOperator::from_matrix_unchecked(acc).normalized()
}

/// The six values `p(0|i_α)` behind a forged teleportation and the Bloch
/// vector they determine.
#[derive(Clone, Debug, PartialEq)]
pub struct QstReport {
    pub probabilities: Vec<(BasisLabel, f64)>,
    pub bloch: [f64; 3],
}

/// Recovers the Bloch vector of `ρ_C` from `p(0|i_α)` alone. Since
/// `p(0|i) = Tr(ρ_i^T ρ_C)/2`, the y eigenstates enter transposed and the y
/// component changes sign relative to x and z.
pub fn qst_equivalence(rho_c: &DensityOperator) -> Result<QstReport> {
    let s0 = BellOutcome(0);
    let mut probabilities = Vec::with_capacity(6);
    for axis in PauliAxis::ALL {
        for bit in 0..2 {
            let label = BasisLabel::new(bit, axis);
            let p = conditional_prob(rho_c, &DensityOperator::basis(label), s0)?;
            probabilities.push((label, p));
        }
    }
    let p = |axis: PauliAxis, bit: u8| probabilities[axis.index() * 2 + bit as usize].1;
    let bloch = [
        2.0 * (p(PauliAxis::X, 0) - p(PauliAxis::X, 1)),
        2.0 * (p(PauliAxis::Y, 1) - p(PauliAxis::Y, 0)),
        2.0 * (p(PauliAxis::Z, 0) - p(PauliAxis::Z, 1)),
    ];
    Ok(QstReport {
        probabilities,
        bloch,
    })
}

/// `U = Σ_i σ_i ⊗ U_i` with the Pauli acting on the control (first) factor.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliBlockExpansion {
    /// `U_0, U_x, U_y, U_z`.
    pub blocks: [CMatrix; 4],
}

impl PauliBlockExpansion {
    pub fn block(&self, p: Pauli) -> &CMatrix {
        &self.blocks[match p {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }]
    }

    pub fn reassemble(&self) -> CMatrix {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
            .iter()
            .zip(&self.blocks)
            .fold(CMatrix::zeros(4, 4), |acc, (p, b)| {
                acc + p.matrix().kronecker(b)
            })
    }
}

/// `U_i = Tr_first((σ_i ⊗ I) U)/2`.
pub fn pauli_expand(matrix: &CMatrix) -> Result<PauliBlockExpansion> {
    if matrix.shape() != (4, 4) {
        return Err(Error::Dimension {
            expected: 4,
            found: matrix.nrows(),
        });
    }
    let block = |p: Pauli| {
        let m = p.matrix().kronecker(&CMatrix::identity(2, 2)) * matrix;
        CMatrix::from_fn(2, 2, |r, k| (m[(r, k)] + m[(2 + r, 2 + k)]) * 0.5)
    };
    Ok(PauliBlockExpansion {
        blocks: [
            block(Pauli::I),
            block(Pauli::X),
            block(Pauli::Y),
            block(Pauli::Z),
        ],
    })
}

/// Outcome of the teleportability test with the offending block norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TeleportabilityWitness {
    pub teleportable: bool,
    pub norm_x: f64,
    pub norm_y: f64,
}

/// True iff `‖U_x‖, ‖U_y‖ ≤ tol` (Frobenius). With `frame = Some(U_c)` the gate
/// is first conjugated to `(U_c† ⊗ I) U (U_c ⊗ I)`; no frame is searched for.
pub fn is_teleportable(
    gate: &UnitaryGate,
    frame: Option<&CMatrix>,
    tol: f64,
) -> Result<TeleportabilityWitness> {
    if gate.arity() != 2 {
        return Err(Error::Arity(gate.arity()));
    }
    let matrix = match frame {
        Some(uc) => {
            let f = uc.kronecker(&CMatrix::identity(2, 2));
            f.adjoint() * &gate.matrix * f
        }
        None => gate.matrix.clone(),
    };
    let e = pauli_expand(&matrix)?;
    let norm_x = e.block(Pauli::X).norm();
    let norm_y = e.block(Pauli::Y).norm();
    Ok(TeleportabilityWitness {
        teleportable: norm_x <= tol && norm_y <= tol,
        norm_x,
        norm_y,
    })
}

/// The two measurement branches of a gate teleportation, each corrected and
/// normalized, with their fidelity to direct application of the gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTeleportOutcome {
    pub plus: PureState,
    pub minus: PureState,
    pub probability_plus: f64,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    /// `max_b min_φ ‖ψ_b − e^{iφ} ψ_direct‖`.
    pub mismatch: f64,
}

fn phase_distance(a: &PureState, b: &PureState) -> f64 {
    let overlap = b.inner(a);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c(1.0, 0.0)
    };
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - phase * y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Runs the protocol on qubits (control `c`, auxiliary `a`, target `t`):
/// `CNOT(c→a)` makes `α|00⟩ + β|11⟩`, the gate acts on `(a, t)`, `a` is read
/// out along x and a `−` outcome is fixed by `Z` on `c`.
pub fn gate_teleport_unchecked(
    gate: &UnitaryGate,
    psi_in: &PureState,
    psi_t: &PureState,
) -> Result<GateTeleportOutcome> {
    if gate.arity() != 2 {
        return Err(Error::Arity(gate.arity()));
    }
    if psi_in.num_qubits() != 1 || psi_t.num_qubits() != 1 {
        return Err(Error::Dimension {
            expected: 2,
            found: psi_in.amplitudes().len().max(psi_t.amplitudes().len()),
        });
    }
    let mut state = psi_in.tensor(&PureState::zero(1)).tensor(psi_t);
    state.apply(&UnitaryGate::cnot(0, 1)?)?;
    state.apply(&gate.retarget(vec![1, 2])?)?;

    let mut direct = psi_in.tensor(psi_t);
    direct.apply(&gate.retarget(vec![0, 1])?)?;

    let mut branches = Vec::with_capacity(2);
    for bit in 0..2u8 {
        let ket = BasisLabel::new(bit, PauliAxis::X).amplitudes();
        // contract the auxiliary qubit with ⟨bit_x|
        let amps = state.amplitudes();
        let reduced: Vec<_> = (0..4)
            .map(|k| {
                let (cq, tq) = (k & 1, k >> 1);
                ket[0].conj() * amps[cq | tq << 2] + ket[1].conj() * amps[cq | 2 | tq << 2]
            })
            .collect();
        let prob: f64 = reduced.iter().map(|a| a.norm_sqr()).sum();
        let scale = if prob > 1e-300 {
            1.0 / prob.sqrt()
        } else {
            0.0
        };
        let normalized: Vec<_> = reduced.iter().map(|a| a * scale).collect();
        let mut branch = if prob > 1e-300 {
            PureState::from_amplitudes(normalized)?
        } else {
            PureState::zero(2)
        };
        if bit == 1 {
            branch.apply(&UnitaryGate::z(0))?;
        }
        branches.push((branch, prob));
    }
    let (minus, _) = branches.pop().expect("two branches");
    let (plus, probability_plus) = branches.pop().expect("two branches");
    let fidelity_plus = fidelity_pure(&plus, &direct);
    let fidelity_minus = fidelity_pure(&minus, &direct);
    let mismatch = phase_distance(&plus, &direct).max(phase_distance(&minus, &direct));
    Ok(GateTeleportOutcome {
        plus,
        minus,
        probability_plus,
        fidelity_plus,
        fidelity_minus,
        mismatch,
    })
}

/// [`gate_teleport_unchecked`] behind the teleportability precondition. A
/// violating gate is still run so the error carries the observed mismatch.
pub fn gate_teleport(
    gate: &UnitaryGate,
    psi_in: &PureState,
    psi_t: &PureState,
) -> Result<GateTeleportOutcome> {
    let witness = is_teleportable(gate, None, 1e-10)?;
    let outcome = gate_teleport_unchecked(gate, psi_in, psi_t)?;
    if !witness.teleportable {
        return Err(Error::NotTeleportable {
            mismatch: outcome.mismatch,
        });
    }
    Ok(outcome)
}

/// Branch states of a density-level gate teleportation.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTeleportOutcome {
    /// Unnormalized `+` and `−` outputs on (control, target).
    pub plus: DensityOperator,
    pub minus: DensityOperator,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
}

/// Gate teleportation whose starting process consumes a shared pair on
/// (Alice's `e`, Bob's `a`): `CNOT(c→e)`, z-readout of `e`, `X` on `a` when
/// it reads 1. `pair` is either a Bell decomposition (forged run, the pair
/// is never materialized jointly) or `None` for a genuine Bell pair.
pub fn gate_teleport_with_pair(
    gate: &UnitaryGate,
    rho_in: &DensityOperator,
    rho_t: &DensityOperator,
    pair: Option<&QuasiDecomposition>,
) -> Result<DensityTeleportOutcome> {
    single_qubit(rho_in)?;
    single_qubit(rho_t)?;
    let terms: Vec<(f64, DensityOperator, DensityOperator)> = match pair {
        Some(d) => d
            .terms
            .iter()
            .map(|t| (t.coefficient, t.alice.density(), t.bob.density()))
            .collect(),
        None => {
            let bell = crate::forging::bell_density();
            let ones =
                DensityOperator::from_matrix_unchecked(CMatrix::from_element(1, 1, c(1.0, 0.0)));
            vec![(1.0, bell, ones)]
        }
    };
    // qubits: c = 0, e = 1, a = 2, t = 3
    let cnot_ce = UnitaryGate::cnot(0, 1)?;
    let x_a = UnitaryGate::x(2);
    let z_c = UnitaryGate::z(0);
    let gate_at = gate.retarget(vec![2, 3])?;
    let mut plus = CMatrix::zeros(4, 4);
    let mut minus = CMatrix::zeros(4, 4);
    for (coef, first, second) in terms {
        let pair_state = if second.dim() == 1 {
            first
        } else {
            first.tensor(&second)
        };
        let mut rho = rho_in.tensor(&pair_state).tensor(rho_t);
        rho.apply(&cnot_ce)?;
        let (mut one, _) = rho.project(ProjectorSpec::new(PauliAxis::Z, 1, 1))?;
        one.apply(&x_a)?;
        let (zero, _) = rho.project(ProjectorSpec::new(PauliAxis::Z, 0, 1))?;
        let mut rho = &zero + &one;
        rho.apply(&gate_at)?;
        for (bit, acc) in [(0u8, &mut plus), (1u8, &mut minus)] {
            let (mut branch, _) = rho.project(ProjectorSpec::new(PauliAxis::X, bit, 2))?;
            if bit == 1 {
                branch.apply(&z_c)?;
            }
            *acc += branch.partial_trace(&[0, 3])?.matrix() * c(coef, 0.0);
        }
    }
    let mut direct = rho_in.tensor(rho_t);
    direct.apply(&gate.retarget(vec![0, 1])?)?;
    let plus = DensityOperator::from_matrix_unchecked(plus);
    let minus = DensityOperator::from_matrix_unchecked(minus);
    let fidelity_plus = fidelity(&plus.normalized()?, &direct);
    let fidelity_minus = fidelity(&minus.normalized()?, &direct);
    Ok(DensityTeleportOutcome {
        plus,
        minus,
        fidelity_plus,
        fidelity_minus,
    })
}
