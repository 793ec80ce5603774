//! Two-party circuits `(V2A ⊗ V2B) ∘ V ∘ (V1A ⊗ V1B)` and their multi-gate
//! generalization, plus the split into party-local programs.
//!
//! Global qubit numbering puts Alice's qubits first: Alice qubit `q` is global
//! `q`, Bob qubit `q` is global `alice_qubits + q`.

mod document;
pub mod generate;
mod observable;
mod program;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qsim::{BasisLabel, DensityOperator, PauliAxis, PureState, UnitaryGate};

pub use document::{parse_circuit, CircuitDocument, GateDocument, LayerDocument};
pub use observable::{Observable, PauliString};
pub use program::{
    split_local, AuxPolicy, CutLabel, CutPlan, CutPoint, CutRole, LocalProgram, Step, Substitution,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Party::Alice => 'A',
            Party::Bob => 'B',
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        })
    }
}

/// Gates on one party's register, targets in party-local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalLayer {
    pub party: Party,
    pub gates: Vec<UnitaryGate>,
}

/// A two-qubit gate across the partition. The first tensor factor of
/// `gate` acts on Alice's `alice_target`, the second on Bob's `bob_target`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlocalGate {
    pub gate: UnitaryGate,
    pub alice_target: usize,
    pub bob_target: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Local(LocalLayer),
    Nonlocal(NonlocalGate),
}

/// Product initial state, one basis label per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub alice: Vec<BasisLabel>,
    pub bob: Vec<BasisLabel>,
}

impl InitialState {
    pub fn zeros(alice_qubits: usize, bob_qubits: usize) -> InitialState {
        let zero = BasisLabel::new(0, PauliAxis::Z);
        InitialState {
            alice: vec![zero; alice_qubits],
            bob: vec![zero; bob_qubits],
        }
    }

    pub fn party(&self, party: Party) -> &[BasisLabel] {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }
}

/// Single-character codes for initial basis states.
pub fn label_from_char(ch: char) -> Option<BasisLabel> {
    let (bit, axis) = match ch {
        '0' => (0, PauliAxis::Z),
        '1' => (1, PauliAxis::Z),
        '+' => (0, PauliAxis::X),
        '-' => (1, PauliAxis::X),
        'r' => (0, PauliAxis::Y),
        'l' => (1, PauliAxis::Y),
        _ => return None,
    };
    Some(BasisLabel::new(bit, axis))
}

pub fn label_to_char(label: BasisLabel) -> char {
    match (label.axis, label.bit) {
        (PauliAxis::Z, 0) => '0',
        (PauliAxis::Z, _) => '1',
        (PauliAxis::X, 0) => '+',
        (PauliAxis::X, _) => '-',
        (PauliAxis::Y, 0) => 'r',
        (PauliAxis::Y, _) => 'l',
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedCircuit {
    pub alice_qubits: usize,
    pub bob_qubits: usize,
    pub layers: Vec<Layer>,
    pub initial: InitialState,
}

impl PartitionedCircuit {
    /// Validates party ranges and returns the circuit.
    pub fn new(
        alice_qubits: usize,
        bob_qubits: usize,
        layers: Vec<Layer>,
        initial: InitialState,
    ) -> Result<Self> {
        if alice_qubits == 0 || bob_qubits == 0 {
            return Err(Error::Document(
                "each party needs at least one qubit".into(),
            ));
        }
        if initial.alice.len() != alice_qubits || initial.bob.len() != bob_qubits {
            return Err(Error::Document(
                "initial state length does not match register sizes".into(),
            ));
        }
        let circuit = PartitionedCircuit {
            alice_qubits,
            bob_qubits,
            layers,
            initial,
        };
        for layer in &circuit.layers {
            match layer {
                Layer::Local(local) => {
                    let size = circuit.party_size(local.party);
                    for gate in &local.gates {
                        for &t in &gate.targets {
                            if t >= size {
                                return Err(Error::CrossesPartition {
                                    party: local.party.letter(),
                                    index: t,
                                    size,
                                });
                            }
                        }
                    }
                }
                Layer::Nonlocal(nl) => {
                    if nl.gate.arity() != 2 {
                        return Err(Error::Arity(nl.gate.arity()));
                    }
                    if nl.alice_target >= alice_qubits {
                        return Err(Error::CrossesPartition {
                            party: 'A',
                            index: nl.alice_target,
                            size: alice_qubits,
                        });
                    }
                    if nl.bob_target >= bob_qubits {
                        return Err(Error::CrossesPartition {
                            party: 'B',
                            index: nl.bob_target,
                            size: bob_qubits,
                        });
                    }
                }
            }
        }
        Ok(circuit)
    }

    pub fn party_size(&self, party: Party) -> usize {
        match party {
            Party::Alice => self.alice_qubits,
            Party::Bob => self.bob_qubits,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.alice_qubits + self.bob_qubits
    }

    pub fn global_index(&self, party: Party, qubit: usize) -> usize {
        match party {
            Party::Alice => qubit,
            Party::Bob => self.alice_qubits + qubit,
        }
    }

    pub fn nonlocal_gates(&self) -> impl Iterator<Item = &NonlocalGate> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Nonlocal(nl) => Some(nl),
            Layer::Local(_) => None,
        })
    }

    pub fn nonlocal_count(&self) -> usize {
        self.nonlocal_gates().count()
    }

    /// Gate sequence on the joint register whose composition is the whole
    /// circuit; used as the uncut oracle.
    pub fn flatten_full(&self) -> Vec<UnitaryGate> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Local(local) => {
                    for gate in &local.gates {
                        let targets = gate
                            .targets
                            .iter()
                            .map(|&t| self.global_index(local.party, t))
                            .collect();
                        out.push(gate.retarget(targets).expect("validated targets"));
                    }
                }
                Layer::Nonlocal(nl) => {
                    let targets = vec![
                        self.global_index(Party::Alice, nl.alice_target),
                        self.global_index(Party::Bob, nl.bob_target),
                    ];
                    out.push(nl.gate.retarget(targets).expect("validated targets"));
                }
            }
        }
        out
    }

    pub fn initial_pure_state(&self) -> PureState {
        let labels: Vec<BasisLabel> = self
            .initial
            .alice
            .iter()
            .chain(&self.initial.bob)
            .copied()
            .collect();
        PureState::product(&labels)
    }

    /// Output state of the uncut circuit.
    pub fn simulate_full(&self) -> PureState {
        let mut state = self.initial_pure_state();
        for gate in self.flatten_full() {
            state.apply(&gate).expect("validated targets");
        }
        state
    }

    pub fn simulate_full_density(&self) -> DensityOperator {
        self.simulate_full().to_density()
    }

    /// SHA-256 of the canonical document encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        let text =
            serde_json::to_string(&CircuitDocument::from(self)).expect("serializable document");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{max_abs_diff, random::haar_unitary, CMatrix};
    use rand::SeedableRng;

    pub(crate) const BELL: &str = include_str!("../../../../circuits/bell.json");

    #[test]
    fn bell_flattens_to_single_cnot() {
        let circuit = parse_circuit(BELL).unwrap();
        assert_eq!(circuit.nonlocal_count(), 1);
        let flat = circuit.flatten_full();
        assert_eq!(flat.len(), 1);
        assert_eq!(flat[0].name, "cnot");
        assert_eq!(flat[0].targets, vec![0, 1]);
    }

    #[test]
    fn flatten_then_simulate_gives_bell() {
        let circuit = parse_circuit(BELL).unwrap();
        let out = circuit.simulate_full();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = out.amplitudes();
        assert!((amps[0].re - h).abs() < 1e-15 && (amps[3].re - h).abs() < 1e-15);
        assert!(amps[1].norm() < 1e-15 && amps[2].norm() < 1e-15);
    }

    /// Composes the circuit as explicit full-register matrices.
    fn compose_matrices(circuit: &PartitionedCircuit) -> CMatrix {
        let n = circuit.num_qubits();
        let dim = 1usize << n;
        let mut total = CMatrix::identity(dim, dim);
        for gate in circuit.flatten_full() {
            let mut full = CMatrix::zeros(dim, dim);
            for col in 0..dim {
                let mut basis = vec![crate::qsim::c(0.0, 0.0); dim];
                basis[col] = crate::qsim::c(1.0, 0.0);
                let mut s = PureState::from_amplitudes(basis).unwrap();
                s.apply(&gate).unwrap();
                for (r, a) in s.amplitudes().iter().enumerate() {
                    full[(r, col)] = *a;
                }
            }
            total = full * total;
        }
        total
    }

    #[test]
    fn flatten_respects_layer_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            let circuit = generate::random_circuit(2, 2, 2, seed).unwrap();
            let u = compose_matrices(&circuit);
            let state = circuit.simulate_full();
            let init = circuit.initial_pure_state();
            let want: Vec<_> = (0..u.nrows())
                .map(|r| {
                    (0..u.ncols())
                        .map(|k| u[(r, k)] * init.amplitudes()[k])
                        .sum::<num_complex::Complex64>()
                })
                .collect();
            for (a, b) in state.amplitudes().iter().zip(&want) {
                assert!((a - b).norm() < 1e-10);
            }
        }
        // non-commuting order check: swapping two layers changes the result
        let u = haar_unitary(4, &mut rng);
        let nl = NonlocalGate {
            gate: UnitaryGate::named("unitary", &[], Some(u), vec![0, 1]).unwrap(),
            alice_target: 0,
            bob_target: 0,
        };
        let h = LocalLayer {
            party: Party::Alice,
            gates: vec![UnitaryGate::h(0)],
        };
        let a = PartitionedCircuit::new(
            1,
            1,
            vec![Layer::Local(h.clone()), Layer::Nonlocal(nl.clone())],
            InitialState::zeros(1, 1),
        )
        .unwrap();
        let b = PartitionedCircuit::new(
            1,
            1,
            vec![Layer::Nonlocal(nl), Layer::Local(h)],
            InitialState::zeros(1, 1),
        )
        .unwrap();
        assert!(max_abs_diff(&compose_matrices(&a), &compose_matrices(&b)) > 1e-3);
    }

    #[test]
    fn local_gate_outside_register_rejected() {
        let layer = LocalLayer {
            party: Party::Bob,
            gates: vec![UnitaryGate::h(1)],
        };
        let err =
            PartitionedCircuit::new(1, 1, vec![Layer::Local(layer)], InitialState::zeros(1, 1))
                .unwrap_err();
        assert!(matches!(err, Error::CrossesPartition { party: 'B', .. }));
    }
}
