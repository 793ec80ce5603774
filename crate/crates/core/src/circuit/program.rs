use serde::{Deserialize, Serialize};

use super::{Layer, PartitionedCircuit, Party};
use crate::error::{Error, Result};
use crate::qsim::{BasisLabel, PauliAxis, UnitaryGate};

/// How the owner's prepared wire is allocated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxPolicy {
    /// A new ancilla per cut on both sides: `2L` ancillas in total.
    Fresh,
    /// The owner re-prepares the measured wire in place; only the host's
    /// `L` ancillas remain.
    ReuseAfterReset,
}

/// How later owner gates are redirected onto a prepared ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substitution {
    /// Rewrite gate targets.
    Relabel,
    /// Conjugate each affected gate by `SWAP(wire, ancilla)`.
    SwapConjugate,
}

/// Role of a party with respect to every cut of a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutRole {
    /// Owns the cut wire: measures it before the gate, prepares its
    /// replacement after the gate.
    Owner,
    /// Hosts the nonlocal gate on an ancilla: prepares before, measures after.
    Host,
}

/// Location of the two cuts around one nonlocal gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPoint {
    /// Index of the nonlocal gate, in circuit order.
    pub gate: usize,
    /// Owner-local qubit whose wire is cut before and after the gate.
    pub wire: usize,
    /// Host-local qubit the gate acts on.
    pub partner: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPlan {
    pub owner: Party,
    pub aux: AuxPolicy,
    pub substitution: Substitution,
    pub cuts: Vec<CutPoint>,
}

impl CutPlan {
    /// Cuts every nonlocal gate on the `owner` side.
    pub fn for_circuit(
        circuit: &PartitionedCircuit,
        owner: Party,
        aux: AuxPolicy,
        substitution: Substitution,
    ) -> CutPlan {
        let cuts = circuit
            .nonlocal_gates()
            .enumerate()
            .map(|(gate, nl)| {
                let (wire, partner) = match owner {
                    Party::Alice => (nl.alice_target, nl.bob_target),
                    Party::Bob => (nl.bob_target, nl.alice_target),
                };
                CutPoint {
                    gate,
                    wire,
                    partner,
                }
            })
            .collect();
        CutPlan {
            owner,
            aux,
            substitution,
            cuts,
        }
    }

    /// Alice-side cuts with fresh ancillas and relabeled targets.
    pub fn alice_side(circuit: &PartitionedCircuit) -> CutPlan {
        CutPlan::for_circuit(
            circuit,
            Party::Alice,
            AuxPolicy::Fresh,
            Substitution::Relabel,
        )
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts.len()
    }

    /// Ancillas allocated across both parties.
    pub fn auxiliary_qubits(&self) -> usize {
        let l = self.cuts.len();
        match self.aux {
            AuxPolicy::Fresh => 2 * l,
            AuxPolicy::ReuseAfterReset => l,
        }
    }

    pub fn role_of(&self, party: Party) -> CutRole {
        if party == self.owner {
            CutRole::Owner
        } else {
            CutRole::Host
        }
    }
}

/// Labels of one cut as seen by one party: the basis it measured in and the
/// outcome, and the basis state it prepared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CutLabel {
    pub measured: BasisLabel,
    pub prepared: BasisLabel,
}

impl CutLabel {
    pub fn index(self) -> usize {
        self.measured.index() * 6 + self.prepared.index()
    }

    pub fn from_index(index: usize) -> CutLabel {
        CutLabel {
            measured: BasisLabel::from_index(index / 6),
            prepared: BasisLabel::from_index(index % 6),
        }
    }

    /// Mixed-radix index of a label tuple (cut 0 least significant).
    pub fn tuple_index(labels: &[CutLabel]) -> usize {
        labels.iter().rev().fold(0, |acc, l| acc * 36 + l.index())
    }

    pub fn tuple_from_index(mut index: usize, cuts: usize) -> Vec<CutLabel> {
        (0..cuts)
            .map(|_| {
                let l = CutLabel::from_index(index % 36);
                index /= 36;
                l
            })
            .collect()
    }

    /// Every label tuple for `cuts` cuts, `36^cuts` of them.
    pub fn all_tuples(cuts: usize) -> impl Iterator<Item = Vec<CutLabel>> {
        (0..36usize.pow(cuts as u32)).map(move |k| CutLabel::tuple_from_index(k, cuts))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Gate(UnitaryGate),
    /// Measure-slot: project `qubit` on the cut's measured label.
    Measure {
        cut: usize,
        qubit: usize,
    },
    /// Prepare-slot: replace `qubit` by the cut's prepared label.
    Prepare {
        cut: usize,
        qubit: usize,
    },
}

/// A party-local program with placeholder slots for the cut labels.
///
/// Gate targets are physical indices into the party's register of
/// `num_qubits` qubits (data qubits first, then ancillas).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalProgram {
    pub party: Party,
    pub role: CutRole,
    pub data_qubits: usize,
    pub num_qubits: usize,
    pub initial: Vec<BasisLabel>,
    pub steps: Vec<Step>,
    /// Physical qubit holding logical data qubit `j` at the end.
    pub output: Vec<usize>,
    pub cuts: usize,
}

impl LocalProgram {
    /// `(cut, physical qubit)` of every prepare-slot.
    pub fn aux_slots(&self) -> Vec<(usize, usize)> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Prepare { cut, qubit } => Some((*cut, *qubit)),
                _ => None,
            })
            .collect()
    }

    /// Checks every step stays inside the register and each cut has exactly
    /// one measure-slot and one prepare-slot.
    pub fn validate(&self) -> Result<()> {
        let in_range = |q: usize| -> Result<()> {
            if q >= self.num_qubits {
                Err(Error::CrossesPartition {
                    party: self.party.letter(),
                    index: q,
                    size: self.num_qubits,
                })
            } else {
                Ok(())
            }
        };
        let mut measures = vec![0usize; self.cuts];
        let mut prepares = vec![0usize; self.cuts];
        for step in &self.steps {
            match step {
                Step::Gate(g) => {
                    for &t in &g.targets {
                        in_range(t)?;
                    }
                }
                Step::Measure { cut, qubit } | Step::Prepare { cut, qubit } => {
                    in_range(*qubit)?;
                    let counter = if matches!(step, Step::Measure { .. }) {
                        &mut measures
                    } else {
                        &mut prepares
                    };
                    *counter.get_mut(*cut).ok_or_else(|| {
                        Error::PlanMismatch(format!("cut {cut} beyond declared {}", self.cuts))
                    })? += 1;
                }
            }
        }
        if measures.iter().chain(&prepares).any(|&n| n != 1) {
            return Err(Error::PlanMismatch(
                "each cut needs one measure-slot and one prepare-slot".into(),
            ));
        }
        for &q in &self.output {
            in_range(q)?;
        }
        if self.initial.len() != self.num_qubits || self.output.len() != self.data_qubits {
            return Err(Error::PlanMismatch(
                "register descriptors inconsistent".into(),
            ));
        }
        Ok(())
    }
}

/// Splits a circuit into the owner and host programs of `plan`, returned as
/// `(alice, bob)`.
pub fn split_local(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
) -> Result<(LocalProgram, LocalProgram)> {
    let expected = CutPlan::for_circuit(circuit, plan.owner, plan.aux, plan.substitution);
    if expected.cuts != plan.cuts {
        return Err(Error::PlanMismatch(format!(
            "plan has {} cut(s), circuit has {} nonlocal gate(s) or wires differ",
            plan.cuts.len(),
            expected.cuts.len()
        )));
    }
    let owner = plan.owner;
    let host = owner.other();
    let l = plan.num_cuts();
    let zero = BasisLabel::new(0, PauliAxis::Z);

    let owner_data = circuit.party_size(owner);
    let owner_total = owner_data + if plan.aux == AuxPolicy::Fresh { l } else { 0 };
    let host_data = circuit.party_size(host);
    let host_total = host_data + l;

    let mut owner_init = circuit.initial.party(owner).to_vec();
    owner_init.resize(owner_total, zero);
    let mut host_init = circuit.initial.party(host).to_vec();
    host_init.resize(host_total, zero);

    let mut owner_steps = Vec::new();
    let mut host_steps = Vec::new();
    let mut wire_map: Vec<usize> = (0..owner_data).collect();
    let mut cut = 0;

    for layer in &circuit.layers {
        match layer {
            Layer::Local(local) if local.party == owner => {
                for gate in &local.gates {
                    emit_owner_gate(&mut owner_steps, gate, &wire_map, plan.substitution)?;
                }
            }
            Layer::Local(local) => {
                host_steps.extend(local.gates.iter().cloned().map(Step::Gate));
            }
            Layer::Nonlocal(nl) => {
                let point = plan.cuts[cut];
                let physical = wire_map[point.wire];
                owner_steps.push(Step::Measure {
                    cut,
                    qubit: physical,
                });
                let prepared = match plan.aux {
                    AuxPolicy::Fresh => owner_data + cut,
                    AuxPolicy::ReuseAfterReset => physical,
                };
                owner_steps.push(Step::Prepare {
                    cut,
                    qubit: prepared,
                });
                wire_map[point.wire] = prepared;

                let ancilla = host_data + cut;
                host_steps.push(Step::Prepare {
                    cut,
                    qubit: ancilla,
                });
                let targets = match owner {
                    Party::Alice => vec![ancilla, point.partner],
                    Party::Bob => vec![point.partner, ancilla],
                };
                host_steps.push(Step::Gate(nl.gate.retarget(targets)?));
                host_steps.push(Step::Measure {
                    cut,
                    qubit: ancilla,
                });
                cut += 1;
            }
        }
    }

    let owner_prog = LocalProgram {
        party: owner,
        role: CutRole::Owner,
        data_qubits: owner_data,
        num_qubits: owner_total,
        initial: owner_init,
        steps: owner_steps,
        output: wire_map,
        cuts: l,
    };
    let host_prog = LocalProgram {
        party: host,
        role: CutRole::Host,
        data_qubits: host_data,
        num_qubits: host_total,
        initial: host_init,
        steps: host_steps,
        output: (0..host_data).collect(),
        cuts: l,
    };
    Ok(match owner {
        Party::Alice => (owner_prog, host_prog),
        Party::Bob => (host_prog, owner_prog),
    })
}

fn emit_owner_gate(
    steps: &mut Vec<Step>,
    gate: &UnitaryGate,
    wire_map: &[usize],
    mode: Substitution,
) -> Result<()> {
    match mode {
        Substitution::Relabel => {
            let targets = gate.targets.iter().map(|&t| wire_map[t]).collect();
            steps.push(Step::Gate(gate.retarget(targets)?));
        }
        Substitution::SwapConjugate => {
            let swaps = gate
                .targets
                .iter()
                .filter(|&&t| wire_map[t] != t)
                .map(|&t| UnitaryGate::swap(t, wire_map[t]))
                .collect::<Result<Vec<_>>>()?;
            steps.extend(swaps.iter().cloned().map(Step::Gate));
            steps.push(Step::Gate(gate.clone()));
            steps.extend(swaps.into_iter().rev().map(Step::Gate));
        }
    }
    Ok(())
}
