use serde::{Deserialize, Serialize};

use super::{
    label_from_char, label_to_char, InitialState, Layer, LocalLayer, NonlocalGate,
    PartitionedCircuit, Party,
};
use crate::error::{Error, Result};
use crate::qsim::{c, CMatrix, UnitaryGate};

/// Wire form of a circuit file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDocument {
    pub alice_qubits: usize,
    pub bob_qubits: usize,
    pub layers: Vec<LayerDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialDocument>,
}

/// Initial product state as one character per qubit (`0 1 + - r l`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDocument {
    pub alice: String,
    pub bob: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerDocument {
    Local {
        party: Party,
        gates: Vec<GateDocument>,
    },
    Nonlocal {
        gate: GateDocument,
        alice_target: usize,
        bob_target: usize,
    },
}

/// A gate by name; `matrix` holds rows of `[re, im]` pairs when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

impl GateDocument {
    pub fn to_gate(&self, targets: Vec<usize>) -> Result<UnitaryGate> {
        let matrix = self
            .matrix
            .as_ref()
            .map(|rows| decode_matrix(rows))
            .transpose()?;
        UnitaryGate::named(&self.name, &self.params, matrix, targets)
    }

    pub fn from_gate(gate: &UnitaryGate, with_targets: bool) -> GateDocument {
        let matrix = match gate.name.as_str() {
            "controlled-u" => gate.controlled_block().map(|m| encode_matrix(&m)),
            "unitary" | "u" => Some(encode_matrix(&gate.matrix)),
            _ => None,
        };
        GateDocument {
            name: gate.name.clone(),
            targets: if with_targets {
                gate.targets.clone()
            } else {
                Vec::new()
            },
            params: gate.params.clone(),
            matrix,
        }
    }
}

pub(crate) fn decode_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Document("gate matrix must be square".into()));
    }
    if n > 4 {
        return Err(Error::Arity(n.trailing_zeros() as usize));
    }
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::Document(format!(
            "gate matrix dimension {n} is not 2 or 4"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |r, k| {
        c(rows[r][k][0], rows[r][k][1])
    }))
}

pub(crate) fn encode_matrix(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|k| [m[(r, k)].re, m[(r, k)].im])
                .collect()
        })
        .collect()
}

fn parse_labels(party: char, text: &str, expected: usize) -> Result<Vec<super::BasisLabel>> {
    let labels: Option<Vec<_>> = text.chars().map(label_from_char).collect();
    let labels = labels.ok_or_else(|| {
        Error::Document(format!(
            "bad initial-state code for party {party}: `{text}`"
        ))
    })?;
    if labels.len() != expected {
        return Err(Error::Document(format!(
            "initial state for party {party} has {} qubits, register has {expected}",
            labels.len()
        )));
    }
    Ok(labels)
}

impl CircuitDocument {
    pub fn into_circuit(self) -> Result<PartitionedCircuit> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in self.layers {
            match layer {
                LayerDocument::Local { party, gates } => {
                    let gates = gates
                        .iter()
                        .map(|g| {
                            if g.targets.len() > 2 {
                                return Err(Error::Arity(g.targets.len()));
                            }
                            g.to_gate(g.targets.clone())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    layers.push(Layer::Local(LocalLayer { party, gates }));
                }
                LayerDocument::Nonlocal {
                    gate,
                    alice_target,
                    bob_target,
                } => {
                    let gate = gate.to_gate(vec![0, 1])?;
                    layers.push(Layer::Nonlocal(NonlocalGate {
                        gate,
                        alice_target,
                        bob_target,
                    }));
                }
            }
        }
        let initial = match self.initial_state {
            None => InitialState::zeros(self.alice_qubits, self.bob_qubits),
            Some(doc) => InitialState {
                alice: parse_labels('A', &doc.alice, self.alice_qubits)?,
                bob: parse_labels('B', &doc.bob, self.bob_qubits)?,
            },
        };
        PartitionedCircuit::new(self.alice_qubits, self.bob_qubits, layers, initial)
    }
}

impl From<&PartitionedCircuit> for CircuitDocument {
    fn from(circuit: &PartitionedCircuit) -> Self {
        let layers = circuit
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Local(local) => LayerDocument::Local {
                    party: local.party,
                    gates: local
                        .gates
                        .iter()
                        .map(|g| GateDocument::from_gate(g, true))
                        .collect(),
                },
                Layer::Nonlocal(nl) => LayerDocument::Nonlocal {
                    gate: GateDocument::from_gate(&nl.gate, false),
                    alice_target: nl.alice_target,
                    bob_target: nl.bob_target,
                },
            })
            .collect();
        let zeros = InitialState::zeros(circuit.alice_qubits, circuit.bob_qubits);
        let initial_state = (circuit.initial != zeros).then(|| InitialDocument {
            alice: circuit
                .initial
                .alice
                .iter()
                .map(|l| label_to_char(*l))
                .collect(),
            bob: circuit
                .initial
                .bob
                .iter()
                .map(|l| label_to_char(*l))
                .collect(),
        });
        CircuitDocument {
            alice_qubits: circuit.alice_qubits,
            bob_qubits: circuit.bob_qubits,
            layers,
            initial_state,
        }
    }
}

/// Parses and validates a circuit document.
pub fn parse_circuit(text: &str) -> Result<PartitionedCircuit> {
    let doc: CircuitDocument =
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    doc.into_circuit()
}

impl PartitionedCircuit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CircuitDocument::from(self)).expect("serializable document")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::generate::random_circuit;
    use crate::qsim::max_abs_diff;

    #[test]
    fn accepts_two_qubit_local_gate() {
        let doc = r#"{"alice_qubits":2,"bob_qubits":1,"layers":[
            {"type":"local","party":"A","gates":[{"name":"cnot","targets":[0,1]}]},
            {"type":"nonlocal","gate":{"name":"cz"},"alice_target":1,"bob_target":0}]}"#;
        let circuit = parse_circuit(doc).unwrap();
        assert_eq!(circuit.layers.len(), 2);
    }

    #[test]
    fn rejects_three_qubit_gate() {
        let doc = r#"{"alice_qubits":3,"bob_qubits":1,"layers":[
            {"type":"local","party":"A","gates":[{"name":"cnot","targets":[0,1,2]}]}]}"#;
        assert!(matches!(parse_circuit(doc), Err(Error::Arity(3))));
    }

    #[test]
    fn rejects_gate_crossing_partition() {
        let doc = r#"{"alice_qubits":1,"bob_qubits":1,"layers":[
            {"type":"local","party":"A","gates":[{"name":"cnot","targets":[0,1]}]}]}"#;
        assert!(matches!(
            parse_circuit(doc),
            Err(Error::CrossesPartition { .. })
        ));
    }

    #[test]
    fn rejects_non_unitary_and_malformed() {
        let doc = r#"{"alice_qubits":1,"bob_qubits":1,"layers":[
            {"type":"local","party":"A","gates":[{"name":"u","targets":[0],"matrix":[[[1,0],[1,0]],[[0,0],[1,0]]]}]}]}"#;
        assert!(matches!(parse_circuit(doc), Err(Error::NotUnitary { .. })));
        assert!(matches!(
            parse_circuit("{\"alice_qubits\":1"),
            Err(Error::Document(_))
        ));
        let doc = r#"{"alice_qubits":1,"bob_qubits":1,"layers":[{"type":"teleport"}]}"#;
        assert!(matches!(parse_circuit(doc), Err(Error::Document(_))));
    }

    #[test]
    fn serialize_parse_roundtrip() {
        for seed in 0..8 {
            let circuit = random_circuit(2, 2, 2, seed).unwrap();
            let back = parse_circuit(&circuit.to_json()).unwrap();
            assert_eq!(back.layers.len(), circuit.layers.len());
            for (a, b) in back.flatten_full().iter().zip(circuit.flatten_full()) {
                assert_eq!(a.targets, b.targets);
                assert!(max_abs_diff(&a.matrix, &b.matrix) <= 1e-15);
            }
            assert_eq!(back.initial, circuit.initial);
        }
    }
}
