//! Wire messages. One JSON object per line:
//! `{"session_id", "seq_no", "type", "payload"}`.
//!
//! Payloads are closed records: labels, bits, counts, real scalars and the
//! party-local program. Nothing in the schema can hold a state vector or a
//! density matrix.

use serde::{Deserialize, Serialize};

use crate::circuit::GateDocument;
use crate::circuit::{
    label_from_char, label_to_char, CutLabel, CutRole, LocalProgram, Party, Step,
};
use crate::error::{Error, Result};
use crate::qsim::{BasisLabel, Pauli, PauliAxis};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Peer {
    Coordinator,
    Alice,
    Bob,
}

impl From<Party> for Peer {
    fn from(p: Party) -> Peer {
        match p {
            Party::Alice => Peer::Alice,
            Party::Bob => Peer::Bob,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub peer: Peer,
    pub protocol: u32,
}

/// A party-local Pauli product: one character per factor (`x y z`) and the
/// data qubit it acts on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPauli {
    pub qubits: Vec<usize>,
    pub paulis: String,
}

impl LocalPauli {
    pub fn from_factors(factors: &[(usize, Pauli)]) -> LocalPauli {
        let factors: Vec<_> = factors.iter().filter(|f| f.1 != Pauli::I).collect();
        LocalPauli {
            qubits: factors.iter().map(|f| f.0).collect(),
            paulis: factors
                .iter()
                .map(|f| f.1.as_char().to_ascii_lowercase())
                .collect(),
        }
    }

    pub fn factors(&self) -> Result<Vec<(usize, Pauli)>> {
        if self.qubits.len() != self.paulis.chars().count() {
            return Err(Error::Document(
                "pauli string and qubit list differ in length".into(),
            ));
        }
        self.qubits
            .iter()
            .zip(self.paulis.chars())
            .map(|(&q, ch)| {
                Pauli::from_char(ch.to_ascii_uppercase())
                    .map(|p| (q, p))
                    .ok_or_else(|| Error::Document(format!("unknown pauli {ch:?}")))
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.qubits.len()
    }
}

/// One step of a party-local program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum StepDocument {
    Gate { gate: GateDocument },
    Measure { cut: usize, qubit: usize },
    Prepare { cut: usize, qubit: usize },
}

/// Wire form of a [`LocalProgram`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramDescriptor {
    pub party: Party,
    pub role: CutRole,
    pub data_qubits: usize,
    pub num_qubits: usize,
    /// One character per qubit (`0 1 + - r l`).
    pub initial: String,
    pub steps: Vec<StepDocument>,
    pub output: Vec<usize>,
    pub cuts: usize,
}

impl From<&LocalProgram> for ProgramDescriptor {
    fn from(p: &LocalProgram) -> ProgramDescriptor {
        ProgramDescriptor {
            party: p.party,
            role: p.role,
            data_qubits: p.data_qubits,
            num_qubits: p.num_qubits,
            initial: p.initial.iter().map(|&l| label_to_char(l)).collect(),
            steps: p
                .steps
                .iter()
                .map(|s| match s {
                    Step::Gate(g) => StepDocument::Gate {
                        gate: GateDocument::from_gate(g, true),
                    },
                    Step::Measure { cut, qubit } => StepDocument::Measure {
                        cut: *cut,
                        qubit: *qubit,
                    },
                    Step::Prepare { cut, qubit } => StepDocument::Prepare {
                        cut: *cut,
                        qubit: *qubit,
                    },
                })
                .collect(),
            output: p.output.clone(),
            cuts: p.cuts,
        }
    }
}

impl ProgramDescriptor {
    /// Rebuilds and validates the program. Any index outside the party's
    /// register is rejected.
    pub fn to_program(&self) -> Result<LocalProgram> {
        let initial = self
            .initial
            .chars()
            .map(|ch| {
                label_from_char(ch)
                    .ok_or_else(|| Error::Document(format!("unknown initial label {ch:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = self
            .steps
            .iter()
            .map(|s| {
                Ok(match s {
                    StepDocument::Gate { gate } => {
                        for &t in &gate.targets {
                            if t >= self.num_qubits {
                                return Err(Error::CrossesPartition {
                                    party: self.party.letter(),
                                    index: t,
                                    size: self.num_qubits,
                                });
                            }
                        }
                        Step::Gate(gate.to_gate(gate.targets.clone())?)
                    }
                    StepDocument::Measure { cut, qubit } => Step::Measure {
                        cut: *cut,
                        qubit: *qubit,
                    },
                    StepDocument::Prepare { cut, qubit } => Step::Prepare {
                        cut: *cut,
                        qubit: *qubit,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let program = LocalProgram {
            party: self.party,
            role: self.role,
            data_qubits: self.data_qubits,
            num_qubits: self.num_qubits,
            initial,
            steps,
            output: self.output.clone(),
            cuts: self.cuts,
        };
        program.validate()?;
        Ok(program)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadProgram {
    pub program: ProgramDescriptor,
    /// Local Pauli products whose expectations or outcomes are requested.
    pub observables: Vec<LocalPauli>,
    pub seed: u64,
}

/// Basis label as two characters, outcome bit then axis: `0z`, `1y`.
pub fn encode_label(label: BasisLabel) -> String {
    label.to_string()
}

pub fn decode_label(text: &str) -> Result<BasisLabel> {
    let mut chars = text.chars();
    let bit = match chars.next() {
        Some('0') => 0,
        Some('1') => 1,
        _ => return Err(Error::Document(format!("bad basis label {text:?}"))),
    };
    let axis = match chars.next() {
        Some('x') => PauliAxis::X,
        Some('y') => PauliAxis::Y,
        Some('z') => PauliAxis::Z,
        _ => return Err(Error::Document(format!("bad basis label {text:?}"))),
    };
    if chars.next().is_some() {
        return Err(Error::Document(format!("bad basis label {text:?}")));
    }
    Ok(BasisLabel::new(bit, axis))
}

/// Branch label: per cut `measured>prepared`, comma-separated, cut 0 first.
pub fn encode_branch(labels: &[CutLabel]) -> String {
    labels
        .iter()
        .map(|l| format!("{}>{}", l.measured, l.prepared))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn decode_branch(text: &str) -> Result<Vec<CutLabel>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|part| {
            let (m, p) = part
                .split_once('>')
                .ok_or_else(|| Error::Document(format!("bad branch label {part:?}")))?;
            Ok(CutLabel {
                measured: decode_label(m)?,
                prepared: decode_label(p)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareLabel {
    pub shot: u64,
    pub cut: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Execute {
    /// Evaluate branches; every branch when `branches` is absent.
    Exact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        branches: Option<Vec<String>>,
    },
    /// Run to the measure-slot of `cut` and measure along `axis`.
    Measure {
        shot: u64,
        cut: usize,
        axis: PauliAxis,
    },
    /// Finish the shot and measure loaded observable `observable`.
    Payload { shot: u64, observable: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measured {
    pub shot: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<PauliAxis>,
    pub bits: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchResult {
    pub label: String,
    pub trace_weight: f64,
    /// `Tr(P ρ)` of the unnormalized branch state for every loaded observable.
    pub expectations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Done {
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReport {
    pub code: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "payload",
    rename_all = "SCREAMING_SNAKE_CASE",
    deny_unknown_fields
)]
pub enum Message {
    Hello(Hello),
    LoadProgram(LoadProgram),
    Prepare(PrepareLabel),
    Execute(Execute),
    Measured(Measured),
    BranchResult(BranchResult),
    Done(Done),
    Error(ErrorReport),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello(_) => "HELLO",
            Message::LoadProgram(_) => "LOAD_PROGRAM",
            Message::Prepare(_) => "PREPARE",
            Message::Execute(_) => "EXECUTE",
            Message::Measured(_) => "MEASURED",
            Message::BranchResult(_) => "BRANCH_RESULT",
            Message::Done(_) => "DONE",
            Message::Error(_) => "ERROR",
        }
    }

    pub fn error(code: &str, detail: impl Into<String>) -> Message {
        Message::Error(ErrorReport {
            code: code.into(),
            detail: detail.into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub session_id: String,
    pub seq_no: u64,
    pub message: Message,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    session_id: &'a str,
    seq_no: u64,
    #[serde(flatten)]
    message: &'a Message,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeIn {
    session_id: String,
    seq_no: u64,
    #[serde(rename = "type")]
    kind: String,
    payload: serde_json::Value,
}

impl Envelope {
    /// Single-line JSON encoding (no trailing newline).
    pub fn encode(&self) -> String {
        serde_json::to_string(&EnvelopeOut {
            session_id: &self.session_id,
            seq_no: self.seq_no,
            message: &self.message,
        })
        .expect("messages always serialize")
    }

    pub fn decode(line: &str) -> Result<Envelope> {
        let raw: EnvelopeIn = serde_json::from_str(line)
            .map_err(|e| Error::Protocol(format!("bad envelope: {e}")))?;
        let message: Message =
            serde_json::from_value(serde_json::json!({ "type": raw.kind, "payload": raw.payload }))
                .map_err(|e| Error::Protocol(format!("bad {} payload: {e}", raw.kind)))?;
        Ok(Envelope {
            session_id: raw.session_id,
            seq_no: raw.seq_no,
            message,
        })
    }
}

/// Session identifier derived from the master seed.
pub fn session_id(seed: u64) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(format!("forgecut-session:{seed}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
