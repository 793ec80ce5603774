//! Session transcripts: the header needed to rerun a session, every line in
//! both directions, and the final result. Stored as JSON lines.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::message::{decode_branch, decode_label, Envelope, Execute, Message};
use crate::circuit::{CircuitDocument, CutPlan, Party};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Coordinator to worker.
    Send,
    /// Worker to coordinator.
    Recv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub peer: Party,
    pub elapsed_us: u64,
    pub bytes: usize,
    pub line: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    /// Branch expectations of an observable.
    Exact,
    /// Branch expectations of every Pauli string, for the output state.
    State,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptHeader {
    pub mode: SessionMode,
    pub session_id: String,
    pub circuit: CircuitDocument,
    pub plan: CutPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Final values: `[value]` (exact), `[mean, stderr]` (sampled) or the
/// Pauli coefficients of the output state (state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptResult {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Header(TranscriptHeader),
    Entry(TranscriptEntry),
    Result(TranscriptResult),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub entries: Vec<TranscriptEntry>,
    pub result: Option<TranscriptResult>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        };
        push(&Record::Header(self.header.clone()));
        for e in &self.entries {
            push(&Record::Entry(e.clone()));
        }
        if let Some(r) = &self.result {
            push(&Record::Result(r.clone()));
        }
        out
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Transcript> {
        let mut header = None;
        let mut entries = Vec::new();
        let mut result = None;
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line)? {
                Record::Header(h) if header.is_none() => header = Some(h),
                Record::Header(_) => {
                    return Err(Error::Document("second transcript header".into()))
                }
                Record::Entry(e) => entries.push(e),
                Record::Result(r) => result = Some(r),
            }
        }
        Ok(Transcript {
            header: header.ok_or_else(|| Error::Document("transcript has no header".into()))?,
            entries,
            result,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Transcript> {
        Transcript::from_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Lines of one peer in one direction, in order.
    pub fn lines(&self, peer: Party, direction: Direction) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.peer == peer && e.direction == direction)
            .map(|e| e.line.clone())
            .collect()
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn contains_error(&self) -> bool {
        self.entries
            .iter()
            .any(|e| e.line.contains("\"type\":\"ERROR\""))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub messages: usize,
    pub by_type: Vec<(String, usize)>,
    /// `9^L · ‖O‖_∞` used for every real scalar.
    pub bound: f64,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Default)]
struct PeerState {
    widths: Vec<usize>,
    next_seq: [u64; 2],
}

/// Checks every line against the closed schema and the classical-content
/// limits: labels decode, bit arrays are no wider than the measured register,
/// bits are 0/1, and every real scalar is finite and within `9^L · ‖O‖_∞`.
pub fn audit(transcript: &Transcript) -> AuditReport {
    let norm = match &transcript.header.observable {
        Some(spec) => crate::circuit::Observable::parse(spec)
            .map(|o| o.norm_bound())
            .unwrap_or(1.0),
        None => 1.0,
    };
    let cuts = transcript.header.plan.cuts.len();
    let bound = 9f64.powi(cuts as i32) * norm.max(1.0);
    let mut report = AuditReport {
        bound,
        ..AuditReport::default()
    };
    let mut counts: HashMap<&'static str, usize> = HashMap::new();
    let mut peers: HashMap<Party, PeerState> = HashMap::new();
    for (n, entry) in transcript.entries.iter().enumerate() {
        report.messages += 1;
        let mut violation = |msg: String| {
            report
                .violations
                .push(format!("entry {n} ({}): {msg}", entry.peer))
        };
        let env = match Envelope::decode(&entry.line) {
            Ok(env) => env,
            Err(e) => {
                violation(format!("not a schema message: {e}"));
                continue;
            }
        };
        if env.session_id != transcript.header.session_id {
            violation(format!("foreign session id {}", env.session_id));
        }
        let state = peers.entry(entry.peer).or_default();
        let slot = match entry.direction {
            Direction::Send => 0,
            Direction::Recv => 1,
        };
        if env.seq_no != state.next_seq[slot] {
            violation(format!(
                "sequence gap: expected {}, got {}",
                state.next_seq[slot], env.seq_no
            ));
        }
        state.next_seq[slot] = env.seq_no + 1;
        *counts.entry(env.message.kind()).or_default() += 1;
        let check_real = |x: f64, what: &str, violation: &mut dyn FnMut(String)| {
            if !x.is_finite() || x.abs() > bound + 1e-9 {
                violation(format!("{what} {x} outside ±{bound}"));
            }
        };
        match &env.message {
            Message::LoadProgram(load) => {
                state.widths = load.observables.iter().map(|o| o.width()).collect();
                if load.program.cuts != cuts {
                    violation(format!(
                        "program declares {} cuts, plan has {cuts}",
                        load.program.cuts
                    ));
                }
                if let Err(e) = load.program.to_program() {
                    violation(format!("program does not validate: {e}"));
                }
            }
            Message::Prepare(p) => {
                if decode_label(&p.label).is_err() {
                    violation(format!("bad label {:?}", p.label));
                }
            }
            Message::Execute(Execute::Exact {
                branches: Some(list),
            }) => {
                for b in list {
                    if decode_branch(b).ok().map(|t| t.len()) != Some(cuts) {
                        violation(format!("bad branch label {b:?}"));
                    }
                }
            }
            Message::Execute(Execute::Payload { observable, .. }) => {
                if *observable >= state.widths.len() {
                    violation(format!("payload observable {observable} not loaded"));
                }
            }
            Message::Measured(m) => {
                let width = if m.cut.is_some() {
                    1
                } else {
                    state.widths.iter().copied().max().unwrap_or(0)
                };
                if m.bits.len() > width {
                    violation(format!("{} bits for a {width}-bit register", m.bits.len()));
                }
                if m.bits.iter().any(|&b| b > 1) {
                    violation("bit value other than 0/1".into());
                }
            }
            Message::BranchResult(b) => {
                if decode_branch(&b.label).ok().map(|t| t.len()) != Some(cuts) {
                    violation(format!("bad branch label {:?}", b.label));
                }
                if b.expectations.len() != state.widths.len() {
                    violation(format!(
                        "{} expectations for {} loaded observables",
                        b.expectations.len(),
                        state.widths.len()
                    ));
                }
                check_real(b.trace_weight, "trace weight", &mut violation);
                for &x in &b.expectations {
                    check_real(x, "expectation", &mut violation);
                }
            }
            _ => {}
        }
    }
    let mut by_type: Vec<(String, usize)> =
        counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    by_type.sort();
    report.by_type = by_type;
    report
}
