//! Two workers and a coordinator connected only by classical messages.
//!
//! Each worker receives its party-local program and answers with outcome
//! bits, branch labels and real expectation values. The coordinator draws all
//! randomness, relays labels between the parties and recombines. Every line
//! is logged to a [`Transcript`] that can be audited and replayed.

mod coordinator;
mod link;
pub mod message;
mod transcript;
mod transport;
mod worker;

use std::net::TcpListener;
use std::thread::JoinHandle;

pub use coordinator::{
    pauli_strings, state_from_pauli_coefficients, Coordinator, DistributedSample,
};
pub use link::{Channel, Link};
pub use message::{Envelope, Message};
pub use transcript::{
    audit, AuditReport, Direction, SessionMode, Transcript, TranscriptEntry, TranscriptHeader,
    TranscriptResult,
};
pub use transport::{loopback_pair, Loopback, ReplayTransport, TcpTransport, Transport};
pub use worker::{serve_worker, Fault, WorkerConfig, WorkerSummary};

use crate::circuit::{Observable, Party};
use crate::error::{Error, Result};

/// Worker threads behind in-process channels.
pub struct WorkerThreads {
    handles: Vec<JoinHandle<Result<WorkerSummary>>>,
}

impl WorkerThreads {
    /// Waits for both workers; returns their individual outcomes.
    pub fn join(self) -> Vec<Result<WorkerSummary>> {
        self.handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Aborted("worker thread panicked".into())))
            })
            .collect()
    }
}

/// Starts Alice and Bob workers on loopback channels and returns the
/// coordinator ends.
pub fn spawn_loopback(
    alice: WorkerConfig,
    bob: WorkerConfig,
) -> (Loopback, Loopback, WorkerThreads) {
    let (coord_a, worker_a) = loopback_pair();
    let (coord_b, worker_b) = loopback_pair();
    let handles = vec![
        std::thread::spawn(move || serve_worker(worker_a, alice)),
        std::thread::spawn(move || serve_worker(worker_b, bob)),
    ];
    (coord_a, coord_b, WorkerThreads { handles })
}

/// Accepts one coordinator connection on `listener` and serves it.
pub fn serve_tcp(listener: &TcpListener, config: WorkerConfig) -> Result<WorkerSummary> {
    serve_worker(TcpTransport::accept(listener)?, config)
}

/// Starts both workers on ephemeral localhost ports; returns their addresses.
pub fn spawn_tcp(
    alice: WorkerConfig,
    bob: WorkerConfig,
) -> Result<(std::net::SocketAddr, std::net::SocketAddr, WorkerThreads)> {
    let la = TcpListener::bind("127.0.0.1:0")?;
    let lb = TcpListener::bind("127.0.0.1:0")?;
    let (aa, ab) = (la.local_addr()?, lb.local_addr()?);
    let handles = vec![
        std::thread::spawn(move || serve_tcp(&la, alice)),
        std::thread::spawn(move || serve_tcp(&lb, bob)),
    ];
    Ok((aa, ab, WorkerThreads { handles }))
}

/// Outcome of rerunning a transcript.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutcome {
    pub values: Vec<f64>,
    /// Whether the rerun reproduced the recorded values bit for bit.
    pub identical: bool,
}

/// Reruns the coordinator against the recorded worker replies. Every line the
/// coordinator sends must match the recording exactly.
pub fn replay(transcript: &Transcript) -> Result<ReplayOutcome> {
    let h = &transcript.header;
    let circuit = h.circuit.clone().into_circuit()?;
    let replay_for = |p: Party| {
        ReplayTransport::new(
            transcript.lines(p, Direction::Send),
            transcript.lines(p, Direction::Recv),
        )
    };
    let mut coordinator =
        Coordinator::new(replay_for(Party::Alice), replay_for(Party::Bob), h.seed);
    let observable = || {
        h.observable
            .as_deref()
            .ok_or_else(|| Error::Document("transcript header lacks the observable".into()))
            .and_then(Observable::parse)
    };
    let outcome = match h.mode {
        SessionMode::Exact => coordinator
            .exact(&circuit, &h.plan, &observable()?, h.seed)
            .map(|v| vec![v]),
        SessionMode::State => coordinator
            .state(&circuit, &h.plan, h.seed)
            .map(|_| Vec::new()),
        SessionMode::Sampled => {
            let shots = h
                .shots
                .ok_or_else(|| Error::Document("transcript header lacks the shot count".into()))?;
            coordinator
                .sampled(&circuit, &h.plan, &observable()?, shots, h.seed)
                .map(|s| vec![s.report.mean, s.report.stderr])
        }
    };
    let rerun = coordinator
        .transcript()
        .and_then(|t| t.result)
        .ok_or_else(|| Error::Consistency("replay produced no result".into()))?;
    let recorded = transcript.result.clone().unwrap_or(TranscriptResult {
        values: Vec::new(),
        error: None,
    });
    let same_bits = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    };
    let identical = same_bits(&rerun.values, &recorded.values)
        && rerun.error.is_some() == recorded.error.is_some();
    if let Err(e) = outcome {
        if recorded.error.is_none() {
            return Err(e);
        }
    }
    Ok(ReplayOutcome {
        values: rerun.values,
        identical,
    })
}
