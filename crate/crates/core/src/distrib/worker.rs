//! Worker endpoint: runs one party's local program on request.

use rayon::prelude::*;

use super::link::Link;
use super::message::{
    decode_branch, decode_label, encode_branch, BranchResult, Done, Execute, Hello, LoadProgram,
    Measured, Message, PROTOCOL_VERSION,
};
use super::transport::Transport;
use crate::circuit::{CutLabel, LocalProgram, Party};
use crate::error::{Error, Result};
use crate::qsim::Pauli;
use crate::sampler::{shot_rng, LocalRun, StreamRole};
use crate::wirecut::run_branch;

/// Failure injection for tests of the coordinator's recovery path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Report an error after this many branch results, then keep serving.
    Transient { after_branches: usize },
    /// Report an error after this many branch results and exit.
    Crash { after_branches: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerConfig {
    pub role: Party,
    pub fault: Option<Fault>,
}

impl WorkerConfig {
    pub fn new(role: Party) -> WorkerConfig {
        WorkerConfig { role, fault: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkerSummary {
    pub branches: u64,
    pub shots: u64,
    pub messages: u64,
}

fn role_stream(role: Party) -> StreamRole {
    match role {
        Party::Alice => StreamRole::Alice,
        Party::Bob => StreamRole::Bob,
    }
}

fn fail<T: Transport>(link: &mut Link<T>, code: &str, err: Error) -> Error {
    let _ = link.send(Message::error(code, err.to_string()));
    err
}

/// Serves a single session until the coordinator sends `DONE` or the
/// channel closes.
pub fn serve_worker<T: Transport>(transport: T, config: WorkerConfig) -> Result<WorkerSummary> {
    let mut link = Link::new(transport, None);
    let mut summary = WorkerSummary::default();

    match link.expect()? {
        Message::Hello(_) => link.send(Message::Hello(Hello {
            peer: config.role.into(),
            protocol: PROTOCOL_VERSION,
        }))?,
        other => {
            let err = Error::Protocol(format!("expected HELLO, got {}", other.kind()));
            return Err(fail(&mut link, "protocol", err));
        }
    }
    summary.messages += 1;

    let load = match link.expect()? {
        Message::LoadProgram(load) => load,
        Message::Done(_) => return Ok(summary),
        other => {
            let err = Error::Protocol(format!("expected LOAD_PROGRAM, got {}", other.kind()));
            return Err(fail(&mut link, "protocol", err));
        }
    };
    summary.messages += 1;
    let (program, observables) = match load_program(&load, config.role) {
        Ok(v) => v,
        Err(e) => return Err(fail(&mut link, "malformed-program", e)),
    };
    link.send(Message::Done(Done { count: 0 }))?;

    let mut session = Session {
        program: &program,
        observables,
        seed: load.seed,
        role: config.role,
        run: None,
        fault: config.fault,
        branches_sent: 0,
    };
    loop {
        let Some(message) = link.recv()? else {
            return Ok(summary);
        };
        summary.messages += 1;
        let step = match message {
            Message::Execute(Execute::Exact { branches }) => {
                session.exact(&mut link, branches, &mut summary)
            }
            Message::Execute(Execute::Measure { shot, cut, axis }) => session
                .run_for(shot)
                .and_then(|run| run.measure(cut, axis))
                .and_then(|bit| {
                    link.send(Message::Measured(Measured {
                        shot,
                        cut: Some(cut),
                        axis: Some(axis),
                        bits: vec![bit],
                    }))
                }),
            Message::Execute(Execute::Payload { shot, observable }) => {
                session.payload(&mut link, shot, observable, &mut summary)
            }
            Message::Prepare(p) => decode_label(&p.label)
                .and_then(|label| session.run_for(p.shot)?.prepare(p.cut, label))
                .and_then(|_| link.send(Message::Done(Done { count: 0 }))),
            Message::Done(_) | Message::Error(_) => return Ok(summary),
            other => Err(Error::Protocol(format!("unexpected {}", other.kind()))),
        };
        match step {
            Ok(()) => {}
            Err(Error::Aborted(reason)) => return Err(Error::Aborted(reason)),
            Err(e) => return Err(fail(&mut link, "protocol", e)),
        }
    }
}

fn load_program(
    load: &LoadProgram,
    role: Party,
) -> Result<(LocalProgram, Vec<Vec<(usize, Pauli)>>)> {
    if load.program.party != role {
        return Err(Error::Protocol(format!(
            "program for {} sent to the {role} worker",
            load.program.party
        )));
    }
    let program = load.program.to_program()?;
    let observables = load
        .observables
        .iter()
        .map(|o| {
            let factors = o.factors()?;
            for &(q, _) in &factors {
                if q >= program.data_qubits {
                    return Err(Error::CrossesPartition {
                        party: role.letter(),
                        index: q,
                        size: program.data_qubits,
                    });
                }
            }
            Ok(factors)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((program, observables))
}

struct Session<'p> {
    program: &'p LocalProgram,
    observables: Vec<Vec<(usize, Pauli)>>,
    seed: u64,
    role: Party,
    run: Option<(u64, LocalRun<'p>)>,
    fault: Option<Fault>,
    branches_sent: usize,
}

impl<'p> Session<'p> {
    fn run_for(&mut self, shot: u64) -> Result<&mut LocalRun<'p>> {
        if self.run.as_ref().is_none_or(|(s, _)| *s != shot) {
            let rng = shot_rng(self.seed, shot, role_stream(self.role));
            self.run = Some((shot, LocalRun::new(self.program, rng)));
        }
        Ok(&mut self.run.as_mut().expect("run just created").1)
    }

    fn payload<T: Transport>(
        &mut self,
        link: &mut Link<T>,
        shot: u64,
        observable: usize,
        summary: &mut WorkerSummary,
    ) -> Result<()> {
        let factors =
            self.observables.get(observable).cloned().ok_or_else(|| {
                Error::Protocol(format!("observable {observable} was not loaded"))
            })?;
        let (bits, _) = self.run_for(shot)?.payload(&factors)?;
        self.run = None;
        summary.shots += 1;
        link.send(Message::Measured(Measured {
            shot,
            cut: None,
            axis: None,
            bits: (0..factors.len())
                .map(|j| ((bits >> j) & 1) as u8)
                .collect(),
        }))
    }

    fn exact<T: Transport>(
        &mut self,
        link: &mut Link<T>,
        branches: Option<Vec<String>>,
        summary: &mut WorkerSummary,
    ) -> Result<()> {
        let tuples: Vec<Vec<CutLabel>> = match branches {
            None => CutLabel::all_tuples(self.program.cuts).collect(),
            Some(list) => list
                .iter()
                .map(|b| decode_branch(b))
                .collect::<Result<_>>()?,
        };
        let results = tuples
            .par_iter()
            .map(|labels| {
                let rho = run_branch(self.program, labels)?;
                Ok(BranchResult {
                    label: encode_branch(labels),
                    trace_weight: rho.trace_weight(),
                    expectations: self
                        .observables
                        .iter()
                        .map(|f| rho.pauli_expectation(f))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sent = 0u64;
        for result in results {
            if let Some(fault) = self.fault {
                let (after, crash) = match fault {
                    Fault::Transient { after_branches } => (after_branches, false),
                    Fault::Crash { after_branches } => (after_branches, true),
                };
                if self.branches_sent == after {
                    link.send(Message::error(
                        "worker-failure",
                        format!("injected fault after {after} branches"),
                    ))?;
                    if crash {
                        return Err(Error::Aborted("injected crash".into()));
                    }
                    self.fault = None;
                    return Ok(());
                }
            }
            link.send(Message::BranchResult(result))?;
            self.branches_sent += 1;
            sent += 1;
            summary.branches += 1;
        }
        link.send(Message::Done(Done { count: sent }))
    }
}
