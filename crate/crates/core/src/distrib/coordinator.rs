//! Coordinator: ships local programs, collects classical results and
//! recombines them.

use super::link::{Channel, Link, Log};
use super::message::{
    decode_branch, encode_branch, encode_label, session_id, Done, Execute, Hello, LoadProgram,
    LocalPauli, Message, Peer, PrepareLabel, ProgramDescriptor, PROTOCOL_VERSION,
};
use super::transcript::{SessionMode, Transcript, TranscriptHeader, TranscriptResult};
use super::transport::Transport;
use crate::circuit::{
    split_local, CircuitDocument, CutLabel, CutPlan, Observable, PartitionedCircuit, Party,
};
use crate::error::{Error, Result};
use crate::qsim::{c, kron_le, BasisLabel, CMatrix, DensityOperator, Pauli, PauliAxis};
use crate::sampler::{
    drive_shot, overhead, shot_rng, EstimatorReport, PayloadSpec, ShotEndpoint, ShotRecord,
    StreamRole,
};
use crate::wirecut::{recombine_scalars, TransitionMatrix};

/// Result of a distributed sampled run.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributedSample {
    pub report: EstimatorReport,
    pub records: Vec<ShotRecord>,
}

/// Drives one session against two workers and records every line.
pub struct Coordinator<A: Transport, B: Transport> {
    alice: Link<A>,
    bob: Link<B>,
    log: Log,
    header: Option<TranscriptHeader>,
    result: Option<TranscriptResult>,
}

type Table = Vec<Vec<f64>>;

impl<A: Transport, B: Transport> Coordinator<A, B> {
    /// The session id is derived from `seed`, so reruns with the same seed
    /// produce identical message lines.
    pub fn new(alice: A, bob: B, seed: u64) -> Coordinator<A, B> {
        let log = Log::new();
        let id = session_id(seed);
        Coordinator {
            alice: Link::new(alice, Some(id.clone())).with_log(log.clone(), Party::Alice),
            bob: Link::new(bob, Some(id)).with_log(log.clone(), Party::Bob),
            log,
            header: None,
            result: None,
        }
    }

    /// Everything exchanged so far; also available after an abort. `None`
    /// before the first run.
    pub fn transcript(&self) -> Option<Transcript> {
        Some(Transcript {
            header: self.header.clone()?,
            entries: self.log.snapshot(),
            result: self.result.clone(),
        })
    }

    fn link(&mut self, party: Party) -> &mut dyn Channel {
        match party {
            Party::Alice => &mut self.alice,
            Party::Bob => &mut self.bob,
        }
    }

    fn begin(
        &mut self,
        mode: SessionMode,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observable: Option<&Observable>,
        shots: Option<u64>,
        seed: u64,
    ) {
        self.header = Some(TranscriptHeader {
            mode,
            session_id: self.alice.session_id().unwrap_or_default().to_owned(),
            circuit: CircuitDocument::from(circuit),
            plan: plan.clone(),
            observable: observable.map(|o| o.to_string()),
            shots,
            seed,
        });
        self.result = None;
    }

    fn finish(&mut self, outcome: Result<Vec<f64>>) -> Result<Vec<f64>> {
        let (closing, result) = match &outcome {
            Ok(values) => (
                Message::Done(Done { count: 0 }),
                TranscriptResult {
                    values: values.clone(),
                    error: None,
                },
            ),
            Err(e) => (
                Message::error("aborted", e.to_string()),
                TranscriptResult {
                    values: Vec::new(),
                    error: Some(e.to_string()),
                },
            ),
        };
        for party in [Party::Alice, Party::Bob] {
            let _ = self.link(party).send(closing.clone());
        }
        self.result = Some(result);
        outcome
    }

    fn handshake(&mut self) -> Result<()> {
        for party in [Party::Alice, Party::Bob] {
            self.link(party).send(Message::Hello(Hello {
                peer: Peer::Coordinator,
                protocol: PROTOCOL_VERSION,
            }))?;
        }
        for party in [Party::Alice, Party::Bob] {
            match self.link(party).expect()? {
                Message::Hello(h)
                    if h.peer == Peer::from(party) && h.protocol == PROTOCOL_VERSION => {}
                Message::Hello(h) => {
                    return Err(Error::Protocol(format!(
                        "{party} endpoint identifies as {:?}",
                        h.peer
                    )))
                }
                other => {
                    return Err(Error::Protocol(format!(
                        "{party} answered HELLO with {}",
                        other.kind()
                    )))
                }
            }
        }
        Ok(())
    }

    fn load(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observables: [Vec<LocalPauli>; 2],
        seed: u64,
    ) -> Result<()> {
        self.handshake()?;
        let (alice, bob) = split_local(circuit, plan)?;
        let [obs_a, obs_b] = observables;
        for (party, program, observables) in
            [(Party::Alice, &alice, obs_a), (Party::Bob, &bob, obs_b)]
        {
            self.link(party).send(Message::LoadProgram(LoadProgram {
                program: ProgramDescriptor::from(program),
                observables,
                seed,
            }))?;
        }
        for party in [Party::Alice, Party::Bob] {
            match self.link(party).expect()? {
                Message::Done(_) => {}
                Message::Error(e) => {
                    return Err(Error::Aborted(format!(
                        "{party} rejected the program: {}",
                        e.detail
                    )))
                }
                other => {
                    return Err(Error::Protocol(format!(
                        "{party} answered LOAD_PROGRAM with {}",
                        other.kind()
                    )))
                }
            }
        }
        Ok(())
    }

    /// One row of loaded-observable expectations per label tuple, for both
    /// parties. Both workers compute concurrently; a failed batch is retried
    /// once for its missing branches before the session is aborted.
    fn collect_branches(&mut self, cuts: usize, widths: [usize; 2]) -> Result<[Table; 2]> {
        let count = 36usize.pow(cuts as u32);
        for party in [Party::Alice, Party::Bob] {
            self.link(party)
                .send(Message::Execute(Execute::Exact { branches: None }))?;
        }
        let mut tables = [vec![None; count], vec![None; count]];
        for (side, party) in [Party::Alice, Party::Bob].into_iter().enumerate() {
            let table = &mut tables[side];
            if let Err(first) = drain_batch(self.link(party), table, widths[side]) {
                let missing: Vec<String> = table
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_none())
                    .map(|(k, _)| encode_branch(&CutLabel::tuple_from_index(k, cuts)))
                    .collect();
                let link = self.link(party);
                let retry = link
                    .send(Message::Execute(Execute::Exact {
                        branches: Some(missing),
                    }))
                    .and_then(|_| drain_batch(link, table, widths[side]));
                if let Err(again) = retry {
                    return Err(Error::Aborted(format!(
                        "{party} worker failed ({first}); retry failed ({again})"
                    )));
                }
            }
        }
        let [a, b] = tables;
        Ok([complete(a, Party::Alice)?, complete(b, Party::Bob)?])
    }

    /// `⟨O⟩` recombined from branch expectations gathered over the wire.
    pub fn exact(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observable: &Observable,
        seed: u64,
    ) -> Result<f64> {
        self.begin(
            SessionMode::Exact,
            circuit,
            plan,
            Some(observable),
            None,
            seed,
        );
        let outcome = self
            .exact_inner(circuit, plan, observable, seed)
            .map(|v| vec![v]);
        self.finish(outcome).map(|v| v[0])
    }

    fn exact_inner(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observable: &Observable,
        seed: u64,
    ) -> Result<f64> {
        observable.check_width(circuit.num_qubits())?;
        let split: Vec<_> = observable
            .terms
            .iter()
            .map(|(_, p)| p.split(circuit.alice_qubits))
            .collect();
        let obs_a: Vec<_> = split
            .iter()
            .map(|(a, _)| LocalPauli::from_factors(a))
            .collect();
        let obs_b: Vec<_> = split
            .iter()
            .map(|(_, b)| LocalPauli::from_factors(b))
            .collect();
        self.load(circuit, plan, [obs_a, obs_b], seed)?;
        let cuts = plan.num_cuts();
        let [va, vb] = self.collect_branches(cuts, [split.len(); 2])?;
        let mut total = 0.0;
        for (t, (coef, _)) in observable.terms.iter().enumerate() {
            total += coef * pair_up(plan.owner, cuts, &column(&va, t), &column(&vb, t))?;
        }
        Ok(total)
    }

    /// Output state, from the branch expectations of every local Pauli
    /// string. Only real scalars cross the channel.
    pub fn state(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        seed: u64,
    ) -> Result<DensityOperator> {
        self.begin(SessionMode::State, circuit, plan, None, None, seed);
        let outcome = self.state_inner(circuit, plan, seed);
        let values = self.finish(outcome)?;
        Ok(state_from_pauli_coefficients(
            circuit.alice_qubits,
            circuit.bob_qubits,
            &values,
        ))
    }

    fn state_inner(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let strings_a = pauli_strings(circuit.alice_qubits);
        let strings_b = pauli_strings(circuit.bob_qubits);
        let obs_a = strings_a
            .iter()
            .map(|f| LocalPauli::from_factors(f))
            .collect();
        let obs_b = strings_b
            .iter()
            .map(|f| LocalPauli::from_factors(f))
            .collect();
        self.load(circuit, plan, [obs_a, obs_b], seed)?;
        let cuts = plan.num_cuts();
        let [va, vb] = self.collect_branches(cuts, [strings_a.len(), strings_b.len()])?;
        let mut values = Vec::with_capacity(strings_a.len() * strings_b.len());
        for kb in 0..strings_b.len() {
            let b = column(&vb, kb);
            for ka in 0..strings_a.len() {
                values.push(pair_up(plan.owner, cuts, &column(&va, ka), &b)?);
            }
        }
        Ok(values)
    }

    /// Sampled estimator. Per shot the coordinator draws the axes and relays
    /// outcome bits and labels between the workers.
    pub fn sampled(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observable: &Observable,
        shots: u64,
        seed: u64,
    ) -> Result<DistributedSample> {
        self.begin(
            SessionMode::Sampled,
            circuit,
            plan,
            Some(observable),
            Some(shots),
            seed,
        );
        match self.sampled_inner(circuit, plan, observable, shots, seed) {
            Ok(sample) => {
                self.finish(Ok(vec![sample.report.mean, sample.report.stderr]))?;
                Ok(sample)
            }
            Err(e) => Err(self.finish(Err(e)).expect_err("error passes through")),
        }
    }

    fn sampled_inner(
        &mut self,
        circuit: &PartitionedCircuit,
        plan: &CutPlan,
        observable: &Observable,
        shots: u64,
        seed: u64,
    ) -> Result<DistributedSample> {
        if shots == 0 {
            return Err(Error::Shots { min: 1, got: 0 });
        }
        observable.check_width(circuit.num_qubits())?;
        let payload = PayloadSpec::from_observable(observable, circuit.alice_qubits)?;
        let observables = [
            vec![LocalPauli::from_factors(&payload.alice)],
            vec![LocalPauli::from_factors(&payload.bob)],
        ];
        self.load(circuit, plan, observables, seed)?;
        let m = TransitionMatrix::new();
        let cuts = plan.num_cuts();
        let start = std::time::Instant::now();
        let mut records = Vec::with_capacity(shots as usize);
        for shot in 0..shots {
            let mut coordinator = shot_rng(seed, shot, StreamRole::Coordinator);
            let mut a = Remote {
                link: &mut self.alice,
                shot,
            };
            let mut b = Remote {
                link: &mut self.bob,
                shot,
            };
            records.push(drive_shot(
                &mut a,
                &mut b,
                plan.owner,
                cuts,
                &mut coordinator,
                &payload,
                &m,
            )?);
        }
        let contributions: Vec<f64> = records.iter().map(|r| r.contribution).collect();
        Ok(DistributedSample {
            report: EstimatorReport::from_contributions(
                &contributions,
                overhead(cuts as u32),
                seed,
                circuit.content_hash(),
                start.elapsed().as_secs_f64(),
            ),
            records,
        })
    }
}

/// Reads `BRANCH_RESULT`s into `table` until `DONE`.
fn drain_batch(link: &mut dyn Channel, table: &mut [Option<Vec<f64>>], width: usize) -> Result<()> {
    loop {
        match link.expect()? {
            Message::BranchResult(r) => {
                let labels = decode_branch(&r.label)?;
                let k = CutLabel::tuple_index(&labels);
                if r.expectations.len() != width || k >= table.len() {
                    return Err(Error::Protocol(format!(
                        "malformed branch result {}",
                        r.label
                    )));
                }
                table[k] = Some(r.expectations);
            }
            Message::Done(_) => return Ok(()),
            Message::Error(e) => return Err(Error::Aborted(format!("{}: {}", e.code, e.detail))),
            other => {
                return Err(Error::Protocol(format!(
                    "unexpected {} during a branch batch",
                    other.kind()
                )))
            }
        }
    }
}

fn complete(table: Vec<Option<Vec<f64>>>, party: Party) -> Result<Table> {
    table
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| Error::MissingBranch(format!("{party} tuple {k}"))))
        .collect()
}

fn column(table: &Table, k: usize) -> Vec<f64> {
    table.iter().map(|row| row[k]).collect()
}

fn pair_up(owner: Party, cuts: usize, alice: &[f64], bob: &[f64]) -> Result<f64> {
    let m = TransitionMatrix::new();
    match owner {
        Party::Alice => recombine_scalars(cuts, alice, bob, &m),
        Party::Bob => recombine_scalars(cuts, bob, alice, &m),
    }
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// All `4^n` Pauli strings on `n` qubits; digit `q` (base 4) of the index
/// selects the factor on qubit `q`.
pub fn pauli_strings(n: usize) -> Vec<Vec<(usize, Pauli)>> {
    (0..4usize.pow(n as u32))
        .map(|code| (0..n).map(|q| (q, PAULIS[(code >> (2 * q)) & 3])).collect())
        .collect()
}

/// `ρ = 2^{-N} Σ ⟨P_A ⊗ P_B⟩ P_A ⊗ P_B`, values indexed `b * 4^m + a`.
pub fn state_from_pauli_coefficients(
    alice_qubits: usize,
    bob_qubits: usize,
    values: &[f64],
) -> DensityOperator {
    let n = alice_qubits + bob_qubits;
    let dim = 1usize << n;
    let na = 4usize.pow(alice_qubits as u32);
    let mut acc = CMatrix::zeros(dim, dim);
    for (idx, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (a, b) = (idx % na, idx / na);
        let factors: Vec<CMatrix> = (0..alice_qubits)
            .map(|q| PAULIS[(a >> (2 * q)) & 3].matrix())
            .chain((0..bob_qubits).map(|q| PAULIS[(b >> (2 * q)) & 3].matrix()))
            .collect();
        acc += kron_le(&factors) * c(v, 0.0);
    }
    DensityOperator::from_matrix_unchecked(acc.unscale(dim as f64))
}

/// Shot-level proxy for a remote worker.
struct Remote<'a, T: Transport> {
    link: &'a mut Link<T>,
    shot: u64,
}

impl<T: Transport> Remote<'_, T> {
    fn expect_bits(&mut self, cut: Option<usize>, width: usize) -> Result<Vec<u8>> {
        match self.link.expect()? {
            Message::Measured(m)
                if m.shot == self.shot && m.cut == cut && m.bits.len() == width =>
            {
                Ok(m.bits)
            }
            Message::Measured(m) => Err(Error::Protocol(format!("unexpected MEASURED {m:?}"))),
            Message::Error(e) => Err(Error::Aborted(format!("{}: {}", e.code, e.detail))),
            other => Err(Error::Protocol(format!(
                "expected MEASURED, got {}",
                other.kind()
            ))),
        }
    }
}

impl<T: Transport> ShotEndpoint for Remote<'_, T> {
    fn measure(&mut self, cut: usize, axis: PauliAxis) -> Result<u8> {
        self.link.send(Message::Execute(Execute::Measure {
            shot: self.shot,
            cut,
            axis,
        }))?;
        Ok(self.expect_bits(Some(cut), 1)?[0])
    }

    fn prepare(&mut self, cut: usize, label: BasisLabel) -> Result<()> {
        self.link.send(Message::Prepare(PrepareLabel {
            shot: self.shot,
            cut,
            label: encode_label(label),
        }))?;
        match self.link.expect()? {
            Message::Done(_) => Ok(()),
            Message::Error(e) => Err(Error::Aborted(format!("{}: {}", e.code, e.detail))),
            other => Err(Error::Protocol(format!(
                "expected DONE, got {}",
                other.kind()
            ))),
        }
    }

    fn payload(&mut self, factors: &[(usize, Pauli)]) -> Result<(u64, f64)> {
        let width = factors.iter().filter(|f| f.1 != Pauli::I).count();
        self.link.send(Message::Execute(Execute::Payload {
            shot: self.shot,
            observable: 0,
        }))?;
        let bits = self.expect_bits(None, width)?;
        let packed = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | u64::from(b) << j);
        let eigenvalue = if packed.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        Ok((packed, eigenvalue))
    }
}
