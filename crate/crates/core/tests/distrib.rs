use forgecut::circuit::generate::random_circuit;
use forgecut::circuit::{
    parse_circuit, split_local, AuxPolicy, CutPlan, GateDocument, Observable, PartitionedCircuit,
    Party, Substitution,
};
use forgecut::distrib::message::{
    session_id, Done, Execute, Hello, LoadProgram, Peer, ProgramDescriptor, StepDocument,
    PROTOCOL_VERSION,
};
use forgecut::distrib::{
    audit, loopback_pair, replay, serve_worker, spawn_loopback, spawn_tcp, Coordinator, Fault,
    Link, Loopback, Message, TcpTransport, Transcript, TranscriptEntry, WorkerConfig,
};
use forgecut::qsim::trace_distance;
use forgecut::sampler::run_sampled;
use forgecut::wirecut::ExactCut;
use forgecut::Error;

fn bell() -> PartitionedCircuit {
    parse_circuit(include_str!("../../../circuits/bell.json")).unwrap()
}

fn workers() -> (Loopback, Loopback, forgecut::distrib::WorkerThreads) {
    spawn_loopback(
        WorkerConfig::new(Party::Alice),
        WorkerConfig::new(Party::Bob),
    )
}

fn hello() -> Message {
    Message::Hello(Hello {
        peer: Peer::Coordinator,
        protocol: PROTOCOL_VERSION,
    })
}

/// A coordinator-side link to a fresh worker thread.
fn direct(
    role: Party,
) -> (
    Link<Loopback>,
    std::thread::JoinHandle<forgecut::Result<forgecut::distrib::WorkerSummary>>,
) {
    let (coord, worker) = loopback_pair();
    let handle = std::thread::spawn(move || serve_worker(worker, WorkerConfig::new(role)));
    (Link::new(coord, Some(session_id(1))), handle)
}

#[test]
fn hello_roundtrip() {
    let (mut link, handle) = direct(Party::Alice);
    link.send(hello()).unwrap();
    match link.expect().unwrap() {
        Message::Hello(h) => assert_eq!(h.peer, Peer::Alice),
        other => panic!("{other:?}"),
    }
    link.send(Message::Done(Done { count: 0 })).unwrap();
    assert!(handle.join().unwrap().is_ok());
}

#[test]
fn foreign_qubit_is_rejected() {
    let c = bell();
    let (alice, _) = split_local(&c, &CutPlan::alice_side(&c)).unwrap();
    let mut desc = ProgramDescriptor::from(&alice);
    desc.steps.insert(
        0,
        StepDocument::Gate {
            gate: GateDocument {
                name: "x".into(),
                targets: vec![alice.num_qubits + 3],
                params: vec![],
                matrix: None,
            },
        },
    );
    let (mut link, handle) = direct(Party::Alice);
    link.send(hello()).unwrap();
    link.expect().unwrap();
    link.send(Message::LoadProgram(LoadProgram {
        program: desc,
        observables: vec![],
        seed: 1,
    }))
    .unwrap();
    match link.expect().unwrap() {
        Message::Error(e) => assert_eq!(e.code, "malformed-program"),
        other => panic!("{other:?}"),
    }
    assert!(handle.join().unwrap().is_err());
}

#[test]
fn exact_batch_has_36_branches() {
    let c = bell();
    let (alice, _) = split_local(&c, &CutPlan::alice_side(&c)).unwrap();
    let (mut link, handle) = direct(Party::Alice);
    link.send(hello()).unwrap();
    link.expect().unwrap();
    link.send(Message::LoadProgram(LoadProgram {
        program: ProgramDescriptor::from(&alice),
        observables: vec![],
        seed: 1,
    }))
    .unwrap();
    assert!(matches!(link.expect().unwrap(), Message::Done(_)));
    link.send(Message::Execute(Execute::Exact { branches: None }))
        .unwrap();
    let mut results = 0;
    loop {
        match link.expect().unwrap() {
            Message::BranchResult(r) => {
                assert!(r.expectations.is_empty());
                assert!((-1e-12..=1.0 + 1e-12).contains(&r.trace_weight));
                results += 1;
            }
            Message::Done(d) => {
                assert_eq!(d.count, 36);
                break;
            }
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(results, 36);
    link.send(Message::Done(Done { count: 0 })).unwrap();
    handle.join().unwrap().unwrap();
}

#[test]
fn sequence_gap_aborts() {
    let (coord, worker) = loopback_pair();
    let handle = std::thread::spawn(move || serve_worker(worker, WorkerConfig::new(Party::Bob)));
    let mut raw = coord;
    use forgecut::distrib::Transport;
    let env = |seq| {
        forgecut::distrib::Envelope {
            session_id: "s".into(),
            seq_no: seq,
            message: hello(),
        }
        .encode()
    };
    raw.send_line(&env(0)).unwrap();
    raw.recv_line().unwrap().unwrap();
    raw.send_line(&env(5)).unwrap();
    assert!(handle.join().unwrap().is_err());
}

#[test]
fn exact_bell_over_loopback() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("ZZ").unwrap();
    let (a, b, threads) = workers();
    let mut coord = Coordinator::new(a, b, 5);
    let value = coord.exact(&c, &plan, &obs, 5).unwrap();
    assert!((value - 1.0).abs() < 1e-10);
    let in_process = ExactCut::run(&c, &plan).unwrap().expectation(&obs).unwrap();
    assert!((value - in_process).abs() < 1e-10);
    assert!(threads.join().into_iter().all(|r| r.is_ok()));

    let transcript = coord.transcript().unwrap();
    let report = audit(&transcript);
    assert!(report.passed(), "{:?}", report.violations);
    let again = replay(&transcript).unwrap();
    assert!(again.identical);
    assert_eq!(again.values[0].to_bits(), value.to_bits());
}

#[test]
fn transcript_file_roundtrip_and_replay() {
    let c = parse_circuit(include_str!("../../../circuits/two-gate.json")).unwrap();
    let plan = CutPlan::for_circuit(
        &c,
        Party::Bob,
        AuxPolicy::ReuseAfterReset,
        Substitution::SwapConjugate,
    );
    let obs = Observable::parse("0.5*XZY + -0.25*Z0").unwrap();
    let (a, b, threads) = workers();
    let mut coord = Coordinator::new(a, b, 9);
    let value = coord.exact(&c, &plan, &obs, 9).unwrap();
    threads.join();
    let oracle = obs.expectation(&c.simulate_full_density()).unwrap();
    assert!((value - oracle).abs() < 1e-10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    coord.transcript().unwrap().write(&path).unwrap();
    let back = Transcript::read(&path).unwrap();
    assert_eq!(back, coord.transcript().unwrap());
    assert!(replay(&back).unwrap().identical);
}

#[test]
fn transient_failure_is_retried() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("XX").unwrap();
    let bob = WorkerConfig {
        role: Party::Bob,
        fault: Some(Fault::Transient { after_branches: 10 }),
    };
    let (a, b, threads) = spawn_loopback(WorkerConfig::new(Party::Alice), bob);
    let mut coord = Coordinator::new(a, b, 3);
    let value = coord.exact(&c, &plan, &obs, 3).unwrap();
    threads.join();
    assert!((value - 1.0).abs() < 1e-10);
    let t = coord.transcript().unwrap();
    assert!(t.contains_error());
    assert!(replay(&t).unwrap().identical);
}

#[test]
fn crashed_worker_aborts_with_partial_transcript() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("ZZ").unwrap();
    let bob = WorkerConfig {
        role: Party::Bob,
        fault: Some(Fault::Crash { after_branches: 10 }),
    };
    let (a, b, threads) = spawn_loopback(WorkerConfig::new(Party::Alice), bob);
    let mut coord = Coordinator::new(a, b, 3);
    let err = coord.exact(&c, &plan, &obs, 3).unwrap_err();
    assert!(matches!(err, Error::Aborted(_)), "{err}");
    let results = threads.join();
    assert!(results[1].is_err());
    let t = coord.transcript().unwrap();
    assert!(t.contains_error());
    let bob_results = t
        .entries
        .iter()
        .filter(|e| e.peer == Party::Bob && e.line.contains("BRANCH_RESULT"))
        .count();
    assert_eq!(bob_results, 10);
    assert!(t.result.as_ref().unwrap().error.is_some());
    assert!(replay(&t).unwrap().identical);
}

#[test]
fn sampled_matches_in_process_sampler() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("ZZ").unwrap();
    let shots = 10_000;
    let (a, b, threads) = workers();
    let mut coord = Coordinator::new(a, b, 21);
    let run = coord.sampled(&c, &plan, &obs, shots, 21).unwrap();
    threads.join();
    let r = &run.report;
    assert!(
        (r.mean - 1.0).abs() < 5.0 * r.stderr,
        "{} ± {}",
        r.mean,
        r.stderr
    );
    let local = run_sampled(&c, &obs, shots, 21).unwrap();
    assert_eq!(local.records, run.records);
    assert_eq!(local.report.mean.to_bits(), r.mean.to_bits());

    let t = coord.transcript().unwrap();
    let report = audit(&t);
    assert!(report.passed(), "{:?}", report.violations);
    assert!(replay(&t).unwrap().identical);
}

#[test]
fn tcp_and_loopback_agree() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("ZZ").unwrap();
    let (aa, ab, threads) = spawn_tcp(
        WorkerConfig::new(Party::Alice),
        WorkerConfig::new(Party::Bob),
    )
    .unwrap();
    let mut tcp = Coordinator::new(
        TcpTransport::connect(aa).unwrap(),
        TcpTransport::connect(ab).unwrap(),
        4,
    );
    let over_tcp = tcp.sampled(&c, &plan, &obs, 2_000, 4).unwrap();
    assert!(threads.join().into_iter().all(|r| r.is_ok()));

    let (a, b, threads) = workers();
    let mut lo = Coordinator::new(a, b, 4);
    let over_loopback = lo.sampled(&c, &plan, &obs, 2_000, 4).unwrap();
    threads.join();
    assert_eq!(
        over_tcp.report.mean.to_bits(),
        over_loopback.report.mean.to_bits()
    );
    let lines = |t: Transcript| t.entries.into_iter().map(|e| e.line).collect::<Vec<_>>();
    assert_eq!(
        lines(tcp.transcript().unwrap()),
        lines(lo.transcript().unwrap())
    );
}

#[test]
fn distributed_state_matches_full_simulation() {
    for seed in 0..3 {
        let c = random_circuit(2, 2, 1 + (seed as usize % 2), seed).unwrap();
        let plan = CutPlan::alice_side(&c);
        let (a, b, threads) = workers();
        let mut coord = Coordinator::new(a, b, seed);
        let rho = coord.state(&c, &plan, seed).unwrap();
        threads.join();
        assert!(
            trace_distance(&rho, &c.simulate_full_density()) < 1e-10,
            "seed {seed}"
        );
        assert!(audit(&coord.transcript().unwrap()).passed());
    }
}

#[test]
fn audit_flags_tampered_lines() {
    let c = bell();
    let plan = CutPlan::alice_side(&c);
    let (a, b, threads) = workers();
    let mut coord = Coordinator::new(a, b, 2);
    coord
        .sampled(&c, &plan, &Observable::parse("ZZ").unwrap(), 50, 2)
        .unwrap();
    threads.join();
    let clean = coord.transcript().unwrap();
    assert!(audit(&clean).passed());

    let sid = clean.header.session_id.clone();
    let tamper = |line: String| {
        let mut t = clean.clone();
        let idx = t
            .entries
            .iter()
            .rposition(|e| e.peer == Party::Bob && e.line.contains("MEASURED"))
            .unwrap();
        let seq = forgecut::distrib::Envelope::decode(&t.entries[idx].line)
            .unwrap()
            .seq_no;
        t.entries[idx] = TranscriptEntry {
            line: line.replace("SEQ", &seq.to_string()),
            ..t.entries[idx].clone()
        };
        t
    };
    let amplitudes = tamper(format!(
        r#"{{"session_id":"{sid}","seq_no":SEQ,"type":"MEASURED","payload":{{"shot":49,"bits":[1],"amplitudes":[[0.7,0.0],[0.7,0.0]]}}}}"#
    ));
    assert!(!audit(&amplitudes).passed());
    let wide = tamper(format!(
        r#"{{"session_id":"{sid}","seq_no":SEQ,"type":"MEASURED","payload":{{"shot":49,"bits":[1,0,1,1,0,1]}}}}"#
    ));
    assert!(!audit(&wide).passed());
    let foreign = tamper(
        r#"{"session_id":"other","seq_no":SEQ,"type":"MEASURED","payload":{"shot":49,"bits":[1]}}"#
            .to_owned(),
    );
    assert!(!audit(&foreign).passed());
}

#[test]
fn state_transcript_replays_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 1..4 {
        let c = random_circuit(2, 2, 2, seed).unwrap();
        let plan = CutPlan::alice_side(&c);
        let (a, b, threads) = workers();
        let mut coord = Coordinator::new(a, b, seed);
        coord.state(&c, &plan, seed).unwrap();
        threads.join();
        let path = dir.path().join(format!("state-{seed}.jsonl"));
        coord.transcript().unwrap().write(&path).unwrap();
        let back = Transcript::read(&path).unwrap();
        assert_eq!(back, coord.transcript().unwrap());
        assert!(replay(&back).unwrap().identical, "seed {seed}");
    }
}
