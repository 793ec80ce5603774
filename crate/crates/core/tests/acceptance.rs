//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with its
//! runtime; run with `--nocapture` to see them.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use forgecut::circuit::generate::random_circuit;
use forgecut::circuit::{
    parse_circuit, CutLabel, CutPlan, Layer, Observable, PartitionedCircuit, Party,
};
use forgecut::distrib::{
    audit, replay, spawn_loopback, spawn_tcp, Coordinator, TcpTransport, Transcript, Transport,
    WorkerConfig,
};
use forgecut::forging::{bell_density, forge_bell, forge_schmidt, z_factor, SchmidtForm};
use forgecut::mitigation::{mitigate_cut_exact, mitigate_cut_sampled};
use forgecut::qsim::random::{haar_unitary, random_density, random_pure_state};
use forgecut::qsim::{
    fidelity, max_abs_diff, trace_distance, DensityOperator, Pauli, PauliAxis, PureState,
    UnitaryGate,
};
use forgecut::sampler::{overhead, run_sampled};
use forgecut::teleport::{
    forged_teleportation, gate_teleport, is_teleportable, qst_equivalence, BellOutcome,
};
use forgecut::wirecut::{forged_identity, paired_indices, ExactCut, TransitionMatrix};
use forgecut::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed < limit;
    println!(
        "criterion {n} {name}: {} ({:.3?} of {:?}) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(elapsed < limit, "criterion {n} over time: {elapsed:?}");
}

fn bell_circuit() -> PartitionedCircuit {
    parse_circuit(include_str!("../../../circuits/bell.json")).unwrap()
}

/// `m = n = 2` with `gates` Haar-random nonlocal two-qubit unitaries between
/// Haar-random local layers.
fn haar_circuit(gates: usize, seed: u64) -> PartitionedCircuit {
    let mut c = random_circuit(2, 2, gates, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for layer in &mut c.layers {
        if let Layer::Nonlocal(nl) = layer {
            nl.gate =
                UnitaryGate::named("unitary", &[], Some(haar_unitary(4, &mut rng)), vec![0, 1])
                    .unwrap();
        }
    }
    c
}

#[test]
fn criterion_1_bell_forging() {
    let start = Instant::now();
    let d = forge_bell();
    let rebuilt = d.reconstruct().unwrap();
    let z = z_factor(&d);
    let elapsed = start.elapsed();
    let err = max_abs_diff(rebuilt.matrix(), bell_density().matrix());
    report(
        1,
        "bell forging",
        err <= 1e-15 && z == 3.0,
        elapsed,
        Duration::from_millis(1),
        &format!("max entry error {err:.1e}, Z = {z}"),
    );
}

#[test]
fn criterion_2_identity_channel() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let rho = random_density(1, 1 + k % 2, &mut rng);
        let out = forged_identity(&rho).unwrap();
        worst = worst.max(max_abs_diff(out.matrix(), rho.matrix()));
    }
    report(
        2,
        "identity channel",
        worst <= 1e-12,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("worst entry error {worst:.1e} over 200 states"),
    );
}

#[test]
fn criterion_3_exact_wire_cut() {
    let start = Instant::now();
    let mut worst_one = 0.0f64;
    for seed in 0..20 {
        let c = haar_circuit(1, seed);
        let rho = ExactCut::run(&c, &CutPlan::alice_side(&c))
            .unwrap()
            .state()
            .unwrap();
        worst_one = worst_one.max(trace_distance(&rho, &c.simulate_full_density()));
    }
    let mut worst_two = 0.0f64;
    for seed in 100..103 {
        let c = haar_circuit(2, seed);
        let cut = ExactCut::run(&c, &CutPlan::alice_side(&c)).unwrap();
        assert_eq!(cut.alice.cuts, 2);
        let rho = cut.state().unwrap();
        worst_two = worst_two.max(trace_distance(&rho, &c.simulate_full_density()));
    }
    // distinct (measured axis, prepared axis) assignments entering the sum
    let axes = |k: usize| -> Vec<(PauliAxis, PauliAxis)> {
        CutLabel::tuple_from_index(k, 2)
            .iter()
            .map(|l| (l.measured.axis, l.prepared.axis))
            .collect()
    };
    let pairs = paired_indices(2, &TransitionMatrix::new());
    let owner: BTreeSet<_> = pairs.iter().map(|&(o, _, _)| axes(o)).collect();
    let host: BTreeSet<_> = pairs.iter().map(|&(_, h, _)| axes(h)).collect();
    let pass = worst_one < 1e-10
        && worst_two < 1e-9
        && owner.len() == 81
        && host.len() == 81
        && overhead(2) == 81;
    report(
        3,
        "exact wire cut",
        pass,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "L=1 worst {worst_one:.1e}, L=2 worst {worst_two:.1e}, combinations {}/{}",
            owner.len(),
            host.len()
        ),
    );
}

#[test]
fn criterion_4_sampled_estimator() {
    let start = Instant::now();
    let c = bell_circuit();
    let obs = Observable::parse("ZZ").unwrap();
    let mut outside = 0;
    let mut all_nine = true;
    for seed in 0..30 {
        let run = run_sampled(&c, &obs, 100_000, seed).unwrap();
        all_nine &= run.records.iter().all(|r| r.contribution.abs() == 9.0);
        if (run.report.mean - 1.0).abs() > 5.0 * run.report.stderr {
            outside += 1;
        }
    }
    report(
        4,
        "sampled estimator",
        all_nine && outside <= 1,
        start.elapsed(),
        Duration::from_secs(120),
        &format!("all |contribution| = 9: {all_nine}, seeds outside 5 stderr: {outside}"),
    );
}

#[test]
fn criterion_5_gate_teleportation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gates = [
        UnitaryGate::cnot(0, 1).unwrap(),
        UnitaryGate::cz(0, 1).unwrap(),
        UnitaryGate::crz(std::f64::consts::FRAC_PI_3, 0, 1).unwrap(),
    ];
    let mut worst = 1.0f64;
    for gate in &gates {
        for _ in 0..10 {
            let a = random_pure_state(1, &mut rng);
            let b = random_pure_state(1, &mut rng);
            let out = gate_teleport(gate, &a, &b).unwrap();
            worst = worst.min(out.fidelity_plus).min(out.fidelity_minus);
        }
    }
    let swap = UnitaryGate::swap(0, 1).unwrap();
    let witness = is_teleportable(&swap, None, 1e-10).unwrap();
    let rejected = matches!(
        gate_teleport(&swap, &PureState::zero(1), &PureState::zero(1)),
        Err(Error::NotTeleportable { .. })
    );
    let pass = worst >= 1.0 - 1e-10
        && !witness.teleportable
        && witness.norm_x.max(witness.norm_y) > 0.0
        && rejected;
    report(
        5,
        "gate teleportation",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "worst branch fidelity {worst:.12}, swap witness ({:.3}, {:.3})",
            witness.norm_x, witness.norm_y
        ),
    );
}

#[test]
fn criterion_6_forged_teleportation_is_tomography() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = forge_bell();
    let (mut worst_fid, mut worst_bloch) = (1.0f64, 0.0f64);
    for k in 0..50 {
        let rho = random_density(1, 1 + k % 2, &mut rng);
        let out = forged_teleportation(&rho, &d, BellOutcome::ALL[0]).unwrap();
        worst_fid = worst_fid.min(fidelity(&out, &rho));
        let bloch = qst_equivalence(&rho).unwrap().bloch;
        for (axis, got) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(bloch) {
            let direct = rho.pauli_expectation(&[(0, axis)]).unwrap();
            worst_bloch = worst_bloch.max((direct - got).abs());
        }
    }
    report(
        6,
        "forged teleportation = QST",
        worst_fid >= 1.0 - 1e-10 && worst_bloch <= 1e-10,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("worst fidelity {worst_fid:.12}, worst Bloch error {worst_bloch:.1e}"),
    );
}

#[test]
fn criterion_7_readout_mitigation() {
    let start = Instant::now();
    let c = bell_circuit();
    let plan = CutPlan::alice_side(&c);
    let obs = Observable::parse("ZZ").unwrap();
    let exact = mitigate_cut_exact(&c, &plan, &obs, 0.05).unwrap();
    let sampled = mitigate_cut_sampled(&c, &plan, &obs, 0.05, 1_000_000, 7).unwrap();
    let sigma = sampled.sigma.unwrap_or(f64::NAN);
    let pass = (exact.mitigated - exact.ideal).abs() <= 1e-10
        && (exact.noisy - exact.ideal).abs() > 0.01
        && (sampled.mitigated - sampled.ideal).abs() <= 5.0 * sigma;
    report(
        7,
        "readout mitigation",
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "ideal {:.6}, noisy {:.6}, mitigated {:.3e} off, sampled {:.5} ± {:.5}",
            exact.ideal,
            exact.noisy,
            (exact.mitigated - exact.ideal).abs(),
            sampled.mitigated,
            sigma
        ),
    );
}

fn distributed_state<A: Transport, B: Transport>(
    a: A,
    b: B,
    c: &PartitionedCircuit,
    seed: u64,
) -> (DensityOperator, Transcript) {
    let mut coord = Coordinator::new(a, b, seed);
    let rho = coord.state(c, &CutPlan::alice_side(c), seed).unwrap();
    (rho, coord.transcript().unwrap())
}

#[test]
fn criterion_8_distributed_run() {
    let start = Instant::now();
    let mut circuits: Vec<(u64, PartitionedCircuit)> =
        (0..20).map(|s| (s, haar_circuit(1, s))).collect();
    circuits.push((100, haar_circuit(2, 100)));
    let (mut worst, mut transcripts, mut identical) = (0.0f64, 0, true);
    let mut audits_pass = true;
    for (seed, c) in &circuits {
        let oracle = ExactCut::run(c, &CutPlan::alice_side(c))
            .unwrap()
            .state()
            .unwrap();
        let full = c.simulate_full_density();

        let (a, b, threads) = spawn_loopback(
            WorkerConfig::new(Party::Alice),
            WorkerConfig::new(Party::Bob),
        );
        let (lo, lo_t) = distributed_state(a, b, c, *seed);
        assert!(threads.join().iter().all(|r| r.is_ok()));

        let (aa, ab, threads) = spawn_tcp(
            WorkerConfig::new(Party::Alice),
            WorkerConfig::new(Party::Bob),
        )
        .unwrap();
        let (tcp, tcp_t) = distributed_state(
            TcpTransport::connect(aa).unwrap(),
            TcpTransport::connect(ab).unwrap(),
            c,
            *seed,
        );
        assert!(threads.join().iter().all(|r| r.is_ok()));

        for rho in [&lo, &tcp] {
            worst = worst
                .max(max_abs_diff(rho.matrix(), oracle.matrix()))
                .max(trace_distance(rho, &full));
        }
        for t in [&lo_t, &tcp_t] {
            audits_pass &= audit(t).passed();
            identical &= replay(t).unwrap().identical;
            transcripts += 1;
        }
    }
    report(
        8,
        "distributed LOCC run",
        worst <= 1e-10 && identical && audits_pass,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("worst deviation {worst:.1e}, {transcripts} transcripts audited and replayed"),
    );
}

#[test]
fn criterion_9_schmidt_pseudomixture() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t: f64 = rng.random_range(0.05..std::f64::consts::FRAC_PI_4);
        let form = SchmidtForm::new(
            vec![t.cos(), t.sin()],
            haar_unitary(2, &mut rng),
            haar_unitary(2, &mut rng),
        )
        .unwrap();
        let d = forge_schmidt(&form);
        let err = max_abs_diff(
            d.reconstruct().unwrap().matrix(),
            form.state().to_density().matrix(),
        );
        worst = worst.max(err);
    }
    let mut product_z = true;
    for _ in 0..5 {
        let form = SchmidtForm::new(
            vec![1.0],
            haar_unitary(2, &mut rng),
            haar_unitary(2, &mut rng),
        )
        .unwrap();
        product_z &= z_factor(&forge_schmidt(&form)) == 1.0;
    }
    report(
        9,
        "Schmidt pseudomixture",
        worst <= 1e-12 && product_z,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("worst entry error {worst:.1e}, product Z = 1: {product_z}"),
    );
}
