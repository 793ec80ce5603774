use std::io::Write;
use std::net::TcpListener;

use forgecut::circuit::generate::random_circuit;
use forgecut::circuit::{parse_circuit, CutPlan, Observable, PartitionedCircuit, Party};
use forgecut::distrib::{
    self, serve_tcp, spawn_loopback, Coordinator, TcpTransport, Transcript, Transport, WorkerConfig,
};
use forgecut::forging::{forge_bell, forge_schmidt, z_factor, QuasiDecomposition, SchmidtForm};
use forgecut::mitigation::{mitigate_cut_exact, mitigate_cut_sampled};
use forgecut::qsim::random::{haar_unitary, random_pure_state};
use forgecut::qsim::{fidelity, trace_distance, DensityOperator, Pauli, UnitaryGate};
use forgecut::sampler::run_sampled_with;
use forgecut::teleport::{
    forged_teleportation, gate_teleport_unchecked, is_teleportable, pauli_expand, qst_equivalence,
    BellOutcome,
};
use forgecut::wirecut::ExactCut;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::output::{fmt, read_circuit, write_json, Failure};
use crate::{
    CoordinateArgs, CutArgs, CutMode, GateArgs, GenerateArgs, MitigateArgs, MitigationMode, Owner,
    ServeArgs, SessionKind, TeleportArgs, TranscriptArgs, TransportKind, VerifyForgingArgs,
};

const BELL: &str = include_str!("../../../circuits/bell.json");

fn party(o: Owner) -> Party {
    match o {
        Owner::Alice => Party::Alice,
        Owner::Bob => Party::Bob,
    }
}

fn observable(spec: &str) -> Result<Observable, Failure> {
    Observable::parse(spec).map_err(|e| Failure::input(e.to_string()))
}

struct Check {
    name: String,
    value: f64,
    pass: bool,
}

fn residual_check(name: String, d: &QuasiDecomposition, tol: f64) -> Result<Check, Failure> {
    let value = d.residual()?;
    Ok(Check {
        name,
        value,
        pass: value <= tol,
    })
}

pub fn verify_forging(a: &VerifyForgingArgs) -> Result<(), Failure> {
    let mut checks = Vec::new();

    let mut bell = forge_bell();
    if a.corrupt {
        bell.terms[0].coefficient *= 1.0 + 1e-3;
    }
    checks.push(residual_check("bell reconstruction".into(), &bell, 1e-15)?);
    let z = z_factor(&bell);
    checks.push(Check {
        name: "bell Z = 3".into(),
        value: z,
        pass: z == 3.0,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(a.run.seed);
    for k in 0..10 {
        let u: f64 = rand_unit(&mut rng);
        let lambda = vec![(0.5 + 0.5 * u).sqrt(), (0.5 - 0.5 * u).sqrt()];
        let form = SchmidtForm::new(lambda, haar_unitary(2, &mut rng), haar_unitary(2, &mut rng))?;
        checks.push(residual_check(
            format!("random schmidt {k}"),
            &forge_schmidt(&form),
            1e-12,
        )?);
    }
    let product = SchmidtForm::new(
        vec![1.0],
        haar_unitary(2, &mut rng),
        haar_unitary(2, &mut rng),
    )?;
    let zp = z_factor(&forge_schmidt(&product));
    checks.push(Check {
        name: "product Z = 1".into(),
        value: zp,
        pass: zp == 1.0,
    });

    if let Some(weights) = &a.schmidt {
        let mut lambda: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Failure::input("schmidt weights must be positive"));
        }
        lambda.sort_by(|x, y| y.total_cmp(x));
        let dim = if lambda.len() <= 2 { 2 } else { 4 };
        let id = forgecut::qsim::CMatrix::identity(dim, dim);
        let form = SchmidtForm::new(lambda, id.clone(), id)?;
        checks.push(residual_check(
            "requested schmidt".into(),
            &forge_schmidt(&form),
            1e-12,
        )?);
    }

    for c in &checks {
        println!(
            "{} {:<22} {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    println!("{}", if failed.is_empty() { "PASS" } else { "FAIL" });
    write_json(
        a.run.out.as_deref(),
        &json!({
            "command": "verify-forging",
            "passed": failed.is_empty(),
            "checks": checks.iter().map(|c| json!({
                "name": c.name, "value": c.value, "pass": c.pass
            })).collect::<Vec<_>>(),
        }),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::verify(format!(
            "failing checks: {}",
            failed.join(", ")
        )))
    }
}

fn rand_unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand_chacha::rand_core::RngCore;
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn cut(a: &CutArgs) -> Result<(), Failure> {
    let circuit = read_circuit(&a.circuit)?;
    let obs = observable(&a.observable)?;
    obs.check_width(circuit.num_qubits())?;
    let plan = CutPlan::for_circuit(
        &circuit,
        party(a.owner),
        forgecut::circuit::AuxPolicy::Fresh,
        forgecut::circuit::Substitution::Relabel,
    );
    let oracle = if a.oracle {
        Some(obs.expectation(&circuit.simulate_full_density())?)
    } else {
        None
    };
    match a.mode {
        CutMode::Exact => {
            let value = ExactCut::run(&circuit, &plan)?.expectation(&obs)?;
            println!("expectation {}", fmt(value));
            let mut doc = json!({"mode": "exact", "observable": a.observable, "value": value});
            let diff = oracle.map(|o| (value - o).abs());
            if let (Some(o), Some(d)) = (oracle, diff) {
                println!("oracle      {}", fmt(o));
                println!("difference  {d:.3e}");
                doc["oracle"] = json!(o);
                doc["difference"] = json!(d);
            }
            write_json(a.run.out.as_deref(), &doc)?;
            match diff {
                Some(d) if d > 1e-10 => Err(Failure::verify(format!(
                    "cut value differs from oracle by {d:.3e}"
                ))),
                _ => Ok(()),
            }
        }
        CutMode::Sample => {
            let run = run_sampled_with(&circuit, &plan, &obs, a.shots, a.run.seed)?;
            let r = &run.report;
            println!("mean     {}", fmt(r.mean));
            println!("stderr   {}", fmt(r.stderr));
            println!("shots    {}", r.shots);
            println!("overhead {}", r.overhead);
            println!("seed     {}", r.seed);
            let mut doc = json!({"mode": "sample", "observable": a.observable, "report": r});
            let mut outside = false;
            if let Some(o) = oracle {
                let z = (r.mean - o).abs() / r.stderr;
                println!("oracle   {}", fmt(o));
                println!("z-score  {z:.3}");
                doc["oracle"] = json!(o);
                doc["z_score"] = json!(z);
                outside = z.is_nan() || z > 5.0;
            }
            write_json(a.run.out.as_deref(), &doc)?;
            if outside {
                Err(Failure::verify("sampled mean outside 5 standard errors"))
            } else {
                Ok(())
            }
        }
    }
}

pub fn teleport_demo(a: &TeleportArgs) -> Result<(), Failure> {
    if !(a.theta.is_finite() && a.phi.is_finite() && (0.0..=1.0).contains(&a.radius)) {
        return Err(Failure::input(
            "state needs finite angles and a radius in [0, 1]",
        ));
    }
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let r = [a.radius * st * cp, a.radius * st * sp, a.radius * ct];
    let rho = DensityOperator::from_bloch(r)?;
    let out = forged_teleportation(&rho, &forge_bell(), BellOutcome::ALL[0])?;
    let f = fidelity(&out, &rho);
    let qst = qst_equivalence(&rho)?;
    println!("fidelity {}", fmt(f));
    for (label, p) in &qst.probabilities {
        println!("p(0|{label}) {}", fmt(*p));
    }
    println!(
        "bloch ({}, {}, {})",
        fmt(qst.bloch[0]),
        fmt(qst.bloch[1]),
        fmt(qst.bloch[2])
    );
    write_json(
        a.run.out.as_deref(),
        &json!({
            "command": "teleport-demo",
            "input_bloch": r,
            "fidelity": f,
            "probabilities": qst.probabilities.iter()
                .map(|(l, p)| json!({"label": l.to_string(), "p0": p}))
                .collect::<Vec<_>>(),
            "bloch": qst.bloch,
        }),
    )
}

pub fn gate_teleport_check(a: &GateArgs) -> Result<(), Failure> {
    let name = match a.gate.to_ascii_lowercase().as_str() {
        "controlled-rz" => "crz".to_owned(),
        other => other.to_owned(),
    };
    let gate = UnitaryGate::named(&name, &a.params, None, vec![0, 1])?;
    let e = pauli_expand(&gate.matrix)?;
    let norms: Vec<f64> = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
        .into_iter()
        .map(|p| e.block(p).norm())
        .collect();
    let w = is_teleportable(&gate, None, 1e-10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.run.seed);
    let psi_in = random_pure_state(1, &mut rng);
    let psi_t = random_pure_state(1, &mut rng);
    let out = gate_teleport_unchecked(&gate, &psi_in, &psi_t)?;
    println!(
        "block norms I {} X {} Y {} Z {}",
        fmt(norms[0]),
        fmt(norms[1]),
        fmt(norms[2]),
        fmt(norms[3])
    );
    println!("teleportable {}", if w.teleportable { "yes" } else { "no" });
    println!("fidelity + {}", fmt(out.fidelity_plus));
    println!("fidelity - {}", fmt(out.fidelity_minus));
    println!("mismatch {:.3e}", out.mismatch);
    write_json(
        a.run.out.as_deref(),
        &json!({
            "command": "gate-teleport-check",
            "gate": name,
            "params": a.params,
            "block_norms": {"I": norms[0], "X": norms[1], "Y": norms[2], "Z": norms[3]},
            "teleportable": w.teleportable,
            "fidelity_plus": out.fidelity_plus,
            "fidelity_minus": out.fidelity_minus,
            "mismatch": out.mismatch,
        }),
    )
}

pub fn serve(a: &ServeArgs) -> Result<(), Failure> {
    let listener = TcpListener::bind(&a.listen)
        .map_err(|e| Failure::transport(format!("bind {}: {e}", a.listen)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::transport(e.to_string()))?;
    println!("listening {addr}");
    std::io::stdout().flush().ok();
    let summary = serve_tcp(&listener, WorkerConfig::new(party(a.role)))
        .map_err(|e| Failure::transport(e.to_string()))?;
    println!(
        "served branches {} shots {} messages {}",
        summary.branches, summary.shots, summary.messages
    );
    Ok(())
}

struct SessionOutput {
    values: Value,
    transcript: Option<Transcript>,
    check: Option<(f64, f64)>,
}

fn run_session<A: Transport, B: Transport>(
    alice: A,
    bob: B,
    a: &CoordinateArgs,
    circuit: &PartitionedCircuit,
    obs: Option<&Observable>,
) -> Result<SessionOutput, Failure> {
    let plan = CutPlan::alice_side(circuit);
    let seed = a.run.seed;
    let mut coord = Coordinator::new(alice, bob, seed);
    let need_obs = || obs.ok_or_else(|| Failure::input("this mode needs --observable"));
    let result = match a.mode {
        SessionKind::Exact => {
            let obs = need_obs()?;
            coord.exact(circuit, &plan, obs, seed).map(|v| {
                println!("expectation {}", fmt(v));
                let oracle = a
                    .oracle
                    .then(|| obs.expectation(&circuit.simulate_full_density()));
                (json!({"value": v}), oracle.map(|o| o.map(|o| (v, o))))
            })
        }
        SessionKind::State => coord.state(circuit, &plan, seed).map(|rho| {
            let d = trace_distance(&rho, &circuit.simulate_full_density());
            println!("trace distance to full simulation {d:.3e}");
            (
                json!({"trace_distance": d}),
                a.oracle.then_some(Ok((d, 0.0))),
            )
        }),
        SessionKind::Sample => {
            let obs = need_obs()?;
            coord.sampled(circuit, &plan, obs, a.shots, seed).map(|s| {
                println!("mean   {}", fmt(s.report.mean));
                println!("stderr {}", fmt(s.report.stderr));
                (json!({"report": s.report}), None)
            })
        }
    };
    let transcript = coord.transcript();
    let (values, check) = result.map_err(|e| match e {
        forgecut::Error::Aborted(_) | forgecut::Error::Protocol(_) | forgecut::Error::Io(_) => {
            Failure::transport(e.to_string())
        }
        other => Failure::from(other),
    })?;
    let check = check.transpose()?;
    Ok(SessionOutput {
        values,
        transcript,
        check,
    })
}

pub fn coordinate(a: &CoordinateArgs) -> Result<(), Failure> {
    let circuit = read_circuit(&a.circuit)?;
    let obs = a.observable.as_deref().map(observable).transpose()?;
    if let Some(o) = &obs {
        o.check_width(circuit.num_qubits())?;
    }
    let out = match a.transport {
        TransportKind::Loopback => {
            let (alice, bob, threads) = spawn_loopback(
                WorkerConfig::new(Party::Alice),
                WorkerConfig::new(Party::Bob),
            );
            let out = run_session(alice, bob, a, &circuit, obs.as_ref());
            threads.join();
            out?
        }
        TransportKind::Tcp => {
            let [aa, ab] = a.connect.as_slice() else {
                return Err(Failure::input(
                    "tcp transport needs --connect ALICE --connect BOB",
                ));
            };
            let connect = |addr: &str| {
                TcpTransport::connect(addr)
                    .map_err(|e| Failure::transport(format!("connect {addr}: {e}")))
            };
            run_session(connect(aa)?, connect(ab)?, a, &circuit, obs.as_ref())?
        }
    };
    if let (Some(path), Some(t)) = (&a.transcript, &out.transcript) {
        t.write(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    let mut doc = json!({"command": "coordinate", "result": out.values});
    let mut failure = None;
    if let Some((got, want)) = out.check {
        let diff = (got - want).abs();
        println!("oracle difference {diff:.3e}");
        doc["oracle_difference"] = json!(diff);
        if diff > 1e-10 {
            failure = Some(Failure::verify(format!(
                "distributed result differs from oracle by {diff:.3e}"
            )));
        }
    }
    write_json(a.run.out.as_deref(), &doc)?;
    failure.map_or(Ok(()), Err)
}

fn read_transcript(a: &TranscriptArgs) -> Result<Transcript, Failure> {
    Transcript::read(&a.path).map_err(|e| Failure::input(format!("{}: {e}", a.path.display())))
}

pub fn audit(a: &TranscriptArgs) -> Result<(), Failure> {
    let report = distrib::audit(&read_transcript(a)?);
    println!("messages {}", report.messages);
    for (kind, n) in &report.by_type {
        println!("  {kind:<14} {n}");
    }
    println!("scalar bound {}", fmt(report.bound));
    for v in &report.violations {
        println!("violation: {v}");
    }
    println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    write_json(a.out.as_deref(), &json!(report))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::verify(format!(
            "{} audit violation(s)",
            report.violations.len()
        )))
    }
}

pub fn replay(a: &TranscriptArgs) -> Result<(), Failure> {
    let t = read_transcript(a)?;
    let outcome = distrib::replay(&t).map_err(|e| Failure::verify(e.to_string()))?;
    let values: Vec<String> = outcome.values.iter().map(|v| fmt(*v)).collect();
    println!("values [{}]", values.join(", "));
    println!(
        "{}",
        if outcome.identical {
            "identical"
        } else {
            "DIFFERENT"
        }
    );
    write_json(
        a.out.as_deref(),
        &json!({"values": outcome.values, "identical": outcome.identical}),
    )?;
    if outcome.identical {
        Ok(())
    } else {
        Err(Failure::verify(
            "replay did not reproduce the recorded result",
        ))
    }
}

pub fn mitigate_demo(a: &MitigateArgs) -> Result<(), Failure> {
    if !(0.0..0.5).contains(&a.epsilon) {
        return Err(Failure::input(format!(
            "epsilon {} outside [0, 0.5)",
            a.epsilon
        )));
    }
    let circuit = match &a.circuit {
        Some(p) => read_circuit(p)?,
        None => parse_circuit(BELL)?,
    };
    let obs = observable(&a.observable)?;
    obs.check_width(circuit.num_qubits())?;
    let plan = CutPlan::alice_side(&circuit);
    let out = match a.mode {
        MitigationMode::Exact => mitigate_cut_exact(&circuit, &plan, &obs, a.epsilon)?,
        MitigationMode::Sampled => {
            mitigate_cut_sampled(&circuit, &plan, &obs, a.epsilon, a.shots, a.run.seed)?
        }
    };
    println!("ideal     {}", fmt(out.ideal));
    println!(
        "noisy     {}  error {:.3e}",
        fmt(out.noisy),
        (out.noisy - out.ideal).abs()
    );
    println!(
        "mitigated {}  error {:.3e}",
        fmt(out.mitigated),
        (out.mitigated - out.ideal).abs()
    );
    if let Some(s) = out.sigma {
        println!("sigma     {}", fmt(s));
    }
    println!("condition {:.6} {:.6}", out.condition.0, out.condition.1);
    write_json(
        a.run.out.as_deref(),
        &json!({"command": "mitigate-demo", "epsilon": a.epsilon, "outcome": out}),
    )
}

pub fn generate(a: &GenerateArgs) -> Result<(), Failure> {
    if a.alice == 0 || a.bob == 0 {
        return Err(Failure::input("each party needs at least one qubit"));
    }
    let text = random_circuit(a.alice, a.bob, a.gates, a.seed)?.to_json() + "\n";
    match &a.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
