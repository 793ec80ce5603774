//! Signed Monte Carlo estimation on cut circuits.
//!
//! Each shot draws a measurement axis per cut for the owner and for the host
//! (uniformly, weight 3 each), lets each party sample its own outcomes by the
//! Born rule, forwards the classical outcome so the partner prepares the
//! paired eigenstate, and finally measures the payload observable. The shot
//! contributes `9^L · ε_α ε_μ · o`.

mod rng;
mod trajectory;

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{split_local, CutPlan, Observable, PartitionedCircuit, Party};
use crate::error::{Error, Result};
use crate::qsim::{BasisLabel, Pauli, PauliAxis};
use crate::wirecut::TransitionMatrix;

pub use rng::{shot_rng, StreamRole};
pub use trajectory::{LocalRun, SlotKind};

/// `9^L`.
pub fn overhead(gates: u32) -> u64 {
    9u64.pow(gates)
}

/// One party as seen by the shot protocol: it can run its measure- and
/// prepare-slots and report the payload measurement. Implemented by
/// in-process runs and by remote workers.
pub trait ShotEndpoint {
    fn measure(&mut self, cut: usize, axis: PauliAxis) -> Result<u8>;
    fn prepare(&mut self, cut: usize, label: BasisLabel) -> Result<()>;
    fn payload(&mut self, factors: &[(usize, Pauli)]) -> Result<(u64, f64)>;
}

impl ShotEndpoint for LocalRun<'_> {
    fn measure(&mut self, cut: usize, axis: PauliAxis) -> Result<u8> {
        LocalRun::measure(self, cut, axis)
    }

    fn prepare(&mut self, cut: usize, label: BasisLabel) -> Result<()> {
        LocalRun::prepare(self, cut, label)
    }

    fn payload(&mut self, factors: &[(usize, Pauli)]) -> Result<(u64, f64)> {
        LocalRun::payload(self, factors)
    }
}

/// A single Pauli product split between the parties, with its coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct PayloadSpec {
    pub coefficient: f64,
    pub alice: Vec<(usize, Pauli)>,
    pub bob: Vec<(usize, Pauli)>,
}

impl PayloadSpec {
    pub fn from_observable(observable: &Observable, alice_qubits: usize) -> Result<PayloadSpec> {
        match observable.terms.as_slice() {
            [(coefficient, pauli)] => {
                let (alice, bob) = pauli.split(alice_qubits);
                Ok(PayloadSpec {
                    coefficient: *coefficient,
                    alice,
                    bob,
                })
            }
            _ => Err(Error::NonProductObservable(observable.to_string())),
        }
    }

    /// `‖O‖_∞` of the product.
    pub fn norm(&self) -> f64 {
        self.coefficient.abs()
    }
}

/// Labels exchanged at one cut during a shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutRecord {
    /// Owner's measurement: `(i, α)`.
    pub owner_measured: BasisLabel,
    /// Host's paired preparation: `(j, β)`.
    pub host_prepared: BasisLabel,
    /// Host's measurement: `(k, μ)`.
    pub host_measured: BasisLabel,
    /// Owner's paired preparation: `(l, ν)`.
    pub owner_prepared: BasisLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub cuts: Vec<CutRecord>,
    pub sign: i8,
    /// Product of the two payload eigenvalues (without the coefficient).
    pub eigenvalue: f64,
    pub contribution: f64,
}

/// Runs one shot of the protocol between two endpoints. The coordinator
/// stream supplies the axes; all outcome randomness lives in the endpoints.
pub fn drive_shot<A: ShotEndpoint, B: ShotEndpoint>(
    alice: &mut A,
    bob: &mut B,
    owner: Party,
    cuts: usize,
    coordinator: &mut ChaCha8Rng,
    payload: &PayloadSpec,
    m: &TransitionMatrix,
) -> Result<ShotRecord> {
    let mut records = Vec::with_capacity(cuts);
    let mut sign = 1i8;
    for cut in 0..cuts {
        let alpha = PauliAxis::from_index(coordinator.random_range(0..3));
        let mu = PauliAxis::from_index(coordinator.random_range(0..3));
        let (own, host): (&mut dyn ShotEndpoint, &mut dyn ShotEndpoint) = match owner {
            Party::Alice => (&mut *alice, &mut *bob),
            Party::Bob => (&mut *bob, &mut *alice),
        };
        let i = own.measure(cut, alpha)?;
        let owner_measured = BasisLabel::new(i, alpha);
        let (host_prepared, s1) = m.paired_preparation(owner_measured);
        host.prepare(cut, host_prepared)?;
        let k = host.measure(cut, mu)?;
        let host_measured = BasisLabel::new(k, mu);
        let (owner_prepared, s2) = m.paired_preparation(host_measured);
        own.prepare(cut, owner_prepared)?;
        sign *= s1 * s2;
        records.push(CutRecord {
            owner_measured,
            host_prepared,
            host_measured,
            owner_prepared,
        });
    }
    let (_, oa) = alice.payload(&payload.alice)?;
    let (_, ob) = bob.payload(&payload.bob)?;
    let eigenvalue = oa * ob;
    let contribution =
        overhead(cuts as u32) as f64 * f64::from(sign) * payload.coefficient * eigenvalue;
    Ok(ShotRecord {
        cuts: records,
        sign,
        eigenvalue,
        contribution,
    })
}

/// Result of a sampled run. Wall time is reported but not serialized, so the
/// serialized form is identical across repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
    pub overhead: u64,
    pub seed: u64,
    pub circuit_hash: String,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EstimatorReport {
    /// Builds a report from per-shot contributions in shot order.
    pub fn from_contributions(
        contributions: &[f64],
        overhead: u64,
        seed: u64,
        circuit_hash: String,
        wall_seconds: f64,
    ) -> EstimatorReport {
        let n = contributions.len();
        let mean = pairwise_sum(contributions) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = contributions
                .iter()
                .map(|c| (c - mean) * (c - mean))
                .collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        EstimatorReport {
            mean,
            stderr,
            shots: n as u64,
            overhead,
            seed,
            circuit_hash,
            wall_seconds,
        }
    }
}

/// Pairwise summation with a fixed split, independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[derive(Clone, Debug)]
pub struct SampledRun {
    pub report: EstimatorReport,
    pub records: Vec<ShotRecord>,
}

/// Samples `⟨O⟩` with the default plan (Alice-side cuts, fresh ancillas).
pub fn run_sampled(
    circuit: &PartitionedCircuit,
    observable: &Observable,
    shots: u64,
    seed: u64,
) -> Result<SampledRun> {
    run_sampled_with(
        circuit,
        &CutPlan::alice_side(circuit),
        observable,
        shots,
        seed,
    )
}

pub fn run_sampled_with(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
    observable: &Observable,
    shots: u64,
    seed: u64,
) -> Result<SampledRun> {
    if shots == 0 {
        return Err(Error::Shots { min: 1, got: 0 });
    }
    observable.check_width(circuit.num_qubits())?;
    let payload = PayloadSpec::from_observable(observable, circuit.alice_qubits)?;
    let (alice, bob) = split_local(circuit, plan)?;
    let m = TransitionMatrix::new();
    let cuts = plan.num_cuts();
    let start = Instant::now();
    let records = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut a = LocalRun::new(&alice, shot_rng(seed, shot, StreamRole::Alice));
            let mut b = LocalRun::new(&bob, shot_rng(seed, shot, StreamRole::Bob));
            let mut coord = shot_rng(seed, shot, StreamRole::Coordinator);
            drive_shot(&mut a, &mut b, plan.owner, cuts, &mut coord, &payload, &m)
        })
        .collect::<Result<Vec<_>>>()?;
    let contributions: Vec<f64> = records.iter().map(|r| r.contribution).collect();
    let report = EstimatorReport::from_contributions(
        &contributions,
        overhead(cuts as u32),
        seed,
        circuit.content_hash(),
        start.elapsed().as_secs_f64(),
    );
    Ok(SampledRun { report, records })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub shots: usize,
    pub mean: f64,
    /// Unbiased sample variance of the contributions.
    pub variance: f64,
    pub max_abs_contribution: f64,
    /// `9^L · ‖O‖_∞`.
    pub bound: f64,
    /// Records whose contribution exceeds the bound.
    pub violations: usize,
}

pub fn variance_report(
    records: &[ShotRecord],
    cuts: usize,
    observable_norm: f64,
) -> Result<VarianceReport> {
    if records.len() < 2 {
        return Err(Error::Shots {
            min: 2,
            got: records.len() as u64,
        });
    }
    let values: Vec<f64> = records.iter().map(|r| r.contribution).collect();
    let n = values.len();
    let mean = pairwise_sum(&values) / n as f64;
    let dev: Vec<f64> = values.iter().map(|c| (c - mean) * (c - mean)).collect();
    let variance = pairwise_sum(&dev) / (n - 1) as f64;
    let bound = overhead(cuts as u32) as f64 * observable_norm;
    let max_abs_contribution = values.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let violations = values.iter().filter(|c| c.abs() > bound).count();
    Ok(VarianceReport {
        shots: n,
        mean,
        variance,
        max_abs_contribution,
        bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate::random_circuit, parse_circuit, AuxPolicy, Substitution};
    use crate::wirecut::ExactCut;

    const BELL: &str = include_str!("../../../../circuits/bell.json");

    #[test]
    fn overhead_values() {
        assert_eq!(overhead(0), 1);
        assert_eq!(overhead(1), 9);
        assert_eq!(overhead(2), 81);
    }

    #[test]
    fn bell_zz_contributions_are_nine() {
        let circuit = parse_circuit(BELL).unwrap();
        let run = run_sampled(&circuit, &Observable::parse("ZZ").unwrap(), 20_000, 7).unwrap();
        assert!(run.records.iter().all(|r| r.contribution.abs() == 9.0));
        assert!((run.report.mean - 1.0).abs() < 5.0 * run.report.stderr);
        let v = variance_report(&run.records, 1, 1.0).unwrap();
        assert_eq!(v.violations, 0);
        // two-valued ±9 stream: variance is 81 − mean² rescaled to n − 1
        let n = v.shots as f64;
        assert!((v.variance - (81.0 - v.mean * v.mean) * n / (n - 1.0)).abs() < 1e-9);
        // exact Bernoulli mixture with E = 1 gives variance 80
        assert!((v.variance - 80.0).abs() < 3.0);
    }

    #[test]
    fn pairing_rule_holds_in_every_record() {
        let circuit = random_circuit(2, 2, 2, 3).unwrap();
        let run = run_sampled(&circuit, &Observable::parse("Z0 X3").unwrap(), 2_000, 1).unwrap();
        for r in &run.records {
            for c in &r.cuts {
                assert_eq!(c.host_prepared.axis, c.owner_measured.axis);
                assert_eq!(
                    c.host_prepared.bit == c.owner_measured.bit,
                    c.owner_measured.axis != PauliAxis::Y
                );
                assert_eq!(c.owner_prepared.axis, c.host_measured.axis);
                assert_eq!(
                    c.owner_prepared.bit == c.host_measured.bit,
                    c.host_measured.axis != PauliAxis::Y
                );
            }
            assert_eq!(r.contribution.abs(), 81.0);
        }
    }

    #[test]
    fn identity_observable_normalizes() {
        let circuit = random_circuit(1, 1, 1, 2).unwrap();
        let run = run_sampled(&circuit, &Observable::parse("I").unwrap(), 20_000, 3).unwrap();
        assert!(run
            .records
            .iter()
            .all(|r| r.contribution == 9.0 * f64::from(r.sign)));
        assert!((run.report.mean - 1.0).abs() < 5.0 * run.report.stderr);
    }

    #[test]
    fn deterministic_reports() {
        let circuit = parse_circuit(BELL).unwrap();
        let obs = Observable::parse("XX").unwrap();
        let a = run_sampled(&circuit, &obs, 3_000, 11).unwrap().report;
        let b = run_sampled(&circuit, &obs, 3_000, 11).unwrap().report;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn agrees_with_exact_on_random_circuits() {
        for seed in 0..3 {
            let circuit = random_circuit(2, 1, 1, seed).unwrap();
            let obs = Observable::parse("Z0 Z2").unwrap();
            for (aux, sub) in [
                (AuxPolicy::Fresh, Substitution::Relabel),
                (AuxPolicy::ReuseAfterReset, Substitution::SwapConjugate),
            ] {
                let plan = CutPlan::for_circuit(&circuit, Party::Alice, aux, sub);
                let exact = ExactCut::run(&circuit, &plan)
                    .unwrap()
                    .expectation(&obs)
                    .unwrap();
                let run = run_sampled_with(&circuit, &plan, &obs, 40_000, seed).unwrap();
                assert!(
                    (run.report.mean - exact).abs() < 5.0 * run.report.stderr,
                    "seed {seed}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let circuit = parse_circuit(BELL).unwrap();
        assert!(matches!(
            run_sampled(&circuit, &Observable::parse("ZZ").unwrap(), 0, 1),
            Err(Error::Shots { .. })
        ));
        assert!(matches!(
            run_sampled(&circuit, &Observable::parse("ZZ + XX").unwrap(), 10, 1),
            Err(Error::NonProductObservable(_))
        ));
        let run = run_sampled(&circuit, &Observable::parse("ZZ").unwrap(), 1, 1).unwrap();
        assert!(variance_report(&run.records, 1, 1.0).is_err());
    }
}
