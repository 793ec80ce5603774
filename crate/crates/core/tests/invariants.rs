use std::collections::HashSet;

use forgecut::circuit::generate::random_circuit;
use forgecut::circuit::{parse_circuit, CutLabel, CutPlan, Observable, Party};
use forgecut::distrib::message::{decode_branch, encode_branch};
use forgecut::forging::{forge_schmidt, z_factor, SchmidtForm};
use forgecut::qsim::random::{haar_unitary, random_density};
use forgecut::qsim::{
    max_abs_diff, trace_distance, DensityOperator, Pauli, PureState, UnitaryGate,
};
use forgecut::sampler::{run_sampled, shot_rng, StreamRole};
use forgecut::teleport::{
    conditional_prob, forged_teleportation_summed, qst_equivalence, BellOutcome,
};
use forgecut::wirecut::{forged_identity, paired_indices, ExactCut, TransitionMatrix};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bloch_ball() -> impl Strategy<Value = [f64; 3]> {
    (
        0.0f64..=1.0,
        0.0f64..std::f64::consts::PI,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(r, t, p)| [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()])
}

fn bell_circuit() -> forgecut::circuit::PartitionedCircuit {
    parse_circuit(include_str!("../../../circuits/bell.json")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_evolution_keeps_a_valid_state(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = random_density(3, 2, &mut rng);
        let gate = UnitaryGate::new("u", vec![], haar_unitary(4, &mut rng), vec![2, 0]).unwrap();
        rho.apply(&gate).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_error() < 1e-12);
        let reduced = rho.partial_trace(&[1]).unwrap();
        prop_assert!((reduced.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_is_a_bounded_symmetric_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_density(2, 1, &mut rng);
        let b = random_density(2, 3, &mut rng);
        let (ab, ba) = (trace_distance(&a, &b), trace_distance(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!(trace_distance(&a, &a) < 1e-7);
    }

    #[test]
    fn forged_identity_is_the_identity(r in bloch_ball()) {
        let rho = DensityOperator::from_bloch(r).unwrap();
        let out = forged_identity(&rho).unwrap();
        prop_assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn schmidt_pseudomixture_reconstructs(
        weights in prop::collection::vec(0.05f64..1.0, 1..=4),
        seed in any::<u64>(),
    ) {
        let norm: f64 = weights.iter().sum();
        let mut lambda: Vec<f64> = weights.iter().map(|w| (w / norm).sqrt()).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = if lambda.len() <= 2 { 2 } else { 4 };
        let form = SchmidtForm::new(
            lambda.clone(),
            haar_unitary(dim, &mut rng),
            haar_unitary(dim, &mut rng),
        )
        .unwrap();
        let d = forge_schmidt(&form);
        let target = form.state().to_density();
        prop_assert!(max_abs_diff(d.reconstruct().unwrap().matrix(), target.matrix()) < 1e-12);
        // Σλ_i² + 4Σ_{i<j}λ_iλ_j = 2(Σλ_i)² − 1
        let s: f64 = lambda.iter().sum();
        prop_assert!((z_factor(&d) - (2.0 * s * s - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bell_outcomes_are_a_distribution(ra in bloch_ball(), rc in bloch_ball()) {
        let rho_a = DensityOperator::from_bloch(ra).unwrap();
        let rho_c = DensityOperator::from_bloch(rc).unwrap();
        let total: f64 = BellOutcome::ALL
            .iter()
            .map(|&s| conditional_prob(&rho_c, &rho_a, s).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for s in BellOutcome::ALL {
            prop_assert!(conditional_prob(&rho_c, &rho_a, s).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn forged_teleportation_and_tomography_recover_the_input(r in bloch_ball()) {
        let rho = DensityOperator::from_bloch(r).unwrap();
        let d = forgecut::forging::forge_bell();
        let out = forged_teleportation_summed(&rho, &d).unwrap();
        prop_assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-12);
        let bloch = qst_equivalence(&rho).unwrap().bloch;
        for k in 0..3 {
            prop_assert!((bloch[k] - r[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_labels_roundtrip(indices in prop::collection::vec(0usize..36, 0..4)) {
        let labels: Vec<CutLabel> = indices.iter().map(|&k| CutLabel::from_index(k)).collect();
        prop_assert_eq!(decode_branch(&encode_branch(&labels)).unwrap(), labels.clone());
        prop_assert_eq!(
            CutLabel::tuple_from_index(CutLabel::tuple_index(&labels), labels.len()),
            labels
        );
    }

    #[test]
    fn shot_streams_are_distinct_and_reproducible(seed in any::<u64>(), shot in 0u64..1 << 40) {
        let draw = |shot, role| shot_rng(seed, shot, role).next_u64();
        let values: HashSet<u64> = [
            draw(shot, StreamRole::Coordinator),
            draw(shot, StreamRole::Alice),
            draw(shot, StreamRole::Bob),
            draw(shot + 1, StreamRole::Coordinator),
        ]
        .into_iter()
        .collect();
        prop_assert_eq!(values.len(), 4);
        prop_assert_eq!(draw(shot, StreamRole::Alice), draw(shot, StreamRole::Alice));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_cut_matches_full_simulation(
        seed in any::<u64>(),
        alice in 1usize..=2,
        bob in 1usize..=2,
        owner_bob in any::<bool>(),
    ) {
        let c = random_circuit(alice, bob, 1, seed).unwrap();
        let owner = if owner_bob { Party::Bob } else { Party::Alice };
        let plan = CutPlan::for_circuit(
            &c,
            owner,
            forgecut::circuit::AuxPolicy::Fresh,
            forgecut::circuit::Substitution::Relabel,
        );
        let rho = ExactCut::run(&c, &plan).unwrap().state().unwrap();
        prop_assert!(trace_distance(&rho, &c.simulate_full_density()) < 1e-10);
    }

    #[test]
    fn circuit_documents_roundtrip(seed in any::<u64>(), gates in 0usize..3) {
        let c = random_circuit(2, 1, gates, seed).unwrap();
        let back = parse_circuit(&c.to_json()).unwrap();
        prop_assert_eq!(back.content_hash(), c.content_hash());
        let (a, b) = (c.simulate_full(), back.simulate_full());
        prop_assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_contributions_have_fixed_magnitude(seed in any::<u64>()) {
        let c = bell_circuit();
        let run = run_sampled(&c, &Observable::parse("ZZ").unwrap(), 500, seed).unwrap();
        prop_assert!(run.records.iter().all(|r| r.contribution.abs() == 9.0));
        let again = run_sampled(&c, &Observable::parse("ZZ").unwrap(), 500, seed).unwrap();
        prop_assert_eq!(run.report.mean.to_bits(), again.report.mean.to_bits());
    }
}

#[test]
fn transition_pairs_form_a_bijection() {
    for cuts in 1..=2 {
        let pairs = paired_indices(cuts, &TransitionMatrix::new());
        let total = 36usize.pow(cuts as u32);
        assert_eq!(pairs.len(), total);
        let hosts: HashSet<usize> = pairs.iter().map(|&(_, h, _)| h).collect();
        assert_eq!(hosts.len(), total);
        assert!(pairs.iter().all(|&(_, _, s)| s == 1 || s == -1));
    }
}

#[test]
fn product_state_payload_expectation() {
    let psi = PureState::product(&[
        forgecut::qsim::BasisLabel::new(0, forgecut::qsim::PauliAxis::X),
        forgecut::qsim::BasisLabel::new(1, forgecut::qsim::PauliAxis::Z),
    ]);
    let rho = psi.to_density();
    let v = rho
        .pauli_expectation(&[(0, Pauli::X), (1, Pauli::Z)])
        .unwrap();
    assert!((v + 1.0).abs() < 1e-15);
}
