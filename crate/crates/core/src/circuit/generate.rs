//! Seeded random two-party circuits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InitialState, Layer, LocalLayer, NonlocalGate, PartitionedCircuit, Party};
use crate::error::Result;
use crate::qsim::random::haar_unitary;
use crate::qsim::{BasisLabel, UnitaryGate};

fn local_layer(party: Party, size: usize, rng: &mut ChaCha8Rng) -> Result<Layer> {
    let mut gates = Vec::new();
    for q in 0..size {
        gates.push(UnitaryGate::named(
            "u",
            &[],
            Some(haar_unitary(2, rng)),
            vec![q],
        )?);
    }
    if size >= 2 && rng.random_bool(0.5) {
        let a = rng.random_range(0..size);
        let b = (a + rng.random_range(1..size)) % size;
        gates.push(UnitaryGate::cnot(a, b)?);
    }
    Ok(Layer::Local(LocalLayer { party, gates }))
}

fn nonlocal_gate(alice: usize, bob: usize, rng: &mut ChaCha8Rng) -> Result<NonlocalGate> {
    let gate = match rng.random_range(0..4) {
        0 => UnitaryGate::cnot(0, 1)?,
        1 => UnitaryGate::cz(0, 1)?,
        2 => UnitaryGate::crz(rng.random_range(-3.0..3.0), 0, 1)?,
        _ => UnitaryGate::named("unitary", &[], Some(haar_unitary(4, rng)), vec![0, 1])?,
    };
    Ok(NonlocalGate {
        gate,
        alice_target: rng.random_range(0..alice),
        bob_target: rng.random_range(0..bob),
    })
}

/// Circuit with `alice` + `bob` qubits and `gates` nonlocal two-qubit gates,
/// each surrounded by Haar-random local layers. Same seed, same circuit.
pub fn random_circuit(
    alice: usize,
    bob: usize,
    gates: usize,
    seed: u64,
) -> Result<PartitionedCircuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial = InitialState::zeros(alice, bob);
    for label in initial.alice.iter_mut().chain(initial.bob.iter_mut()) {
        *label = BasisLabel::from_index(rng.random_range(0..6));
    }
    let mut layers = Vec::new();
    for _ in 0..gates {
        layers.push(local_layer(Party::Alice, alice, &mut rng)?);
        layers.push(local_layer(Party::Bob, bob, &mut rng)?);
        layers.push(Layer::Nonlocal(nonlocal_gate(alice, bob, &mut rng)?));
    }
    layers.push(local_layer(Party::Alice, alice, &mut rng)?);
    layers.push(local_layer(Party::Bob, bob, &mut rng)?);
    PartitionedCircuit::new(alice, bob, layers, initial)
}
