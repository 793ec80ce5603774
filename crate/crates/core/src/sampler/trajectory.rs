//! Shot-by-shot execution of one party's local program.

use rand_chacha::ChaCha8Rng;

use crate::circuit::{LocalProgram, Step};
use crate::error::{Error, Result};
use crate::qsim::{basis_change, BasisLabel, Pauli, PauliAxis, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Measure,
    Prepare,
}

/// A pure-state run of a [`LocalProgram`] that pauses at every cut slot and
/// waits for the coordinator to supply an axis or a label.
#[derive(Clone, Debug)]
pub struct LocalRun<'p> {
    program: &'p LocalProgram,
    state: PureState,
    /// Eigenstate each qubit is known to be in, if any.
    known: Vec<Option<BasisLabel>>,
    pc: usize,
    rng: ChaCha8Rng,
}

impl<'p> LocalRun<'p> {
    pub fn new(program: &'p LocalProgram, rng: ChaCha8Rng) -> LocalRun<'p> {
        LocalRun {
            program,
            state: PureState::product(&program.initial),
            known: program.initial.iter().copied().map(Some).collect(),
            pc: 0,
            rng,
        }
    }

    /// Runs gates up to the next slot and returns `(kind, cut, qubit)`
    /// without executing it; `None` once the program is done.
    fn advance(&mut self) -> Result<Option<(SlotKind, usize, usize)>> {
        while let Some(step) = self.program.steps.get(self.pc) {
            match step {
                Step::Gate(g) => {
                    self.state.apply(g)?;
                    for &t in &g.targets {
                        self.known[t] = None;
                    }
                    self.pc += 1;
                }
                Step::Measure { cut, qubit } => return Ok(Some((SlotKind::Measure, *cut, *qubit))),
                Step::Prepare { cut, qubit } => return Ok(Some((SlotKind::Prepare, *cut, *qubit))),
            }
        }
        Ok(None)
    }

    fn expect_slot(&mut self, kind: SlotKind, cut: usize) -> Result<usize> {
        match self.advance()? {
            Some((k, c, q)) if k == kind && c == cut => Ok(q),
            Some((k, c, _)) => Err(Error::Protocol(format!(
                "{} program expected {kind:?} for cut {cut}, next slot is {k:?} for cut {c}",
                self.program.party
            ))),
            None => Err(Error::Protocol(format!(
                "{} program has no {kind:?} slot left for cut {cut}",
                self.program.party
            ))),
        }
    }

    /// Executes the measure-slot of `cut` along `axis`; returns the bit.
    pub fn measure(&mut self, cut: usize, axis: PauliAxis) -> Result<u8> {
        let qubit = self.expect_slot(SlotKind::Measure, cut)?;
        let bit = self.state.measure(qubit, axis, &mut self.rng)?;
        self.known[qubit] = Some(BasisLabel::new(bit, axis));
        self.pc += 1;
        Ok(bit)
    }

    /// Executes the prepare-slot of `cut`, resetting its qubit into `label`.
    pub fn prepare(&mut self, cut: usize, label: BasisLabel) -> Result<()> {
        let qubit = self.expect_slot(SlotKind::Prepare, cut)?;
        let from = self.known[qubit].ok_or_else(|| {
            Error::Protocol(format!(
                "prepare-slot of cut {cut} targets qubit {qubit} in an unknown state"
            ))
        })?;
        self.state.reprepare(qubit, from, label)?;
        self.known[qubit] = Some(label);
        self.pc += 1;
        Ok(())
    }

    /// Finishes the program and measures the Pauli product `factors` (on data
    /// qubit indices). Returns the outcome bits, bit `j` for `factors[j]`, and
    /// the eigenvalue `±1`.
    pub fn payload(&mut self, factors: &[(usize, Pauli)]) -> Result<(u64, f64)> {
        if let Some((kind, cut, _)) = self.advance()? {
            return Err(Error::Protocol(format!(
                "payload requested while {kind:?} slot of cut {cut} is pending"
            )));
        }
        let mut rotated = self.state.clone();
        let mut qubits = Vec::with_capacity(factors.len());
        for &(q, p) in factors {
            let physical = *self.program.output.get(q).ok_or(Error::QubitOutOfRange {
                index: q,
                num_qubits: self.program.data_qubits,
            })?;
            if let Some(axis) = p.axis() {
                rotated.apply_matrix(&basis_change(axis), &[physical])?;
                qubits.push(physical);
            }
        }
        let bits = if qubits.is_empty() {
            0
        } else {
            rotated.sample_bits(&qubits, &mut self.rng)
        };
        let eigenvalue = if bits.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        Ok((bits, eigenvalue))
    }

    /// Draws from this run's stream (used by readout-noise injection).
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }
}
