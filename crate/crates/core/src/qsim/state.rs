use num_complex::Complex64;
use rand::Rng;

use super::kernel::apply_strided;
use super::{c, outer, BasisLabel, CMatrix, DensityOperator, PauliAxis, UnitaryGate, CHECK_TOL};
use crate::error::{Error, Result};

/// Normalized pure state on `num_qubits` qubits (little-endian amplitudes).
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> PureState {
        let mut amplitudes = vec![c(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = c(1.0, 0.0);
        PureState {
            num_qubits,
            amplitudes,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<PureState> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::NotNormalized(f64::NAN));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > CHECK_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(PureState {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Product state, `labels[q]` on qubit `q`.
    pub fn product(labels: &[BasisLabel]) -> PureState {
        let singles: Vec<[Complex64; 2]> = labels.iter().map(|l| l.amplitudes()).collect();
        PureState::product_of(&singles)
    }

    /// Product of arbitrary single-qubit states, `singles[q]` on qubit `q`.
    pub fn product_of(singles: &[[Complex64; 2]]) -> PureState {
        let n = singles.len();
        let amplitudes = (0..1usize << n)
            .map(|idx| {
                singles
                    .iter()
                    .enumerate()
                    .fold(c(1.0, 0.0), |acc, (q, s)| acc * s[(idx >> q) & 1])
            })
            .collect();
        PureState {
            num_qubits: n,
            amplitudes,
        }
    }

    /// `self ⊗ upper`, with `self` on the low qubits.
    pub fn tensor(&self, upper: &PureState) -> PureState {
        let low = self.amplitudes.len();
        let amplitudes = (0..low * upper.amplitudes.len())
            .map(|idx| self.amplitudes[idx % low] * upper.amplitudes[idx / low])
            .collect();
        PureState {
            num_qubits: self.num_qubits + upper.num_qubits,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        check_targets(targets, self.num_qubits)
    }

    pub fn apply(&mut self, gate: &UnitaryGate) -> Result<()> {
        self.check_targets(&gate.targets)?;
        apply_strided(
            &mut self.amplitudes,
            0,
            1,
            self.num_qubits,
            &gate.targets,
            &gate.matrix,
        );
        Ok(())
    }

    /// Applies an arbitrary (not necessarily unitary) operator.
    pub fn apply_matrix(&mut self, matrix: &CMatrix, targets: &[usize]) -> Result<()> {
        self.check_targets(targets)?;
        apply_strided(&mut self.amplitudes, 0, 1, self.num_qubits, targets, matrix);
        Ok(())
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }

    /// Probability of reading `|0_α⟩` on `qubit`.
    pub fn prob_zero(&self, qubit: usize, axis: PauliAxis) -> f64 {
        let proj = BasisLabel::new(0, axis).projector();
        let mut tmp = self.amplitudes.clone();
        apply_strided(&mut tmp, 0, 1, self.num_qubits, &[qubit], &proj);
        tmp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule measurement of `qubit` along `axis`; the state collapses and
    /// is renormalized. Returns the outcome bit.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        axis: PauliAxis,
        rng: &mut R,
    ) -> Result<u8> {
        self.check_targets(&[qubit])?;
        let p0 = self.prob_zero(qubit, axis).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        let bit = if u < p0 { 0 } else { 1 };
        let prob = if bit == 0 { p0 } else { 1.0 - p0 };
        let proj = BasisLabel::new(bit, axis).projector();
        apply_strided(&mut self.amplitudes, 0, 1, self.num_qubits, &[qubit], &proj);
        let scale = 1.0 / prob.sqrt();
        for a in &mut self.amplitudes {
            *a *= scale;
        }
        Ok(bit)
    }

    /// Rotates `qubit`, known to be in `from`, into `to` (reset and prepare).
    pub fn reprepare(&mut self, qubit: usize, from: BasisLabel, to: BasisLabel) -> Result<()> {
        self.check_targets(&[qubit])?;
        let w = outer(&to.amplitudes(), &from.amplitudes())
            + outer(&to.flipped().amplitudes(), &from.flipped().amplitudes());
        apply_strided(&mut self.amplitudes, 0, 1, self.num_qubits, &[qubit], &w);
        Ok(())
    }

    /// Samples a computational-basis outcome of the qubits in `qubits`
    /// (bit `j` of the result belongs to `qubits[j]`) without collapsing.
    pub fn sample_bits<R: Rng + ?Sized>(&self, qubits: &[usize], rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.amplitudes.len() - 1;
        for (idx, a) in self.amplitudes.iter().enumerate() {
            acc += a.norm_sqr();
            if u < acc {
                chosen = idx;
                break;
            }
        }
        qubits.iter().enumerate().fold(0u64, |bits, (j, &q)| {
            bits | ((((chosen >> q) & 1) as u64) << j)
        })
    }
}

pub(crate) fn check_targets(targets: &[usize], num_qubits: usize) -> Result<()> {
    for (k, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: t,
                num_qubits,
            });
        }
        if targets[..k].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn x_flips_zero() {
        let mut s = PureState::zero(1);
        s.apply(&UnitaryGate::x(0)).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn cnot_on_plus_zero_is_bell() {
        let mut s = PureState::product(&[
            BasisLabel::new(0, PauliAxis::X),
            BasisLabel::new(0, PauliAxis::Z),
        ]);
        s.apply(&UnitaryGate::cnot(0, 1).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)];
        for (a, b) in s.amplitudes().iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_target() {
        let mut s = PureState::zero(2);
        assert!(matches!(
            s.apply(&UnitaryGate::h(2)),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn reprepare_moves_eigenstate() {
        let from = BasisLabel::new(1, PauliAxis::X);
        let to = BasisLabel::new(0, PauliAxis::Y);
        let mut s = PureState::product(&[from]);
        s.reprepare(0, from, to).unwrap();
        assert!((s.inner(&PureState::product(&[to])).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn measurement_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut ones = 0;
        for _ in 0..n {
            let mut s = PureState::product(&[BasisLabel::new(0, PauliAxis::X)]);
            ones += s.measure(0, PauliAxis::Z, &mut rng).unwrap() as usize;
        }
        let p = ones as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 5.0 * sigma);
    }
}
