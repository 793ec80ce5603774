//! Readout-error injection, calibration and inversion.
//!
//! Assignment matrices map ideal to noisy outcome distributions,
//! `P_err(s) = Σ_{s'} A(s, s') P(s')`, and are column-stochastic. Bit `q` of an
//! outcome index belongs to measured bit `q`.

mod pipeline;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pipeline::{
    joint_distribution, mitigate_cut_exact, mitigate_cut_sampled, mitigated_conditionals,
    recombined_value, reconstruct_mitigated_state, Conditionals, MitigationOutcome, PartyTable,
    Setting,
};

/// Condition numbers at or above this are rejected by [`mitigate`].
pub const MAX_CONDITION: f64 = 1e6;

/// Largest outcome register for which a dense `2^n × 2^n` matrix is built.
pub const MAX_FULL_BITS: usize = 6;

/// Independent per-bit flip probabilities `(ε_{0→1}, ε_{1→0})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNoiseModel {
    pub flips: Vec<(f64, f64)>,
}

impl ReadoutNoiseModel {
    pub fn new(flips: Vec<(f64, f64)>) -> Result<ReadoutNoiseModel> {
        for &(a, b) in &flips {
            for e in [a, b] {
                if !(0.0..0.5).contains(&e) {
                    return Err(Error::FlipProbability(e));
                }
            }
        }
        Ok(ReadoutNoiseModel { flips })
    }

    pub fn symmetric(bits: usize, epsilon: f64) -> Result<ReadoutNoiseModel> {
        ReadoutNoiseModel::new(vec![(epsilon, epsilon); bits])
    }

    pub fn bits(&self) -> usize {
        self.flips.len()
    }

    pub fn assignment(&self) -> AssignmentMatrix {
        AssignmentMatrix::product(self.flips.iter().map(|&(a, b)| flip_matrix(a, b)).collect())
            .expect("flip matrices are column-stochastic")
    }

    /// Applies readout flips to an ideal outcome.
    pub fn corrupt<R: Rng + ?Sized>(&self, outcome: usize, rng: &mut R) -> usize {
        let mut out = outcome;
        for (q, &(e01, e10)) in self.flips.iter().enumerate() {
            let e = if (outcome >> q) & 1 == 0 { e01 } else { e10 };
            if rng.random::<f64>() < e {
                out ^= 1 << q;
            }
        }
        out
    }
}

/// `[[1 − ε01, ε10], [ε01, 1 − ε10]]`.
pub fn flip_matrix(e01: f64, e10: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0 - e01, e10, e01, 1.0 - e10])
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Full(DMatrix<f64>),
    /// `factors[q]` acts on bit `q`.
    Product(Vec<DMatrix<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix {
    bits: usize,
    repr: Repr,
}

fn check_stochastic(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::Probability(
            "assignment entries must be finite and nonnegative".into(),
        ));
    }
    for (k, col) in m.column_iter().enumerate() {
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Probability(format!(
                "assignment column {k} sums to {s}"
            )));
        }
    }
    Ok(())
}

fn condition_of(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= f64::MIN_POSITIVE {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Applies `factors[q]` to bit `q` of a vector over `2^n` outcomes.
fn apply_factors(v: &[f64], factors: &[DMatrix<f64>]) -> Vec<f64> {
    let mut out = v.to_vec();
    for (q, f) in factors.iter().enumerate() {
        let bit = 1usize << q;
        for idx in 0..out.len() {
            if idx & bit == 0 {
                let (a, b) = (out[idx], out[idx | bit]);
                out[idx] = f[(0, 0)] * a + f[(0, 1)] * b;
                out[idx | bit] = f[(1, 0)] * a + f[(1, 1)] * b;
            }
        }
    }
    out
}

impl AssignmentMatrix {
    pub fn identity(bits: usize) -> AssignmentMatrix {
        AssignmentMatrix {
            bits,
            repr: Repr::Product(vec![DMatrix::identity(2, 2); bits]),
        }
    }

    /// Dense matrix over `2^bits` outcomes.
    pub fn full(matrix: DMatrix<f64>) -> Result<AssignmentMatrix> {
        let dim = matrix.nrows();
        if dim < 2 || !dim.is_power_of_two() || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim.next_power_of_two().max(2),
                found: dim,
            });
        }
        check_stochastic(&matrix)?;
        Ok(AssignmentMatrix {
            bits: dim.trailing_zeros() as usize,
            repr: Repr::Full(matrix),
        })
    }

    /// Tensor product of 2×2 factors, `factors[q]` on bit `q`.
    pub fn product(factors: Vec<DMatrix<f64>>) -> Result<AssignmentMatrix> {
        for f in &factors {
            if f.shape() != (2, 2) {
                return Err(Error::Dimension {
                    expected: 2,
                    found: f.nrows(),
                });
            }
            check_stochastic(f)?;
        }
        Ok(AssignmentMatrix {
            bits: factors.len(),
            repr: Repr::Product(factors),
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn dim(&self) -> usize {
        1 << self.bits
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self.repr, Repr::Product(_))
    }

    /// Dense form; refused above [`MAX_FULL_BITS`].
    pub fn to_full(&self) -> Result<DMatrix<f64>> {
        match &self.repr {
            Repr::Full(m) => Ok(m.clone()),
            Repr::Product(factors) => {
                if self.bits > MAX_FULL_BITS {
                    return Err(Error::Dimension {
                        expected: 1 << MAX_FULL_BITS,
                        found: self.dim(),
                    });
                }
                Ok(factors
                    .iter()
                    .fold(DMatrix::from_element(1, 1, 1.0), |acc, f| f.kronecker(&acc)))
            }
        }
    }

    /// 2-norm condition number (product of the factors' for a tensor form).
    pub fn condition_number(&self) -> f64 {
        match &self.repr {
            Repr::Full(m) => condition_of(m),
            Repr::Product(factors) => factors.iter().map(condition_of).product(),
        }
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(match &self.repr {
            Repr::Full(m) => (m * nalgebra::DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
            Repr::Product(factors) => apply_factors(v, factors),
        })
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    fn check_conditioned(&self) -> Result<()> {
        let cond = self.condition_number();
        if cond.is_nan() || cond >= MAX_CONDITION {
            return Err(Error::IllConditioned(cond));
        }
        Ok(())
    }

    /// `A⁻¹ v` (or `A⁻ᵀ v` with `transpose`).
    fn solve(&self, v: &[f64], transpose: bool) -> Result<Vec<f64>> {
        self.check_len(v)?;
        self.check_conditioned()?;
        match &self.repr {
            Repr::Full(m) => {
                let m = if transpose { m.transpose() } else { m.clone() };
                let x = m
                    .lu()
                    .solve(&nalgebra::DVector::from_column_slice(v))
                    .ok_or(Error::IllConditioned(f64::INFINITY))?;
                Ok(x.iter().copied().collect())
            }
            Repr::Product(factors) => {
                let inv = factors
                    .iter()
                    .map(|f| {
                        let i = f
                            .clone()
                            .try_inverse()
                            .ok_or(Error::IllConditioned(f64::INFINITY))?;
                        Ok(if transpose { i.transpose() } else { i })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(apply_factors(v, &inv))
            }
        }
    }

    /// `A⁻¹` as a dense matrix (small registers only).
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.check_conditioned()?;
        self.to_full()?
            .try_inverse()
            .ok_or(Error::IllConditioned(f64::INFINITY))
    }

    pub fn solve_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.solve(v, true)
    }

    pub fn to_document(&self) -> AssignmentDocument {
        match &self.repr {
            Repr::Full(m) => AssignmentDocument {
                dimension: self.dim(),
                entries: Some(m.transpose().iter().copied().collect()),
                factors: None,
            },
            Repr::Product(factors) => AssignmentDocument {
                dimension: self.dim(),
                entries: None,
                factors: Some(
                    factors
                        .iter()
                        .map(|f| f.transpose().iter().copied().collect())
                        .collect(),
                ),
            },
        }
    }

    pub fn from_document(doc: &AssignmentDocument) -> Result<AssignmentMatrix> {
        let a = match (&doc.entries, &doc.factors) {
            (Some(e), None) => {
                if e.len() != doc.dimension * doc.dimension {
                    return Err(Error::Document(
                        "entry count does not match dimension".into(),
                    ));
                }
                AssignmentMatrix::full(DMatrix::from_row_slice(doc.dimension, doc.dimension, e))?
            }
            (None, Some(fs)) => AssignmentMatrix::product(
                fs.iter()
                    .map(|f| {
                        if f.len() != 4 {
                            return Err(Error::Document("factor needs 4 entries".into()));
                        }
                        Ok(DMatrix::from_row_slice(2, 2, f))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?,
            _ => {
                return Err(Error::Document(
                    "exactly one of entries or factors required".into(),
                ))
            }
        };
        if a.dim() != doc.dimension {
            return Err(Error::Document("dimension does not match factors".into()));
        }
        Ok(a)
    }
}

/// Wire form: dimension plus row-major entries, or per-bit row-major 2×2
/// factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentDocument {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<Vec<f64>>>,
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Probability("non-finite entry".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::Probability(format!("sums to {s}")));
    }
    Ok(())
}

/// `A P`.
pub fn apply_noise(p: &[f64], a: &AssignmentMatrix) -> Result<Vec<f64>> {
    check_distribution(p)?;
    a.apply(p)
}

/// `A⁻¹ P_err`, raw: entries may be slightly negative.
pub fn mitigate(p_error: &[f64], a: &AssignmentMatrix) -> Result<Vec<f64>> {
    a.solve(p_error, false)
}

/// Display-only variant: negatives clipped to zero, then renormalized.
/// The flag tells whether anything was clipped.
pub fn clip_and_renormalize(p: &[f64]) -> (Vec<f64>, bool) {
    let clipped = p.iter().any(|&v| v < 0.0);
    let pos: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
    let s: f64 = pos.iter().sum();
    if s > 0.0 {
        (pos.iter().map(|v| v / s).collect(), clipped)
    } else {
        (pos, clipped)
    }
}

/// Prepares basis outcome `prepared` and reads it out `shots` times,
/// returning counts per observed outcome.
pub trait ReadoutRunner {
    fn bits(&self) -> usize;
    fn run(&mut self, prepared: usize, shots: u64) -> Result<Vec<u64>>;
}

/// Simulated device: ideal preparation followed by independent bit flips.
#[derive(Clone, Debug)]
pub struct NoisyReadout {
    pub model: ReadoutNoiseModel,
    pub rng: ChaCha8Rng,
}

impl ReadoutRunner for NoisyReadout {
    fn bits(&self) -> usize {
        self.model.bits()
    }

    fn run(&mut self, prepared: usize, shots: u64) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; 1 << self.model.bits()];
        for _ in 0..shots {
            counts[self.model.corrupt(prepared, &mut self.rng)] += 1;
        }
        Ok(counts)
    }
}

/// Column `s'` of the estimate is the empirical outcome distribution after
/// preparing `s'`; columns are exactly stochastic by construction.
pub fn calibrate<R: ReadoutRunner + ?Sized>(
    runner: &mut R,
    shots: u64,
) -> Result<AssignmentMatrix> {
    if shots == 0 {
        return Err(Error::Shots { min: 1, got: 0 });
    }
    let dim = 1usize << runner.bits();
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let counts = runner.run(col, shots)?;
        if counts.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: counts.len(),
            });
        }
        let total: u64 = counts.iter().sum();
        for (row, &n) in counts.iter().enumerate() {
            m[(row, col)] = n as f64 / total as f64;
        }
    }
    AssignmentMatrix::full(m)
}
