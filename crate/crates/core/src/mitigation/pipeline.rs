//! Mitigated recombination of the wire-cut protocol.
//!
//! Each party runs `18^L` settings, one per choice of measurement axis and
//! preparation label at every cut. A setting yields a joint outcome over the
//! payload bits `s` (low `p` bits) and the measured cut bits (`i << p`); all of
//! them pass through the same readout channel.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AssignmentMatrix, ReadoutNoiseModel};
use crate::circuit::{
    split_local, CutLabel, CutPlan, LocalProgram, Observable, PartitionedCircuit, Party,
    PauliString,
};
use crate::error::{Error, Result};
use crate::qsim::{basis_change, BasisLabel, DensityOperator, Pauli, PauliAxis};
use crate::sampler::{shot_rng, PayloadSpec, StreamRole};
use crate::wirecut::{paired_indices, run_branch, TransitionMatrix};

/// Measurement axes and preparation labels, one per cut.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setting {
    pub axes: Vec<PauliAxis>,
    pub prepared: Vec<BasisLabel>,
}

impl Setting {
    pub fn count(cuts: usize) -> usize {
        18usize.pow(cuts as u32)
    }

    pub fn index(&self) -> usize {
        self.axes
            .iter()
            .zip(&self.prepared)
            .rev()
            .fold(0, |acc, (a, p)| acc * 18 + a.index() * 6 + p.index())
    }

    pub fn from_index(mut index: usize, cuts: usize) -> Setting {
        let mut axes = Vec::with_capacity(cuts);
        let mut prepared = Vec::with_capacity(cuts);
        for _ in 0..cuts {
            let d = index % 18;
            index /= 18;
            axes.push(PauliAxis::from_index(d / 6));
            prepared.push(BasisLabel::from_index(d % 6));
        }
        Setting { axes, prepared }
    }

    /// Splits a label tuple into its setting and measured cut bits.
    pub fn of_labels(labels: &[CutLabel]) -> (Setting, usize) {
        let bits = labels
            .iter()
            .enumerate()
            .fold(0, |acc, (g, l)| acc | (l.measured.bit as usize) << g);
        (
            Setting {
                axes: labels.iter().map(|l| l.measured.axis).collect(),
                prepared: labels.iter().map(|l| l.prepared).collect(),
            },
            bits,
        )
    }

    fn labels(&self, bits: usize) -> Vec<CutLabel> {
        self.axes
            .iter()
            .zip(&self.prepared)
            .enumerate()
            .map(|(g, (&axis, &prepared))| CutLabel {
                measured: BasisLabel::new(((bits >> g) & 1) as u8, axis),
                prepared,
            })
            .collect()
    }
}

/// Outcome data of one party: per setting, either probabilities or counts
/// over `2^(payload_bits + cuts)` outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyTable {
    pub party: Party,
    pub cuts: usize,
    pub payload: Vec<(usize, Pauli)>,
    pub rows: Vec<Vec<f64>>,
}

impl PartyTable {
    pub fn payload_bits(&self) -> usize {
        self.payload.len()
    }

    pub fn outcome_bits(&self) -> usize {
        self.payload.len() + self.cuts
    }

    /// Exact ideal distributions of every setting.
    pub fn exact(program: &LocalProgram, payload: &[(usize, Pauli)]) -> Result<PartyTable> {
        let payload: Vec<(usize, Pauli)> = payload
            .iter()
            .copied()
            .filter(|f| f.1 != Pauli::I)
            .collect();
        let cuts = program.cuts;
        let p = payload.len();
        let keep: Vec<usize> = payload.iter().map(|f| f.0).collect();
        let rows = (0..Setting::count(cuts))
            .into_par_iter()
            .map(|sigma| {
                let setting = Setting::from_index(sigma, cuts);
                let mut row = vec![0.0; 1 << (p + cuts)];
                for bits in 0..1usize << cuts {
                    let mut rho = run_branch(program, &setting.labels(bits))?;
                    for &(q, pauli) in &payload {
                        let axis = pauli.axis().expect("identity factors filtered");
                        rho.conjugate_by(&basis_change(axis), &[q])?;
                    }
                    let marginal = if keep.is_empty() {
                        vec![rho.trace_weight()]
                    } else {
                        rho.partial_trace(&keep)?.diagonal()
                    };
                    for (s, v) in marginal.into_iter().enumerate() {
                        row[s | bits << p] = v;
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartyTable {
            party: program.party,
            cuts,
            payload,
            rows,
        })
    }

    /// Propagates every row through the readout channel.
    pub fn noisy(&self, a: &AssignmentMatrix) -> Result<PartyTable> {
        self.check_register(a)?;
        Ok(PartyTable {
            rows: self
                .rows
                .iter()
                .map(|r| a.apply(r))
                .collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    /// Multinomial counts drawn from every row, `shots` split evenly over the
    /// settings. Setting `σ` uses stream `σ` of the party's role.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<PartyTable> {
        let settings = self.rows.len() as u64;
        if shots < settings {
            return Err(Error::Shots {
                min: settings,
                got: shots,
            });
        }
        let role = match self.party {
            Party::Alice => StreamRole::Alice,
            Party::Bob => StreamRole::Bob,
        };
        let rows = self
            .rows
            .par_iter()
            .enumerate()
            .map(|(sigma, probs)| {
                let n = shots / settings + u64::from((sigma as u64) < shots % settings);
                let mut rng = shot_rng(seed, sigma as u64, role);
                multinomial(n, probs, &mut rng).map(|c| c.into_iter().map(|x| x as f64).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartyTable {
            rows,
            ..self.clone()
        })
    }

    fn check_register(&self, a: &AssignmentMatrix) -> Result<()> {
        if a.bits() != self.outcome_bits() {
            return Err(Error::Dimension {
                expected: 1 << self.outcome_bits(),
                found: a.dim(),
            });
        }
        Ok(())
    }
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(left, q)
            .map_err(|e| Error::Probability(e.to_string()))?
            .sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(counts)
}

fn parity(bits: usize) -> f64 {
    if bits.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Mitigated outcome tables of one party.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditionals {
    pub payload_bits: usize,
    pub cuts: usize,
    /// `A⁻¹` applied to each row, normalized over the whole row.
    pub joint: Vec<Vec<f64>>,
    /// `q(s | i, setting)`: the joint divided by its `s`-marginal; zero where
    /// the marginal vanishes.
    pub conditional: Vec<Vec<f64>>,
    /// `Σ_s q(s, i | setting)`, indexed `[setting][i]`.
    pub weights: Vec<Vec<f64>>,
    /// `(setting, i)` pairs whose marginal is zero.
    pub zero_denominators: Vec<(usize, usize)>,
}

impl Conditionals {
    /// Signed payload value of every label tuple, indexed by
    /// [`CutLabel::tuple_index`]: `w(i) Σ_s q(s | i) (−1)^{|s|}`.
    pub fn branch_values(&self) -> Vec<f64> {
        let p = self.payload_bits;
        CutLabel::all_tuples(self.cuts)
            .map(|labels| {
                let (setting, i) = Setting::of_labels(&labels);
                let sigma = setting.index();
                let cond: f64 = (0..1usize << p)
                    .map(|s| self.conditional[sigma][s | i << p] * parity(s))
                    .sum();
                self.weights[sigma][i] * cond
            })
            .collect()
    }

    /// `q(s, i | setting)` of the label tuple, as a function of `s`.
    fn branch_distribution(&self, labels: &[CutLabel]) -> impl Iterator<Item = f64> + '_ {
        let (setting, i) = Setting::of_labels(labels);
        let row = &self.joint[setting.index()];
        let p = self.payload_bits;
        (0..1usize << p).map(move |s| row[s | i << p])
    }
}

/// Applies `A⁻¹` to every row and forms the conditional tables. Works on
/// probabilities or raw counts alike; only ratios within a row matter.
pub fn mitigated_conditionals(table: &PartyTable, a: &AssignmentMatrix) -> Result<Conditionals> {
    table.check_register(a)?;
    let p = table.payload_bits();
    let mut out = Conditionals {
        payload_bits: p,
        cuts: table.cuts,
        joint: Vec::with_capacity(table.rows.len()),
        conditional: Vec::with_capacity(table.rows.len()),
        weights: Vec::with_capacity(table.rows.len()),
        zero_denominators: Vec::new(),
    };
    for (sigma, row) in table.rows.iter().enumerate() {
        let raw = super::mitigate(row, a)?;
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            return Err(Error::Probability(format!("setting {sigma} has no counts")));
        }
        let joint: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut conditional = vec![0.0; joint.len()];
        let mut weights = vec![0.0; 1 << table.cuts];
        for (i, w) in weights.iter_mut().enumerate() {
            let block = &joint[i << p..(i + 1) << p];
            *w = block.iter().sum();
            if *w == 0.0 {
                out.zero_denominators.push((sigma, i));
                continue;
            }
            for (s, v) in block.iter().enumerate() {
                conditional[s | i << p] = v / *w;
            }
        }
        out.joint.push(joint);
        out.conditional.push(conditional);
        out.weights.push(weights);
    }
    Ok(out)
}

fn owner_host<'a, T>(owner: Party, alice: &'a T, bob: &'a T) -> (&'a T, &'a T) {
    match owner {
        Party::Alice => (alice, bob),
        Party::Bob => (bob, alice),
    }
}

/// Recombined joint payload distribution `P(s_A, s_B)`, indexed
/// `s_A | s_B << p_A`.
pub fn joint_distribution(
    owner: Party,
    alice: &Conditionals,
    bob: &Conditionals,
) -> Result<Vec<f64>> {
    if alice.cuts != bob.cuts {
        return Err(Error::PlanMismatch(
            "tables disagree on the cut count".into(),
        ));
    }
    let m = TransitionMatrix::new();
    let (pa, pb) = (alice.payload_bits, bob.payload_bits);
    let mut out = vec![0.0; 1 << (pa + pb)];
    let (own, host) = owner_host(owner, alice, bob);
    for (k, h, sign) in paired_indices(alice.cuts, &m) {
        let own_dist: Vec<f64> = own
            .branch_distribution(&CutLabel::tuple_from_index(k, alice.cuts))
            .collect();
        let host_dist: Vec<f64> = host
            .branch_distribution(&CutLabel::tuple_from_index(h, alice.cuts))
            .collect();
        let (a_dist, b_dist) = owner_host(owner, &own_dist, &host_dist);
        for (sa, x) in a_dist.iter().enumerate() {
            for (sb, y) in b_dist.iter().enumerate() {
                out[sa | sb << pa] += f64::from(sign) * x * y;
            }
        }
    }
    Ok(out)
}

/// `c Σ M·M v_owner v_host`.
pub fn recombined_value(
    owner: Party,
    coefficient: f64,
    alice: &Conditionals,
    bob: &Conditionals,
) -> Result<f64> {
    let (own, host) = owner_host(owner, alice, bob);
    Ok(coefficient
        * crate::wirecut::recombine_scalars(
            alice.cuts,
            &own.branch_values(),
            &host.branch_values(),
            &TransitionMatrix::new(),
        )?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationOutcome {
    /// Noiseless recombination.
    pub ideal: f64,
    /// Recombination of the noisy tables without inversion.
    pub noisy: f64,
    pub mitigated: f64,
    /// Propagated standard error of `mitigated` (sampled mode only).
    pub sigma: Option<f64>,
    /// Condition numbers of Alice's and Bob's assignment matrices.
    pub condition: (f64, f64),
}

struct Prepared {
    owner: Party,
    coefficient: f64,
    ideal: (PartyTable, PartyTable),
    noise: (AssignmentMatrix, AssignmentMatrix),
}

fn prepare(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
    observable: &Observable,
    epsilon: f64,
) -> Result<Prepared> {
    observable.check_width(circuit.num_qubits())?;
    let payload = PayloadSpec::from_observable(observable, circuit.alice_qubits)?;
    let (alice, bob) = split_local(circuit, plan)?;
    let ideal_a = PartyTable::exact(&alice, &payload.alice)?;
    let ideal_b = PartyTable::exact(&bob, &payload.bob)?;
    let noise_a = ReadoutNoiseModel::symmetric(ideal_a.outcome_bits(), epsilon)?.assignment();
    let noise_b = ReadoutNoiseModel::symmetric(ideal_b.outcome_bits(), epsilon)?.assignment();
    Ok(Prepared {
        owner: plan.owner,
        coefficient: payload.coefficient,
        ideal: (ideal_a, ideal_b),
        noise: (noise_a, noise_b),
    })
}

impl Prepared {
    fn value(
        &self,
        alice: &PartyTable,
        bob: &PartyTable,
        a: &AssignmentMatrix,
        b: &AssignmentMatrix,
    ) -> Result<f64> {
        recombined_value(
            self.owner,
            self.coefficient,
            &mitigated_conditionals(alice, a)?,
            &mitigated_conditionals(bob, b)?,
        )
    }

    fn ideal_value(&self) -> Result<f64> {
        let (a, b) = &self.ideal;
        self.value(
            a,
            b,
            &AssignmentMatrix::identity(a.outcome_bits()),
            &AssignmentMatrix::identity(b.outcome_bits()),
        )
    }
}

/// Exact-probability mode: symmetric flips `epsilon` on every measured bit,
/// distributions propagated without sampling.
pub fn mitigate_cut_exact(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
    observable: &Observable,
    epsilon: f64,
) -> Result<MitigationOutcome> {
    let prep = prepare(circuit, plan, observable, epsilon)?;
    let (ia, ib) = &prep.ideal;
    let (na, nb) = &prep.noise;
    let noisy_a = ia.noisy(na)?;
    let noisy_b = ib.noisy(nb)?;
    let id_a = AssignmentMatrix::identity(ia.outcome_bits());
    let id_b = AssignmentMatrix::identity(ib.outcome_bits());
    Ok(MitigationOutcome {
        ideal: prep.ideal_value()?,
        noisy: prep.value(&noisy_a, &noisy_b, &id_a, &id_b)?,
        mitigated: prep.value(&noisy_a, &noisy_b, na, nb)?,
        sigma: None,
        condition: (na.condition_number(), nb.condition_number()),
    })
}

/// Sampled mode: each party spends `shots` spread over its settings; the
/// standard error follows from the multinomial covariance by the delta
/// method.
pub fn mitigate_cut_sampled(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
    observable: &Observable,
    epsilon: f64,
    shots: u64,
    seed: u64,
) -> Result<MitigationOutcome> {
    let prep = prepare(circuit, plan, observable, epsilon)?;
    let (ia, ib) = &prep.ideal;
    let (na, nb) = &prep.noise;
    let counts_a = ia.noisy(na)?.sample(shots, seed)?;
    let counts_b = ib.noisy(nb)?.sample(shots, seed)?;
    let id_a = AssignmentMatrix::identity(ia.outcome_bits());
    let id_b = AssignmentMatrix::identity(ib.outcome_bits());
    let cond_a = mitigated_conditionals(&counts_a, na)?;
    let cond_b = mitigated_conditionals(&counts_b, nb)?;
    let mitigated = recombined_value(prep.owner, prep.coefficient, &cond_a, &cond_b)?;

    let values_a = cond_a.branch_values();
    let values_b = cond_b.branch_values();
    let (own_values, host_values) = owner_host(prep.owner, &values_a, &values_b);
    let mut grad_own = vec![0.0; own_values.len()];
    let mut grad_host = vec![0.0; host_values.len()];
    for (k, h, sign) in paired_indices(ia.cuts, &TransitionMatrix::new()) {
        let s = prep.coefficient * f64::from(sign);
        grad_own[k] += s * host_values[h];
        grad_host[h] += s * own_values[k];
    }
    let (grad_a, grad_b) = owner_host(prep.owner, &grad_own, &grad_host);
    let variance = delta_variance(&counts_a, na, grad_a)? + delta_variance(&counts_b, nb, grad_b)?;

    Ok(MitigationOutcome {
        ideal: prep.ideal_value()?,
        noisy: prep.value(&counts_a, &counts_b, &id_a, &id_b)?,
        mitigated,
        sigma: Some(variance.sqrt()),
        condition: (na.condition_number(), nb.condition_number()),
    })
}

/// Variance contribution of one party's counts, given `∂E/∂v` per tuple.
fn delta_variance(counts: &PartyTable, a: &AssignmentMatrix, grad: &[f64]) -> Result<f64> {
    let p = counts.payload_bits();
    let mut y = vec![vec![0.0; 1 << counts.outcome_bits()]; counts.rows.len()];
    for (t, labels) in CutLabel::all_tuples(counts.cuts).enumerate() {
        let (setting, i) = Setting::of_labels(&labels);
        let row = &mut y[setting.index()];
        for s in 0..1usize << p {
            row[s | i << p] += grad[t] * parity(s);
        }
    }
    let mut variance = 0.0;
    for (row, ys) in counts.rows.iter().zip(&y) {
        let n: f64 = row.iter().sum();
        let g = a.solve_transpose(ys)?;
        let mean: f64 = g.iter().zip(row).map(|(g, c)| g * c / n).sum();
        let second: f64 = g.iter().zip(row).map(|(g, c)| g * g * c / n).sum();
        variance += (second - mean * mean) / n;
    }
    Ok(variance)
}

/// Linear-inversion estimate of the output state from mitigated Pauli
/// expectations in exact-probability mode, one recombination per Pauli
/// string.
pub fn reconstruct_mitigated_state(
    circuit: &PartitionedCircuit,
    plan: &CutPlan,
    epsilon: f64,
) -> Result<DensityOperator> {
    let n = circuit.num_qubits();
    let dim = 1usize << n;
    let mut acc = crate::qsim::CMatrix::identity(dim, dim);
    for code in 1..4usize.pow(n as u32) {
        let factors: Vec<(usize, Pauli)> = (0..n)
            .map(|q| {
                (
                    q,
                    [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][(code >> (2 * q)) & 3],
                )
            })
            .collect();
        let pauli = PauliString::new(factors)?;
        let value = mitigate_cut_exact(circuit, plan, &Observable::single(pauli.clone()), epsilon)?
            .mitigated;
        let mut op = crate::qsim::CMatrix::identity(1, 1);
        for q in 0..n {
            let p = pauli
                .factors()
                .iter()
                .find(|f| f.0 == q)
                .map_or(Pauli::I, |f| f.1);
            op = p.matrix().kronecker(&op);
        }
        acc += op * crate::qsim::c(value, 0.0);
    }
    Ok(DensityOperator::from_matrix_unchecked(
        acc.unscale(dim as f64),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    fn bell() -> PartitionedCircuit {
        parse_circuit(include_str!("../../../../circuits/bell.json")).unwrap()
    }

    #[test]
    fn setting_index_roundtrip() {
        for sigma in 0..Setting::count(2) {
            assert_eq!(Setting::from_index(sigma, 2).index(), sigma);
        }
    }

    #[test]
    fn noiseless_tables_match_oracle() {
        let c = bell();
        let plan = CutPlan::alice_side(&c);
        let obs = Observable::parse("XX").unwrap();
        let out = mitigate_cut_exact(&c, &plan, &obs, 0.0).unwrap();
        let oracle = obs.expectation(&c.simulate_full_density()).unwrap();
        assert!((out.ideal - oracle).abs() < 1e-12);
        assert!((out.noisy - oracle).abs() < 1e-12);
        assert!((out.mitigated - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_conditionals_are_normalized_counts() {
        let c = bell();
        let plan = CutPlan::alice_side(&c);
        let (alice, _) = split_local(&c, &plan).unwrap();
        let table = PartyTable::exact(&alice, &[(0, Pauli::Z)])
            .unwrap()
            .sample(18_000, 3)
            .unwrap();
        let cond = mitigated_conditionals(&table, &AssignmentMatrix::identity(2)).unwrap();
        for (row, joint) in table.rows.iter().zip(&cond.joint) {
            let n: f64 = row.iter().sum();
            for (c, q) in row.iter().zip(joint) {
                assert!((c / n - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn joint_distribution_matches_scalar_recombination() {
        let c = bell();
        let plan = CutPlan::alice_side(&c);
        let obs = Observable::parse("ZZ").unwrap();
        let prep = prepare(&c, &plan, &obs, 0.05).unwrap();
        let na = prep.ideal.0.noisy(&prep.noise.0).unwrap();
        let nb = prep.ideal.1.noisy(&prep.noise.1).unwrap();
        let ca = mitigated_conditionals(&na, &prep.noise.0).unwrap();
        let cb = mitigated_conditionals(&nb, &prep.noise.1).unwrap();
        let joint = joint_distribution(Party::Alice, &ca, &cb).unwrap();
        let from_joint: f64 = joint.iter().enumerate().map(|(s, p)| parity(s) * p).sum();
        let scalar = recombined_value(Party::Alice, 1.0, &ca, &cb).unwrap();
        assert!((from_joint - scalar).abs() < 1e-12);
        // Bell state: ZZ outcomes are perfectly correlated.
        assert!((joint[0] - 0.5).abs() < 1e-10 && (joint[3] - 0.5).abs() < 1e-10);
        assert!(joint[1].abs() < 1e-10 && joint[2].abs() < 1e-10);
    }
}
