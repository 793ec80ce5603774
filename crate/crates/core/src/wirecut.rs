//! Identity-channel wire cuts and exact signed recombination.
//!
//! The identity channel on a qubit is written as measure-and-prepare maps,
//! `ℐ = 𝓜_z + 𝓜_x − 𝒫_z ∘ 𝓜_y`. Cutting the owner's wire just before and just
//! after a nonlocal gate moves the gate entirely to the host side; the two
//! party programs then run on their own and their branch states are paired
//! through the [`TransitionMatrix`].

use rayon::prelude::*;

use crate::circuit::{
    split_local, CutLabel, CutPlan, LocalProgram, Observable, PartitionedCircuit, Party, Step,
};
use crate::error::{Error, Result};
use crate::qsim::{c, BasisLabel, CMatrix, DensityOperator, Pauli, PauliAxis, ProjectorSpec};

/// `M_{jβ,iα}`: row = label prepared by the partner, column = label measured.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    entries: [[i8; 6]; 6],
}

/// `ε_α δ_αβ [δ_ij (1 − δ_αy) + (1 − δ_ij) δ_αy]`.
pub fn transition_entry(j: u8, beta: PauliAxis, i: u8, alpha: PauliAxis) -> i8 {
    if alpha != beta {
        return 0;
    }
    let pairs = if alpha == PauliAxis::Y {
        i != j
    } else {
        i == j
    };
    if pairs {
        alpha.signature() as i8
    } else {
        0
    }
}

impl Default for TransitionMatrix {
    fn default() -> Self {
        TransitionMatrix::new()
    }
}

impl TransitionMatrix {
    pub fn new() -> TransitionMatrix {
        let mut entries = [[0i8; 6]; 6];
        for (row, line) in entries.iter_mut().enumerate() {
            let prep = BasisLabel::from_index(row);
            for (col, e) in line.iter_mut().enumerate() {
                let meas = BasisLabel::from_index(col);
                *e = transition_entry(prep.bit, prep.axis, meas.bit, meas.axis);
            }
        }
        TransitionMatrix { entries }
    }

    pub fn get(&self, prepared: BasisLabel, measured: BasisLabel) -> i8 {
        self.entries[prepared.index()][measured.index()]
    }

    pub fn entries(&self) -> &[[i8; 6]; 6] {
        &self.entries
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().flatten().filter(|&&e| e != 0).count()
    }

    /// The preparation paired with a measured label, and its sign.
    pub fn paired_preparation(&self, measured: BasisLabel) -> (BasisLabel, i8) {
        let col = measured.index();
        (0..6)
            .find(|&row| self.entries[row][col] != 0)
            .map(|row| (BasisLabel::from_index(row), self.entries[row][col]))
            .expect("every column of M has one nonzero entry")
    }

    /// The measured label paired with a preparation, and its sign.
    pub fn paired_measurement(&self, prepared: BasisLabel) -> (BasisLabel, i8) {
        let row = prepared.index();
        (0..6)
            .find(|&col| self.entries[row][col] != 0)
            .map(|col| (BasisLabel::from_index(col), self.entries[row][col]))
            .expect("every row of M has one nonzero entry")
    }

    /// Coefficient of an (owner, host) label pair for one cut:
    /// `M[host.prepared, owner.measured] · M[owner.prepared, host.measured]`.
    pub fn pair_coefficient(&self, owner: CutLabel, host: CutLabel) -> i8 {
        self.get(host.prepared, owner.measured) * self.get(owner.prepared, host.measured)
    }

    /// The unique host labels with nonzero coefficient for an owner label
    /// tuple, with the product coefficient.
    pub fn host_partner(&self, owner: &[CutLabel]) -> (Vec<CutLabel>, i8) {
        let mut sign = 1i8;
        let host = owner
            .iter()
            .map(|l| {
                let (prepared, s1) = self.paired_preparation(l.measured);
                let (measured, s2) = self.paired_measurement(l.prepared);
                sign *= s1 * s2;
                CutLabel { measured, prepared }
            })
            .collect();
        (host, sign)
    }
}

/// `𝓜_α(ρ) = Σ_i Tr(Π_{iα} ρ) Π_{iα}`.
pub fn measure_prepare(rho: &DensityOperator, axis: PauliAxis) -> DensityOperator {
    let mut acc = CMatrix::zeros(2, 2);
    for bit in 0..2 {
        let proj = BasisLabel::new(bit, axis).projector();
        let p = (&proj * rho.matrix()).trace();
        acc += proj * p;
    }
    DensityOperator::from_matrix_unchecked(acc)
}

/// `𝓜_z(ρ) + 𝓜_x(ρ) − Z 𝓜_y(ρ) Z`.
pub fn forged_identity(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.num_qubits() != 1 {
        return Err(Error::Dimension {
            expected: 2,
            found: rho.dim(),
        });
    }
    let z = Pauli::Z.matrix();
    let my = measure_prepare(rho, PauliAxis::Y);
    let flipped = &z * my.matrix() * &z;
    let sum = measure_prepare(rho, PauliAxis::Z).matrix()
        + measure_prepare(rho, PauliAxis::X).matrix()
        - flipped;
    Ok(DensityOperator::from_matrix_unchecked(sum))
}

/// The same channel written through the transition matrix:
/// `Σ M_{jβ,iα} Tr(Π_{iα} ρ) Π_{jβ}`.
pub fn forged_identity_by_labels(rho: &DensityOperator, m: &TransitionMatrix) -> DensityOperator {
    let mut acc = CMatrix::zeros(2, 2);
    for meas in BasisLabel::all() {
        let p = (meas.projector() * rho.matrix()).trace();
        for prep in BasisLabel::all() {
            let e = m.get(prep, meas);
            if e != 0 {
                acc += prep.projector() * (p * f64::from(e));
            }
        }
    }
    DensityOperator::from_matrix_unchecked(acc)
}

/// Subnormalized output of a local program for one label tuple, on the
/// program's data qubits. The trace is the Born weight of the measured
/// labels.
pub fn run_branch(program: &LocalProgram, labels: &[CutLabel]) -> Result<DensityOperator> {
    if labels.len() != program.cuts {
        return Err(Error::PlanMismatch(format!(
            "{} labels for {} cut(s)",
            labels.len(),
            program.cuts
        )));
    }
    let mut rho = crate::qsim::PureState::product(&program.initial).to_density();
    for step in &program.steps {
        match step {
            Step::Gate(g) => rho.apply(g)?,
            Step::Measure { cut, qubit } => {
                let label = labels[*cut].measured;
                rho = rho
                    .project(ProjectorSpec::new(label.axis, label.bit, *qubit))?
                    .0;
            }
            Step::Prepare { cut, qubit } => {
                rho = rho.replace_qubit(*qubit, labels[*cut].prepared)?;
            }
        }
    }
    rho.partial_trace(&program.output)
}

/// Alias of [`run_branch`] for the owner side with one cut: prepare `(l, ν)`,
/// measure `(i, α)`.
pub fn alice_branch(
    program: &LocalProgram,
    prepared: BasisLabel,
    measured: BasisLabel,
) -> Result<DensityOperator> {
    run_branch(program, &[CutLabel { measured, prepared }])
}

/// Alias of [`run_branch`] for the host side with one cut: prepare `(j, β)`,
/// measure `(k, μ)`.
pub fn bob_branch(
    program: &LocalProgram,
    prepared: BasisLabel,
    measured: BasisLabel,
) -> Result<DensityOperator> {
    run_branch(program, &[CutLabel { measured, prepared }])
}

/// All `36^L` branch states of one party, indexed by
/// [`CutLabel::tuple_index`].
#[derive(Clone, Debug)]
pub struct BranchSet {
    pub party: Party,
    pub cuts: usize,
    pub states: Vec<Option<DensityOperator>>,
}

impl BranchSet {
    pub fn enumerate(program: &LocalProgram) -> Result<BranchSet> {
        let count = 36usize.pow(program.cuts as u32);
        let states = (0..count)
            .into_par_iter()
            .map(|k| run_branch(program, &CutLabel::tuple_from_index(k, program.cuts)).map(Some))
            .collect::<Result<Vec<_>>>()?;
        Ok(BranchSet {
            party: program.party,
            cuts: program.cuts,
            states,
        })
    }

    pub fn get(&self, labels: &[CutLabel]) -> Result<&DensityOperator> {
        self.states
            .get(CutLabel::tuple_index(labels))
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::MissingBranch(format!("{} {:?}", self.party, labels)))
    }
}

/// Owner/host pairs with nonzero transition coefficient, in owner-index order:
/// `(owner tuple index, host tuple index, sign)`.
pub fn paired_indices(cuts: usize, m: &TransitionMatrix) -> Vec<(usize, usize, i8)> {
    CutLabel::all_tuples(cuts)
        .enumerate()
        .map(|(k, owner)| {
            let (host, sign) = m.host_partner(&owner);
            (k, CutLabel::tuple_index(&host), sign)
        })
        .collect()
}

fn owner_host<'a>(
    plan_owner: Party,
    alice: &'a BranchSet,
    bob: &'a BranchSet,
) -> (&'a BranchSet, &'a BranchSet) {
    match plan_owner {
        Party::Alice => (alice, bob),
        Party::Bob => (bob, alice),
    }
}

/// `Σ M·M ρ(A|·) ⊗ ρ(B|·)` over all label tuples, Alice on the low qubits.
/// Only the pairs with a nonzero coefficient contribute; they are found from
/// the nonzero pattern of `M`.
pub fn recombine_exact(
    owner: Party,
    alice: &BranchSet,
    bob: &BranchSet,
    m: &TransitionMatrix,
) -> Result<DensityOperator> {
    if alice.cuts != bob.cuts {
        return Err(Error::PlanMismatch(
            "branch sets disagree on the cut count".into(),
        ));
    }
    let (own, host) = owner_host(owner, alice, bob);
    let mut acc: Option<CMatrix> = None;
    for (k, h, sign) in paired_indices(alice.cuts, m) {
        let owner_labels = CutLabel::tuple_from_index(k, alice.cuts);
        let host_labels = CutLabel::tuple_from_index(h, alice.cuts);
        let ro = own.get(&owner_labels)?;
        let rh = host.get(&host_labels)?;
        let (ra, rb) = match owner {
            Party::Alice => (ro, rh),
            Party::Bob => (rh, ro),
        };
        let term = ra.tensor(rb).into_matrix() * c(f64::from(sign), 0.0);
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    let rho = DensityOperator::from_matrix_unchecked(acc.expect("at least one label tuple"));
    let trace = rho.trace().re;
    if (trace - 1.0).abs() > 1e-10 {
        return Err(Error::TraceNotUnit(trace));
    }
    Ok(rho)
}

/// Brute-force double sum over all `36^L × 36^L` tuple pairs. Slow; kept to
/// confirm that [`recombine_exact`] drops only zero-coefficient pairs.
pub fn recombine_exhaustive(
    owner: Party,
    alice: &BranchSet,
    bob: &BranchSet,
    m: &TransitionMatrix,
) -> Result<DensityOperator> {
    let cuts = alice.cuts;
    let (own, host) = owner_host(owner, alice, bob);
    let dim = own.states[0].as_ref().map(|s| s.dim()).unwrap_or(1)
        * host.states[0].as_ref().map(|s| s.dim()).unwrap_or(1);
    let mut acc = CMatrix::zeros(dim, dim);
    for ol in CutLabel::all_tuples(cuts) {
        for hl in CutLabel::all_tuples(cuts) {
            let coef: i32 = ol
                .iter()
                .zip(&hl)
                .map(|(o, h)| i32::from(m.pair_coefficient(*o, *h)))
                .product();
            if coef == 0 {
                continue;
            }
            let (ro, rh) = (own.get(&ol)?, host.get(&hl)?);
            let (ra, rb) = match owner {
                Party::Alice => (ro, rh),
                Party::Bob => (rh, ro),
            };
            acc += ra.tensor(rb).into_matrix() * c(f64::from(coef), 0.0);
        }
    }
    Ok(DensityOperator::from_matrix_unchecked(acc))
}

/// Signed pairing of per-branch scalars: `Σ sign · a[owner] · b[host]`, with
/// `owner_values`/`host_values` indexed by each side's tuple index. Summed in
/// owner-index order.
pub fn recombine_scalars(
    cuts: usize,
    owner_values: &[f64],
    host_values: &[f64],
    m: &TransitionMatrix,
) -> Result<f64> {
    let count = 36usize.pow(cuts as u32);
    if owner_values.len() != count || host_values.len() != count {
        return Err(Error::MissingBranch(format!(
            "expected {count} values per side, got {} and {}",
            owner_values.len(),
            host_values.len()
        )));
    }
    Ok(paired_indices(cuts, m)
        .into_iter()
        .map(|(k, h, sign)| f64::from(sign) * owner_values[k] * host_values[h])
        .sum())
}

/// Raw `Tr(O ρ)` of each branch for a product of Paulis on the party's data
/// qubits.
pub fn branch_expectations(branches: &BranchSet, factors: &[(usize, Pauli)]) -> Result<Vec<f64>> {
    branches
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            s.as_ref()
                .ok_or_else(|| Error::MissingBranch(format!("{} tuple {k}", branches.party)))?
                .pauli_expectation(factors)
        })
        .collect()
}

/// `⟨O⟩` recombined from branch expectations, term by term.
pub fn recombine_expectation(
    observable: &Observable,
    owner: Party,
    alice: &BranchSet,
    bob: &BranchSet,
    alice_qubits: usize,
    m: &TransitionMatrix,
) -> Result<f64> {
    let mut total = 0.0;
    for (coef, pauli) in &observable.terms {
        let (fa, fb) = pauli.split(alice_qubits);
        let va = branch_expectations(alice, &fa)?;
        let vb = branch_expectations(bob, &fb)?;
        let (vo, vh) = match owner {
            Party::Alice => (&va, &vb),
            Party::Bob => (&vb, &va),
        };
        total += coef * recombine_scalars(alice.cuts, vo, vh, m)?;
    }
    Ok(total)
}

/// Everything produced by an exact cut run.
#[derive(Clone, Debug)]
pub struct ExactCut {
    pub plan: CutPlan,
    pub alice: LocalProgram,
    pub bob: LocalProgram,
    pub alice_branches: BranchSet,
    pub bob_branches: BranchSet,
}

impl ExactCut {
    pub fn run(circuit: &PartitionedCircuit, plan: &CutPlan) -> Result<ExactCut> {
        let (alice, bob) = split_local(circuit, plan)?;
        let (alice_branches, bob_branches) = rayon::join(
            || BranchSet::enumerate(&alice),
            || BranchSet::enumerate(&bob),
        );
        Ok(ExactCut {
            plan: plan.clone(),
            alice,
            bob,
            alice_branches: alice_branches?,
            bob_branches: bob_branches?,
        })
    }

    pub fn state(&self) -> Result<DensityOperator> {
        recombine_exact(
            self.plan.owner,
            &self.alice_branches,
            &self.bob_branches,
            &TransitionMatrix::new(),
        )
    }

    pub fn expectation(&self, observable: &Observable) -> Result<f64> {
        recombine_expectation(
            observable,
            self.plan.owner,
            &self.alice_branches,
            &self.bob_branches,
            self.alice.data_qubits,
            &TransitionMatrix::new(),
        )
    }
}
