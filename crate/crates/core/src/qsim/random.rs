//! Random states and unitaries for tests, benchmarks and circuit generation.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{c, CMatrix, DensityOperator, PureState};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    })
}

/// Haar-random `dim × dim` unitary (QR of a Ginibre matrix with phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn random_pure_state<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> PureState {
    let dim = 1usize << num_qubits;
    let v = ginibre(dim, 1, rng);
    let norm = v.norm();
    PureState::from_amplitudes(v.iter().map(|a| a / norm).collect())
        .expect("normalized by construction")
}

/// Random density operator of the given rank (`G G† / Tr`).
pub fn random_density<R: Rng + ?Sized>(
    num_qubits: usize,
    rank: usize,
    rng: &mut R,
) -> DensityOperator {
    let dim = 1usize << num_qubits;
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityOperator::from_matrix_unchecked(m / tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::max_abs_diff;
    use rand::SeedableRng;

    #[test]
    fn haar_is_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 4, 8] {
            let u = haar_unitary(dim, &mut rng);
            assert!(max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(dim, dim)) < 1e-12);
        }
    }
}
