use num_complex::Complex64;

use super::CMatrix;

/// Applies a `2^k × 2^k` matrix to the qubits `targets` of a strided view of
/// `2^n` amplitudes. `targets[0]` is the most significant bit of the local
/// index. The matrix need not be unitary.
pub(crate) fn apply_strided(
    data: &mut [Complex64],
    offset: usize,
    stride: usize,
    num_qubits: usize,
    targets: &[usize],
    matrix: &CMatrix,
) {
    let k = targets.len();
    let local_dim = 1usize << k;
    debug_assert_eq!(matrix.nrows(), local_dim);
    let masks: Vec<usize> = targets.iter().map(|&t| 1usize << t).collect();
    let target_mask = masks.iter().fold(0, |acc, m| acc | m);

    // offsets of every local basis state relative to a base index
    let local_offsets: Vec<usize> = (0..local_dim)
        .map(|local| {
            (0..k)
                .filter(|&j| (local >> (k - 1 - j)) & 1 == 1)
                .fold(0, |acc, j| acc | masks[j])
        })
        .collect();

    let mut buf = vec![Complex64::new(0.0, 0.0); local_dim];
    for base in 0..(1usize << num_qubits) {
        if base & target_mask != 0 {
            continue;
        }
        for (slot, off) in buf.iter_mut().zip(&local_offsets) {
            *slot = data[offset + (base | off) * stride];
        }
        for (r, off) in local_offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, amp) in buf.iter().enumerate() {
                acc += matrix[(r, col)] * amp;
            }
            data[offset + (base | off) * stride] = acc;
        }
    }
}

/// `M ρ M†` on a column-major `dim × dim` buffer.
pub(crate) fn conjugate_in_place(
    data: &mut [Complex64],
    num_qubits: usize,
    targets: &[usize],
    matrix: &CMatrix,
) {
    let dim = 1usize << num_qubits;
    // left multiplication acts on every column
    for col in 0..dim {
        apply_strided(data, col * dim, 1, num_qubits, targets, matrix);
    }
    // right multiplication by M† acts on every row as M* v
    let conj = matrix.map(|z| z.conj());
    for row in 0..dim {
        apply_strided(data, row, dim, num_qubits, targets, &conj);
    }
}

/// `M ρ` only (used for expectation values).
pub(crate) fn left_multiply_in_place(
    data: &mut [Complex64],
    num_qubits: usize,
    targets: &[usize],
    matrix: &CMatrix,
) {
    let dim = 1usize << num_qubits;
    for col in 0..dim {
        apply_strided(data, col * dim, 1, num_qubits, targets, matrix);
    }
}
