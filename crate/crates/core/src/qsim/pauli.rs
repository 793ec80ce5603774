use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{c, CMatrix};

/// Measurement / preparation axis of a single qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    pub fn from_index(index: usize) -> PauliAxis {
        PauliAxis::ALL[index % 3]
    }

    /// Sign carried by the wire-cut decomposition: negative on the y axis.
    pub fn signature(self) -> i32 {
        if self == PauliAxis::Y {
            -1
        } else {
            1
        }
    }

    pub fn pauli(self) -> Pauli {
        match self {
            PauliAxis::X => Pauli::X,
            PauliAxis::Y => Pauli::Y,
            PauliAxis::Z => Pauli::Z,
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        };
        f.write_str(s)
    }
}

/// Single-qubit Pauli operator, including the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn axis(self) -> Option<PauliAxis> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(PauliAxis::X),
            Pauli::Y => Some(PauliAxis::Y),
            Pauli::Z => Some(PauliAxis::Z),
        }
    }

    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }
}

/// A basis state `|i_α⟩`: outcome bit `i` along axis `α`.
///
/// The six labels are indexed `axis * 2 + bit` with axes ordered x, y, z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisLabel {
    pub bit: u8,
    pub axis: PauliAxis,
}

impl BasisLabel {
    pub const fn new(bit: u8, axis: PauliAxis) -> BasisLabel {
        BasisLabel { bit, axis }
    }

    pub fn all() -> [BasisLabel; 6] {
        std::array::from_fn(BasisLabel::from_index)
    }

    pub fn index(self) -> usize {
        self.axis.index() * 2 + self.bit as usize
    }

    pub fn from_index(index: usize) -> BasisLabel {
        BasisLabel {
            bit: (index % 2) as u8,
            axis: PauliAxis::from_index(index / 2),
        }
    }

    /// The other eigenstate on the same axis.
    pub fn flipped(self) -> BasisLabel {
        BasisLabel {
            bit: 1 - self.bit,
            axis: self.axis,
        }
    }

    pub fn amplitudes(self) -> [Complex64; 2] {
        pauli_eigenstate(self.axis, self.bit)
    }

    /// Rank-1 projector `|i_α⟩⟨i_α|`.
    pub fn projector(self) -> CMatrix {
        outer(&self.amplitudes(), &self.amplitudes())
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.bit, self.axis)
    }
}

/// Projective measurement element `Π_{iα}` on one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectorSpec {
    pub label: BasisLabel,
    pub target: usize,
}

impl ProjectorSpec {
    pub fn new(axis: PauliAxis, bit: u8, target: usize) -> ProjectorSpec {
        ProjectorSpec {
            label: BasisLabel::new(bit, axis),
            target,
        }
    }
}

/// Amplitudes of the Pauli eigenstates.
///
/// `|0_z⟩=|0⟩`, `|1_z⟩=|1⟩`, `|0_x⟩=(|0⟩+|1⟩)/√2`, `|1_x⟩=(|0⟩−|1⟩)/√2`,
/// `|0_y⟩=(|0⟩+i|1⟩)/√2`, `|1_y⟩=(|0⟩−i|1⟩)/√2`.
pub fn pauli_eigenstate(axis: PauliAxis, bit: u8) -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if bit == 0 { 1.0 } else { -1.0 };
    match axis {
        PauliAxis::Z => {
            if bit == 0 {
                [c(1.0, 0.0), c(0.0, 0.0)]
            } else {
                [c(0.0, 0.0), c(1.0, 0.0)]
            }
        }
        PauliAxis::X => [c(h, 0.0), c(sign * h, 0.0)],
        PauliAxis::Y => [c(h, 0.0), c(0.0, sign * h)],
    }
}

/// `|a⟩⟨b|` for single-qubit vectors.
pub fn outer(a: &[Complex64; 2], b: &[Complex64; 2]) -> CMatrix {
    DMatrix::from_fn(2, 2, |r, col| a[r] * b[col].conj())
}

/// Unitary rotating the eigenbasis of `axis` onto the computational basis,
/// so that measuring Z afterwards measures `axis`.
pub fn basis_change(axis: PauliAxis) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match axis {
        PauliAxis::Z => Pauli::I.matrix(),
        PauliAxis::X => {
            DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
        }
        // rows are ⟨0_y| and ⟨1_y|
        PauliAxis::Y => {
            DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, -h), c(h, 0.0), c(0.0, h)])
        }
    }
}
