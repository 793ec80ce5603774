use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use super::{c, max_abs_diff, CMatrix, Pauli, CHECK_TOL};
use crate::error::{Error, Result};

/// A one- or two-qubit unitary bound to target qubits.
///
/// `name` and `params` record how the gate was built so circuits can be
/// written back out; `matrix` is authoritative for simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGate {
    pub name: String,
    pub params: Vec<f64>,
    pub matrix: CMatrix,
    pub targets: Vec<usize>,
}

impl UnitaryGate {
    /// Builds a gate from an explicit matrix, checking arity, distinct targets
    /// and unitarity.
    pub fn new(name: &str, params: Vec<f64>, matrix: CMatrix, targets: Vec<usize>) -> Result<Self> {
        let arity = targets.len();
        if !(1..=2).contains(&arity) {
            return Err(Error::Arity(arity));
        }
        if arity == 2 && targets[0] == targets[1] {
            return Err(Error::DuplicateTarget(targets[0]));
        }
        let dim = 1usize << arity;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > CHECK_TOL {
            return Err(Error::NotUnitary {
                name: name.to_string(),
                deviation,
            });
        }
        Ok(UnitaryGate {
            name: name.to_string(),
            params,
            matrix,
            targets,
        })
    }

    /// Builds a gate from the named vocabulary.
    ///
    /// Names: `i x y z h s sdg t tdg rx ry rz u cnot cx cz swap crz
    /// controlled-u unitary`. `u` and `unitary` take an explicit matrix;
    /// `controlled-u` takes the 2×2 block applied when the control is set.
    pub fn named(
        name: &str,
        params: &[f64],
        matrix: Option<CMatrix>,
        targets: Vec<usize>,
    ) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        let need = |n: usize| -> Result<()> {
            if params.len() != n {
                Err(Error::GateParams {
                    name: lower.clone(),
                    expected: n,
                    found: params.len(),
                })
            } else {
                Ok(())
            }
        };
        let arity = match lower.as_str() {
            "cnot" | "cx" | "cz" | "swap" | "crz" | "controlled-u" => 2,
            "unitary" => matrix
                .as_ref()
                .map(|m| if m.nrows() == 4 { 2 } else { 1 })
                .unwrap_or(0),
            "i" | "x" | "y" | "z" | "h" | "s" | "sdg" | "t" | "tdg" | "rx" | "ry" | "rz" | "u" => 1,
            _ => return Err(Error::UnknownGate(name.to_string())),
        };
        if arity != 0 && targets.len() != arity {
            return Err(Error::Arity(targets.len()));
        }
        let m = match lower.as_str() {
            "i" => Pauli::I.matrix(),
            "x" => Pauli::X.matrix(),
            "y" => Pauli::Y.matrix(),
            "z" => Pauli::Z.matrix(),
            "h" => {
                let h = FRAC_1_SQRT_2;
                DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
            }
            "s" => phase(std::f64::consts::FRAC_PI_2),
            "sdg" => phase(-std::f64::consts::FRAC_PI_2),
            "t" => phase(std::f64::consts::FRAC_PI_4),
            "tdg" => phase(-std::f64::consts::FRAC_PI_4),
            "rx" => {
                need(1)?;
                rx(params[0])
            }
            "ry" => {
                need(1)?;
                ry(params[0])
            }
            "rz" => {
                need(1)?;
                rz(params[0])
            }
            "cnot" | "cx" => controlled(&Pauli::X.matrix()),
            "cz" => controlled(&Pauli::Z.matrix()),
            "swap" => swap_matrix(),
            "crz" => {
                need(1)?;
                controlled(&rz(params[0]))
            }
            "controlled-u" => {
                let block = matrix.ok_or_else(|| Error::MissingMatrix(lower.clone()))?;
                if block.nrows() != 2 || block.ncols() != 2 {
                    return Err(Error::Dimension {
                        expected: 2,
                        found: block.nrows(),
                    });
                }
                if unitarity_deviation(&block) > CHECK_TOL {
                    return Err(Error::NotUnitary {
                        name: lower.clone(),
                        deviation: unitarity_deviation(&block),
                    });
                }
                let full = controlled(&block);
                return UnitaryGate::new(&lower, params.to_vec(), full, targets).map(|mut g| {
                    g.params = Vec::new();
                    g
                });
            }
            "u" | "unitary" => matrix.ok_or_else(|| Error::MissingMatrix(lower.clone()))?,
            _ => unreachable!(),
        };
        UnitaryGate::new(&lower, params.to_vec(), m, targets)
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    /// Same operation bound to different qubits.
    pub fn retarget(&self, targets: Vec<usize>) -> Result<Self> {
        UnitaryGate::new(
            &self.name,
            self.params.clone(),
            self.matrix.clone(),
            targets,
        )
    }

    pub fn adjoint(&self) -> UnitaryGate {
        UnitaryGate {
            name: format!("{}^dg", self.name),
            params: self.params.clone(),
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
        }
    }

    /// For `controlled-u` gates, the 2×2 block applied when the control is set.
    pub fn controlled_block(&self) -> Option<CMatrix> {
        if self.name == "controlled-u" {
            Some(self.matrix.view((2, 2), (2, 2)).into_owned())
        } else {
            None
        }
    }

    pub fn h(q: usize) -> Self {
        Self::named("h", &[], None, vec![q]).expect("static gate")
    }
    pub fn x(q: usize) -> Self {
        Self::named("x", &[], None, vec![q]).expect("static gate")
    }
    pub fn z(q: usize) -> Self {
        Self::named("z", &[], None, vec![q]).expect("static gate")
    }
    pub fn s(q: usize) -> Self {
        Self::named("s", &[], None, vec![q]).expect("static gate")
    }
    pub fn rz(theta: f64, q: usize) -> Self {
        Self::named("rz", &[theta], None, vec![q]).expect("static gate")
    }
    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        Self::named("cnot", &[], None, vec![control, target])
    }
    pub fn cz(a: usize, b: usize) -> Result<Self> {
        Self::named("cz", &[], None, vec![a, b])
    }
    pub fn swap(a: usize, b: usize) -> Result<Self> {
        Self::named("swap", &[], None, vec![a, b])
    }
    pub fn crz(theta: f64, control: usize, target: usize) -> Result<Self> {
        Self::named("crz", &[theta], None, vec![control, target])
    }
    pub fn controlled_u(block: CMatrix, control: usize, target: usize) -> Result<Self> {
        Self::named("controlled-u", &[], Some(block), vec![control, target])
    }
}

/// `max |(U†U − I)_{rc}|`.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    let id = CMatrix::identity(m.nrows(), m.ncols());
    max_abs_diff(&prod, &id)
}

/// Rejects `m` unless `U†U = I` within the construction tolerance.
pub fn unitary_check(name: &str, m: &CMatrix) -> Result<()> {
    let deviation = unitarity_deviation(m);
    if deviation > CHECK_TOL {
        return Err(Error::NotUnitary {
            name: name.to_string(),
            deviation,
        });
    }
    Ok(())
}

fn phase(angle: f64) -> CMatrix {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(angle.cos(), angle.sin()),
        ],
    )
}

fn rx(theta: f64) -> CMatrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)])
}

fn ry(theta: f64) -> CMatrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)])
}

fn rz(theta: f64) -> CMatrix {
    let half = theta / 2.0;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(half.cos(), -half.sin()),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(half.cos(), half.sin()),
        ],
    )
}

fn controlled(block: &CMatrix) -> CMatrix {
    let mut m = CMatrix::identity(4, 4);
    m.view_mut((2, 2), (2, 2)).copy_from(block);
    m
}

fn swap_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 2)] = c(1.0, 0.0);
    m[(2, 1)] = c(1.0, 0.0);
    m[(3, 3)] = c(1.0, 0.0);
    m
}
