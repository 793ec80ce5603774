use std::fmt;

use crate::error::{Error, Result};
use crate::qsim::{DensityOperator, Pauli};

/// Tensor product of Paulis on global qubits; identity factors are dropped.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn new(mut factors: Vec<(usize, Pauli)>) -> Result<PauliString> {
        factors.retain(|f| f.1 != Pauli::I);
        factors.sort_by_key(|f| f.0);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Observable {
                spec: format!("{factors:?}"),
                reason: "qubit listed twice".into(),
            });
        }
        Ok(PauliString { factors })
    }

    pub fn identity() -> PauliString {
        PauliString::default()
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.factors.last().map(|f| f.0)
    }

    /// Splits into Alice and Bob factors with party-local indices.
    pub fn split(&self, alice_qubits: usize) -> (Vec<(usize, Pauli)>, Vec<(usize, Pauli)>) {
        let (a, b): (Vec<_>, Vec<_>) = self.factors.iter().partition(|f| f.0 < alice_qubits);
        (
            a,
            b.into_iter().map(|(q, p)| (q - alice_qubits, p)).collect(),
        )
    }

    fn parse(text: &str) -> Result<PauliString> {
        let bad = |reason: &str| Error::Observable {
            spec: text.to_string(),
            reason: reason.to_string(),
        };
        let text = text.trim();
        if text.is_empty() {
            return Err(bad("empty Pauli string"));
        }
        if text.chars().any(|ch| ch.is_ascii_digit()) {
            // explicit form: "Z0 Z1" or "X0,Y3"
            let mut factors = Vec::new();
            for token in text
                .split(|ch: char| ch.is_whitespace() || ch == ',')
                .filter(|t| !t.is_empty())
            {
                let mut chars = token.chars();
                let p = chars
                    .next()
                    .and_then(Pauli::from_char)
                    .ok_or_else(|| bad("expected I, X, Y or Z"))?;
                let q: usize = chars
                    .as_str()
                    .parse()
                    .map_err(|_| bad("expected a qubit index"))?;
                factors.push((q, p));
            }
            PauliString::new(factors)
        } else {
            let factors = text
                .chars()
                .enumerate()
                .map(|(q, ch)| {
                    Pauli::from_char(ch)
                        .map(|p| (q, p))
                        .ok_or_else(|| bad("expected I, X, Y or Z"))
                })
                .collect::<Result<Vec<_>>>()?;
            PauliString::new(factors)
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(q, p)| format!("{}{}", p.as_char(), q))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Real linear combination of Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub terms: Vec<(f64, PauliString)>,
}

impl Observable {
    pub fn single(p: PauliString) -> Observable {
        Observable {
            terms: vec![(1.0, p)],
        }
    }

    /// Parses `"ZZ"`, `"Z0 Z1"`, `"0.5*XX + -0.25*Z0"` and similar.
    /// Positional strings assign character `k` to global qubit `k`.
    pub fn parse(spec: &str) -> Result<Observable> {
        let mut terms = Vec::new();
        for raw in spec.split('+') {
            let raw = raw.trim();
            let (coef, body) = match raw.split_once('*') {
                Some((left, right)) => match left.trim().parse::<f64>() {
                    Ok(v) => (v, right),
                    Err(_) => (1.0, raw),
                },
                None => (1.0, raw),
            };
            if !coef.is_finite() {
                return Err(Error::Observable {
                    spec: spec.to_string(),
                    reason: "non-finite coefficient".into(),
                });
            }
            terms.push((coef, PauliString::parse(body)?));
        }
        Ok(Observable { terms })
    }

    /// Rejects terms touching qubits beyond the register.
    pub fn check_width(&self, num_qubits: usize) -> Result<()> {
        for (_, p) in &self.terms {
            if let Some(q) = p.max_qubit() {
                if q >= num_qubits {
                    return Err(Error::QubitOutOfRange {
                        index: q,
                        num_qubits,
                    });
                }
            }
        }
        Ok(())
    }

    /// Upper bound on the operator norm: `Σ|c_t|`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.0.abs()).sum()
    }

    /// `Tr(Oρ)` on the joint register (raw, no normalization).
    pub fn expectation(&self, rho: &DensityOperator) -> Result<f64> {
        self.terms
            .iter()
            .map(|(coef, p)| rho.pauli_expectation(p.factors()).map(|v| coef * v))
            .sum()
    }

    /// Single Pauli product with unit coefficient, if that is what this is.
    pub fn as_single_product(&self) -> Option<&PauliString> {
        match self.terms.as_slice() {
            [(coef, p)] if *coef == 1.0 => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(c, p)| format!("{c}*{p}")).collect();
        f.write_str(&parts.join(" + "))
    }
}
