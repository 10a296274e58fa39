//! Circuit templates: the RY-linear hardware-efficient ansatz and the
//! Givens singles/doubles ansatz.
//!
//! Spin orbitals are interleaved: orbital `2k` is spatial orbital `k` with
//! spin alpha, `2k + 1` the beta partner. The reference determinant occupies
//! the first `n_electrons` spin orbitals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnsatzKind {
    Hea {
        layers: usize,
    },
    Gsd {
        n_electrons: usize,
        n_spin_orbitals: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub n_qubits: usize,
    pub reference_bits: String,
}

/// How a parameter enters the circuit; selects the gradient rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Ry,
    Givens,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExcitationList {
    pub singles: Vec<(usize, usize)>,
    pub doubles: Vec<([usize; 2], [usize; 2])>,
}

impl ExcitationList {
    pub fn len(&self) -> usize {
        self.singles.len() + self.doubles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singles.is_empty() && self.doubles.is_empty()
    }
}

/// All spin-z preserving singles and doubles out of the reference determinant.
///
/// Singles are ordered by `(occupied, virtual)`, doubles by `(o1, o2, v1, v2)`.
pub fn enumerate_excitations(n_electrons: usize, n_spin_orbitals: usize) -> Result<ExcitationList> {
    if n_electrons == 0
        || n_electrons >= n_spin_orbitals
        || n_electrons % 2 != 0
        || n_spin_orbitals % 2 != 0
    {
        return Err(Error::InvalidArgument(format!(
            "need 0 < n_electrons < n_spin_orbitals, both even; got {n_electrons}e/{n_spin_orbitals}so"
        )));
    }
    let occ = 0..n_electrons;
    let virt = n_electrons..n_spin_orbitals;
    let spin = |p: usize| p % 2;

    let mut list = ExcitationList::default();
    for o in occ.clone() {
        for v in virt.clone() {
            if spin(o) == spin(v) {
                list.singles.push((o, v));
            }
        }
    }
    for o1 in occ.clone() {
        for o2 in o1 + 1..n_electrons {
            for v1 in virt.clone() {
                for v2 in v1 + 1..n_spin_orbitals {
                    if spin(o1) + spin(o2) == spin(v1) + spin(v2) {
                        list.doubles.push(([o1, o2], [v1, v2]));
                    }
                }
            }
        }
    }
    Ok(list)
}

impl AnsatzSpec {
    /// RY-linear HEA on `n_qubits` with `layers` entangling layers and an
    /// all-zeros reference.
    pub fn hea(n_qubits: usize, layers: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::InvalidArgument("HEA needs at least 2 qubits".into()));
        }
        Ok(Self {
            kind: AnsatzKind::Hea { layers },
            n_qubits,
            reference_bits: "0".repeat(n_qubits),
        })
    }

    /// Givens singles/doubles on the Hartree-Fock reference.
    pub fn gsd(n_electrons: usize, n_spin_orbitals: usize) -> Result<Self> {
        enumerate_excitations(n_electrons, n_spin_orbitals)?;
        let reference_bits = (0..n_spin_orbitals)
            .map(|p| if p < n_electrons { '1' } else { '0' })
            .collect();
        Ok(Self {
            kind: AnsatzKind::Gsd {
                n_electrons,
                n_spin_orbitals,
            },
            n_qubits: n_spin_orbitals,
            reference_bits,
        })
    }

    /// Checks the invariants of a deserialized spec.
    pub fn validate(&self) -> Result<()> {
        if self.reference_bits.len() != self.n_qubits
            || !self.reference_bits.chars().all(|c| c == '0' || c == '1')
        {
            return Err(Error::InvalidBitstring(self.reference_bits.clone()));
        }
        match self.kind {
            AnsatzKind::Hea { .. } if self.n_qubits < 2 => {
                Err(Error::InvalidArgument("HEA needs at least 2 qubits".into()))
            }
            AnsatzKind::Hea { .. } => Ok(()),
            AnsatzKind::Gsd {
                n_electrons,
                n_spin_orbitals,
            } => {
                enumerate_excitations(n_electrons, n_spin_orbitals)?;
                let ones = self.reference_bits.chars().filter(|&c| c == '1').count();
                if self.n_qubits != n_spin_orbitals || ones != n_electrons {
                    return Err(Error::InvalidArgument(
                        "GSD reference must have n_spin_orbitals bits with n_electrons ones".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            AnsatzKind::Hea { layers } => (layers + 1) * self.n_qubits,
            AnsatzKind::Gsd {
                n_electrons,
                n_spin_orbitals,
            } => enumerate_excitations(n_electrons, n_spin_orbitals)
                .map(|l| l.len())
                .unwrap_or(0),
        }
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let kind = match self.kind {
            AnsatzKind::Hea { .. } => ParamKind::Ry,
            AnsatzKind::Gsd { .. } => ParamKind::Givens,
        };
        vec![kind; self.param_count()]
    }

    /// Unrolls the template into gates, one parameter per parameterized gate.
    pub fn build_circuit(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        let d = self.param_count();
        if theta.len() != d {
            return Err(Error::DimensionMismatch {
                what: "parameter vector length",
                expected: d,
                got: theta.len(),
            });
        }
        let n = self.n_qubits;
        match self.kind {
            AnsatzKind::Hea { layers } => {
                let mut gates = Vec::with_capacity(d + layers * (n - 1));
                let mut params = theta.iter();
                let mut ry_layer = |gates: &mut Vec<Gate>| {
                    for qubit in 0..n {
                        let theta = *params.next().expect("length checked");
                        gates.push(Gate::Ry { qubit, theta });
                    }
                };
                ry_layer(&mut gates);
                for _ in 0..layers {
                    for q in 0..n - 1 {
                        gates.push(Gate::Cnot {
                            control: q,
                            target: q + 1,
                        });
                    }
                    ry_layer(&mut gates);
                }
                Ok(gates)
            }
            AnsatzKind::Gsd {
                n_electrons,
                n_spin_orbitals,
            } => {
                let ex = enumerate_excitations(n_electrons, n_spin_orbitals)?;
                let singles = ex.singles.iter().map(|&(o, v)| [v, o]);
                let doubles = ex.doubles.iter().map(|&([o1, o2], [v1, v2])| [v1, v2, o1, o2]);
                let mut params = theta.iter().copied();
                let mut gates: Vec<Gate> = singles
                    .map(|qubits| Gate::G1 {
                        qubits,
                        theta: params.next().expect("length checked"),
                    })
                    .collect();
                gates.extend(doubles.map(|qubits| Gate::G2 {
                    qubits,
                    theta: params.next().expect("length checked"),
                }));
                Ok(gates)
            }
        }
    }

    /// `U(θ)` applied to the reference basis state.
    pub fn prepare_state(&self, theta: &[f64]) -> Result<StateVector> {
        let gates = self.build_circuit(theta)?;
        let mut state = StateVector::basis(self.n_qubits, &self.reference_bits)?;
        state.apply_all(&gates)?;
        Ok(state)
    }
}

/// Returns `theta_source` unchanged as the warm start for `target`.
pub fn parameter_transfer(theta_source: &[f64], target: &AnsatzSpec) -> Result<Vec<f64>> {
    let d = target.param_count();
    if theta_source.len() != d {
        return Err(Error::DimensionMismatch {
            what: "transferred parameter length",
            expected: d,
            got: theta_source.len(),
        });
    }
    Ok(theta_source.to_vec())
}
