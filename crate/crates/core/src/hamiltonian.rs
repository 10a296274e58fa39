//! Qubit Hamiltonians as ordered sums of weighted Pauli strings.
//!
//! Qubit 0 is the leftmost character of a Pauli string and the most
//! significant bit of a basis-state index. Term order is the ingestion
//! order and is preserved through serialization.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on qubit count for dense simulation and diagonalization.
pub const DEFAULT_QUBIT_CAP: usize = 16;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(ch: char) -> Option<Self> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Bit masks describing how a Pauli string acts on computational basis states:
/// `P|b> = i^n_y (-1)^popcount(b & z) |b ^ x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliMask {
    pub x: u64,
    pub z: u64,
    pub n_y: u32,
}

impl PauliMask {
    /// Phase `i^n_y` as a complex number.
    pub fn y_phase(&self) -> Complex64 {
        match self.n_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub pauli: String,
    pub coeff: f64,
}

impl PauliTerm {
    pub fn new(pauli: impl Into<String>, coeff: f64) -> Self {
        Self {
            pauli: pauli.into(),
            coeff,
        }
    }

    pub fn mask(&self) -> PauliMask {
        let n = self.pauli.len();
        let mut mask = PauliMask { x: 0, z: 0, n_y: 0 };
        for (q, ch) in self.pauli.chars().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            match ch {
                'X' => mask.x |= bit,
                'Z' => mask.z |= bit,
                'Y' => {
                    mask.x |= bit;
                    mask.z |= bit;
                    mask.n_y += 1;
                }
                _ => {}
            }
        }
        mask
    }

    pub fn is_identity(&self) -> bool {
        self.pauli.chars().all(|c| c == 'I')
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefEnergies {
    pub hf: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    masks: Vec<PauliMask>,
    pub family_id: String,
    pub instance_label: String,
    pub ref_energies: Option<RefEnergies>,
}

#[derive(Serialize, Deserialize)]
struct HamiltonianFile {
    format_version: u32,
    n_qubits: usize,
    family_id: String,
    instance_label: String,
    terms: Vec<PauliTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_energies: Option<RefEnergies>,
}

impl Hamiltonian {
    /// Validates and builds a Hamiltonian. Terms keep the given order.
    pub fn new(
        n_qubits: usize,
        terms: Vec<PauliTerm>,
        family_id: impl Into<String>,
        instance_label: impl Into<String>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be positive".into()));
        }
        if n_qubits > 63 {
            return Err(Error::TooManyQubits {
                n_qubits,
                cap: 63,
            });
        }
        if terms.is_empty() {
            return Err(Error::EmptyTerms);
        }
        let mut seen = HashSet::with_capacity(terms.len());
        for term in &terms {
            if let Some(ch) = term.pauli.chars().find(|&c| Pauli::from_char(c).is_none()) {
                return Err(Error::IllegalPauli {
                    pauli: term.pauli.clone(),
                    ch,
                });
            }
            let len = term.pauli.chars().count();
            if len != n_qubits {
                return Err(Error::PauliLength {
                    pauli: term.pauli.clone(),
                    len,
                    expected: n_qubits,
                });
            }
            if !term.coeff.is_finite() {
                return Err(Error::NonFiniteCoeff(term.pauli.clone()));
            }
            if !seen.insert(term.pauli.as_str()) {
                return Err(Error::DuplicatePauli(term.pauli.clone()));
            }
        }
        let masks = terms.iter().map(PauliTerm::mask).collect();
        Ok(Self {
            n_qubits,
            terms,
            masks,
            family_id: family_id.into(),
            instance_label: instance_label.into(),
            ref_energies: None,
        })
    }

    pub fn with_ref_energies(mut self, refs: RefEnergies) -> Self {
        self.ref_energies = Some(refs);
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub(crate) fn masks(&self) -> &[PauliMask] {
        &self.masks
    }

    /// Pauli strings in term order.
    pub fn term_order(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.pauli.clone()).collect()
    }

    /// Coefficient of `pauli`, or `None` when the term is absent.
    pub fn coeff_of(&self, pauli: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.pauli == pauli).map(|t| t.coeff)
    }

    pub fn exact_reference(&self) -> Option<f64> {
        self.ref_energies.map(|r| r.exact)
    }

    /// Returns `self + c·I`. An existing identity term absorbs the shift;
    /// otherwise an identity term is appended. Reference energies shift too.
    pub fn shifted(&self, c: f64) -> Self {
        let identity = "I".repeat(self.n_qubits);
        let mut out = self.clone();
        match out.terms.iter().position(|t| t.pauli == identity) {
            Some(i) => out.terms[i].coeff += c,
            None => {
                out.terms.push(PauliTerm::new(identity, c));
                out.masks.push(PauliMask { x: 0, z: 0, n_y: 0 });
            }
        }
        if let Some(r) = out.ref_energies.as_mut() {
            r.hf += c;
            r.exact += c;
        }
        out
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let file: HamiltonianFile = serde_json::from_slice(bytes)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(file.format_version));
        }
        let mut h = Hamiltonian::new(
            file.n_qubits,
            file.terms,
            file.family_id,
            file.instance_label,
        )?;
        h.ref_energies = file.ref_energies;
        Ok(h)
    }

    pub fn to_json_string(&self) -> String {
        let file = HamiltonianFile {
            format_version: FORMAT_VERSION,
            n_qubits: self.n_qubits,
            family_id: self.family_id.clone(),
            instance_label: self.instance_label.clone(),
            terms: self.terms.clone(),
            ref_energies: self.ref_energies,
        };
        serde_json::to_string_pretty(&file).expect("hamiltonian serialization is infallible")
    }

    /// Dense `2^n × 2^n` matrix assembled from the Pauli masks.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > cap {
            return Err(Error::TooManyQubits {
                n_qubits: self.n_qubits,
                cap,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (term, mask) in self.terms.iter().zip(&self.masks) {
            let phase = mask.y_phase() * term.coeff;
            for col in 0..dim {
                let row = col ^ mask.x as usize;
                let sign = if (col as u64 & mask.z).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                m[(row, col)] += phase * sign;
            }
        }
        Ok(m)
    }

    fn is_real(&self) -> bool {
        self.masks.iter().all(|m| m.n_y % 2 == 0)
    }
}

/// Parses a Hamiltonian JSON file.
pub fn parse_hamiltonian(bytes: &[u8]) -> Result<Hamiltonian> {
    Hamiltonian::from_json_bytes(bytes)
}

/// Open-chain transverse-field Ising model
/// `-J Σ Z_i Z_{i+1} - g Σ X_i`, ZZ block first then X block.
pub fn tfim(n: usize, j: f64, g: f64) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "tfim needs at least 2 qubits, got {n}"
        )));
    }
    let mut terms = Vec::with_capacity(2 * n - 1);
    for i in 0..n - 1 {
        let mut s = vec!['I'; n];
        s[i] = 'Z';
        s[i + 1] = 'Z';
        terms.push(PauliTerm::new(s.into_iter().collect::<String>(), -j));
    }
    for i in 0..n {
        let mut s = vec!['I'; n];
        s[i] = 'X';
        terms.push(PauliTerm::new(s.into_iter().collect::<String>(), -g));
    }
    Hamiltonian::new(n, terms, format!("tfim-n{n}"), format!("J={j},g={g}"))
}

/// Smallest eigenvalue of the dense matrix, for `n_qubits <= DEFAULT_QUBIT_CAP`.
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    exact_ground_energy_capped(h, DEFAULT_QUBIT_CAP)
}

pub fn exact_ground_energy_capped(h: &Hamiltonian, cap: usize) -> Result<f64> {
    let m = h.to_dense(cap)?;
    let eigs = if h.is_real() {
        m.map(|c| c.re).symmetric_eigenvalues()
    } else {
        m.symmetric_eigenvalues()
    };
    Ok(eigs.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Hamiltonian coefficients in a fixed family term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub values: Vec<f64>,
    pub term_order: Vec<String>,
}

impl ContextVector {
    pub fn new(values: Vec<f64>, term_order: Vec<String>) -> Result<Self> {
        if values.len() != term_order.len() {
            return Err(Error::DimensionMismatch {
                what: "context values vs term order",
                expected: term_order.len(),
                got: values.len(),
            });
        }
        Ok(Self { values, term_order })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Coefficients of `h` in `family_order`; absent terms map to 0.
pub fn context_of(h: &Hamiltonian, family_order: &[String]) -> Result<ContextVector> {
    let mut seen = HashSet::with_capacity(family_order.len());
    for p in family_order {
        if !seen.insert(p.as_str()) {
            return Err(Error::DuplicatePauli(p.clone()));
        }
    }
    let values = family_order
        .iter()
        .map(|p| h.coeff_of(p).unwrap_or(0.0))
        .collect();
    Ok(ContextVector {
        values,
        term_order: family_order.to_vec(),
    })
}
