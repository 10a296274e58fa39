//! Dense statevector simulation with an instrumented circuit-evaluation counter.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, so qubit 0 is the most
//! significant bit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, DEFAULT_QUBIT_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Gates supported by the simulator.
///
/// `G1` mixes `|01>` and `|10>` of `qubits = [a, b]`:
/// `|01> -> cos(θ/2)|01> + sin(θ/2)|10>`.
/// `G2` rotates within `span{|0011>, |1100>}` of `qubits = [a, b, c, d]`:
/// `|0011> -> cos(θ/2)|0011> + sin(θ/2)|1100>`, identity elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, theta: f64 },
    H { qubit: usize },
    Cnot { control: usize, target: usize },
    G1 { qubits: [usize; 2], theta: f64 },
    G2 { qubits: [usize; 4], theta: f64 },
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::Ry { qubit, .. } | Gate::H { qubit } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::G1 { qubits, .. } => qubits.to_vec(),
            Gate::G2 { qubits, .. } => qubits.to_vec(),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { theta, .. } | Gate::G1 { theta, .. } | Gate::G2 { theta, .. } => {
                Some(theta)
            }
            Gate::H { .. } | Gate::Cnot { .. } => None,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        self.angle().is_some()
    }
}

impl StateVector {
    /// Computational basis state; `bits[q]` is qubit `q`.
    pub fn basis(n_qubits: usize, bits: &str) -> Result<Self> {
        if n_qubits == 0 || n_qubits > DEFAULT_QUBIT_CAP {
            return Err(Error::TooManyQubits {
                n_qubits,
                cap: DEFAULT_QUBIT_CAP,
            });
        }
        if bits.len() != n_qubits || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::InvalidBitstring(bits.to_string()));
        }
        let index = bits
            .chars()
            .fold(0usize, |acc, c| (acc << 1) | usize::from(c == '1'));
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Builds a state from raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                what: "amplitude count",
                expected: 1 << n_qubits,
                got: amps.len(),
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &q) in targets.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
            if targets[..i].contains(&q) {
                return Err(Error::RepeatedTarget);
            }
        }
        Ok(())
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.check_targets(&gate.targets())?;
        match *gate {
            Gate::Ry { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let b = self.bit(qubit);
                self.rotate_pairs(b, 0, b, c, s);
            }
            Gate::H { qubit } => {
                let b = self.bit(qubit);
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..self.amps.len() {
                    if i & b == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | b]);
                        self.amps[i] = (a0 + a1) * r;
                        self.amps[i | b] = (a0 - a1) * r;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (cb, tb) = (self.bit(control), self.bit(target));
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            Gate::G1 { qubits, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let (ba, bb) = (self.bit(qubits[0]), self.bit(qubits[1]));
                self.rotate_pairs(ba | bb, bb, ba, c, s);
            }
            Gate::G2 { qubits, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let hi = self.bit(qubits[0]) | self.bit(qubits[1]);
                let lo = self.bit(qubits[2]) | self.bit(qubits[3]);
                self.rotate_pairs(hi | lo, lo, hi, c, s);
            }
        }
        Ok(())
    }

    /// For every index with all `mask` bits clear, rotates the amplitude pair
    /// `(base | from, base | to)` by `[[c, -s], [s, c]]`.
    fn rotate_pairs(&mut self, mask: usize, from: usize, to: usize, c: f64, s: f64) {
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let (i, j) = (base | from, base | to);
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = a0 * c - a1 * s;
            self.amps[j] = a0 * s + a1 * c;
        }
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.apply(g))
    }

    /// `<self|H|self>` without touching any counter.
    fn expectation_uncounted(&self, h: &Hamiltonian) -> Result<f64> {
        if h.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "hamiltonian qubit count",
                expected: self.n_qubits,
                got: h.n_qubits(),
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for (term, mask) in h.terms().iter().zip(h.masks()) {
            let x = mask.x as usize;
            let z = mask.z as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, amp) in self.amps.iter().enumerate() {
                let v = self.amps[b ^ x].conj() * amp;
                if (b & z).count_ones() % 2 == 0 {
                    acc += v;
                } else {
                    acc -= v;
                }
            }
            total += acc * mask.y_phase() * term.coeff;
            scale += term.coeff.abs();
        }
        debug_assert!(
            total.im.abs() <= 1e-10 * scale.max(1.0),
            "imaginary residue {} in expectation",
            total.im
        );
        Ok(total.re)
    }
}

/// Counts circuit evaluations: one per expectation value or overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounter {
    count: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn merge(&mut self, other: EvalCounter) {
        self.count += other.count;
    }

    /// `<s|H|s>`; one evaluation regardless of term count.
    pub fn expectation(&mut self, s: &StateVector, h: &Hamiltonian) -> Result<f64> {
        let e = s.expectation_uncounted(h)?;
        self.count += 1;
        Ok(e)
    }

    /// `|<a|b>|^2`; one evaluation.
    pub fn overlap(&mut self, a: &StateVector, b: &StateVector) -> Result<f64> {
        if a.n_qubits != b.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "overlap qubit count",
                expected: a.n_qubits,
                got: b.n_qubits,
            });
        }
        let inner: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
        self.count += 1;
        Ok(inner.norm_sqr())
    }
}

/// Energy for monitoring and benchmarking only; not a counted circuit evaluation.
pub fn monitor_energy(s: &StateVector, h: &Hamiltonian) -> Result<f64> {
    s.expectation_uncounted(h)
}
