use flowvqe_core::hamiltonian::{exact_ground_energy, Hamiltonian, PauliTerm};
use flowvqe_core::simulator::{monitor_energy, EvalCounter, Gate, StateVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat = Vec<Vec<Complex64>>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
        .collect()
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = vec![vec![c(0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn matvec(a: &Mat, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn pauli(ch: char) -> Mat {
    let i = Complex64::i();
    match ch {
        'I' => identity(2),
        'X' => vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]],
        'Y' => vec![vec![c(0.0), -i], vec![i, c(0.0)]],
        'Z' => vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]],
        _ => unreachable!(),
    }
}

/// Dense Hamiltonian from Kronecker products, qubit 0 leftmost.
fn dense_hamiltonian(n: usize, terms: &[(String, f64)]) -> Mat {
    let dim = 1 << n;
    let mut h = vec![vec![c(0.0); dim]; dim];
    for (p, coeff) in terms {
        let mut m = vec![vec![c(1.0)]];
        for ch in p.chars() {
            m = kron(&m, &pauli(ch));
        }
        for i in 0..dim {
            for j in 0..dim {
                h[i][j] += m[i][j] * coeff;
            }
        }
    }
    h
}

/// Single-qubit operator `u` on `qubit` of an `n`-qubit register.
fn embed_one(n: usize, qubit: usize, u: &Mat) -> Mat {
    let id = identity(2);
    let mut m = vec![vec![c(1.0)]];
    for q in 0..n {
        m = kron(&m, if q == qubit { u } else { &id });
    }
    m
}

fn ry(theta: f64) -> Mat {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co), c(-s)], vec![c(s), c(co)]]
}

/// Oracle matrix for a gate built from projectors and Kronecker products.
fn oracle(n: usize, gate: &Gate) -> Mat {
    let p0 = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]];
    let p1 = vec![vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]];
    match *gate {
        Gate::Ry { qubit, theta } => embed_one(n, qubit, &ry(theta)),
        Gate::H { qubit } => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            embed_one(n, qubit, &vec![vec![c(r), c(r)], vec![c(r), c(-r)]])
        }
        Gate::Cnot { control, target } => {
            let a = embed_one(n, control, &p0);
            let b = matmul(&embed_one(n, control, &p1), &embed_one(n, target, &pauli('X')));
            a.iter()
                .zip(&b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
                .collect()
        }
        Gate::G1 { qubits, theta } => {
            // rotation in span{|01>, |10>} of (a, b) written column by column
            let dim = 1 << n;
            let (s, co) = (theta / 2.0).sin_cos();
            let bit = |q: usize| 1usize << (n - 1 - q);
            let (ba, bb) = (bit(qubits[0]), bit(qubits[1]));
            let mut m = identity(dim);
            for base in 0..dim {
                if base & (ba | bb) != 0 {
                    continue;
                }
                let (i01, i10) = (base | bb, base | ba);
                m[i01][i01] = c(co);
                m[i10][i01] = c(s);
                m[i01][i10] = c(-s);
                m[i10][i10] = c(co);
            }
            m
        }
        Gate::G2 { qubits, theta } => {
            let dim = 1 << n;
            let (s, co) = (theta / 2.0).sin_cos();
            let bit = |q: usize| 1usize << (n - 1 - q);
            let hi = bit(qubits[0]) | bit(qubits[1]);
            let lo = bit(qubits[2]) | bit(qubits[3]);
            let mut m = identity(dim);
            for base in 0..dim {
                if base & (hi | lo) != 0 {
                    continue;
                }
                let (from, to) = (base | lo, base | hi);
                m[from][from] = c(co);
                m[to][from] = c(s);
                m[from][to] = c(-s);
                m[to][to] = c(co);
            }
            m
        }
    }
}

/// Matrix of the simulator's action, one basis column at a time.
fn simulated(n: usize, gate: &Gate) -> Mat {
    let dim = 1 << n;
    let mut cols = Vec::with_capacity(dim);
    for b in 0..dim {
        let bits: String = (0..n).map(|q| if b >> (n - 1 - q) & 1 == 1 { '1' } else { '0' }).collect();
        let mut s = StateVector::basis(n, &bits).unwrap();
        s.apply(gate).unwrap();
        cols.push(s.amplitudes().to_vec());
    }
    (0..dim).map(|i| (0..dim).map(|j| cols[j][i]).collect()).collect()
}

fn gate_zoo(rng: &mut ChaCha8Rng) -> Vec<Gate> {
    let mut a = || rng.random_range(-3.0..3.0);
    vec![
        Gate::Ry { qubit: 2, theta: a() },
        Gate::H { qubit: 0 },
        Gate::Cnot { control: 3, target: 1 },
        Gate::Cnot { control: 0, target: 2 },
        Gate::G1 { qubits: [1, 3], theta: a() },
        Gate::G1 { qubits: [2, 0], theta: a() },
        Gate::G2 { qubits: [0, 1, 2, 3], theta: a() },
        Gate::G2 { qubits: [3, 1, 0, 2], theta: a() },
    ]
}

#[test]
fn gates_match_kronecker_oracle_and_are_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 4;
    for gate in gate_zoo(&mut rng) {
        let u = simulated(n, &gate);
        let o = oracle(n, &gate);
        for i in 0..16 {
            for j in 0..16 {
                assert!((u[i][j] - o[i][j]).norm() < 1e-14, "{gate:?} entry ({i},{j})");
                let g: Complex64 = (0..16).map(|k| u[k][i].conj() * u[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expected)).norm() < 1e-12, "{gate:?} not unitary");
            }
        }
    }
}

#[test]
fn givens_gates_conserve_particle_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    for weight in 0..=n {
        let mut amps = vec![c(0.0); 1 << n];
        for (b, a) in amps.iter_mut().enumerate() {
            if (b as u32).count_ones() as usize == weight {
                *a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let mut s = StateVector::from_amplitudes(n, amps).unwrap();
        for _ in 0..20 {
            let mut q: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                q.swap(i, rng.random_range(0..=i));
            }
            let theta = rng.random_range(-3.0..3.0);
            if rng.random::<bool>() {
                s.apply(&Gate::G1 { qubits: [q[0], q[1]], theta }).unwrap();
            } else {
                s.apply(&Gate::G2 { qubits: [q[0], q[1], q[2], q[3]], theta }).unwrap();
            }
        }
        for (b, a) in s.amplitudes().iter().enumerate() {
            if (b as u32).count_ones() as usize != weight {
                assert!(a.norm() < 1e-12);
            }
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn g1_at_pi_swaps_occupation() {
    let mut s = StateVector::basis(2, "01").unwrap();
    s.apply(&Gate::G1 { qubits: [0, 1], theta: std::f64::consts::PI }).unwrap();
    let target = StateVector::basis(2, "10").unwrap();
    for (a, b) in s.amplitudes().iter().zip(target.amplitudes()) {
        assert!((a - b).norm() < 1e-15);
    }
    let mut s = StateVector::basis(4, "0011").unwrap();
    s.apply(&Gate::G2 { qubits: [0, 1, 2, 3], theta: std::f64::consts::PI }).unwrap();
    assert!((s.amplitudes()[0b1100] - c(1.0)).norm() < 1e-15);
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let mut amps: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(n, amps).unwrap()
}

fn random_terms(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    while out.len() < count {
        let p: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
        if out.iter().all(|(q, _)| *q != p) {
            out.push((p, rng.random_range(-1.0..1.0)));
        }
    }
    out
}

fn build(n: usize, terms: &[(String, f64)]) -> Hamiltonian {
    Hamiltonian::new(
        n,
        terms.iter().map(|(p, v)| PauliTerm::new(p.clone(), *v)).collect(),
        "random",
        "r",
    )
    .unwrap()
}

#[test]
fn expectation_is_linear_and_counted_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4;
    let s = random_state(n, &mut rng);
    let t1 = random_terms(n, 6, &mut rng);
    let t2: Vec<(String, f64)> = random_terms(n, 5, &mut rng)
        .into_iter()
        .filter(|(p, _)| t1.iter().all(|(q, _)| q != p))
        .collect();
    let a = -1.7;
    let mut joint = t1.clone();
    joint.extend(t2.iter().map(|(p, v)| (p.clone(), a * v)));
    let mut counter = EvalCounter::new();
    let e1 = counter.expectation(&s, &build(n, &t1)).unwrap();
    let e2 = counter.expectation(&s, &build(n, &t2)).unwrap();
    let e = counter.expectation(&s, &build(n, &joint)).unwrap();
    assert!((e - (e1 + a * e2)).abs() < 1e-12);
    assert_eq!(counter.count(), 3);
}

#[test]
fn expectation_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in 1..=4 {
        let terms = random_terms(n, 3 * n, &mut rng).into_iter().take(1 << (2 * n)).collect::<Vec<_>>();
        let h = build(n, &terms);
        let dense = dense_hamiltonian(n, &terms);
        let s = random_state(n, &mut rng);
        let hv = matvec(&dense, s.amplitudes());
        let oracle: Complex64 = s.amplitudes().iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
        let e = monitor_energy(&s, &h).unwrap();
        assert!((e - oracle.re).abs() < 1e-12, "n={n}");
        assert!(oracle.im.abs() < 1e-12);
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn three_qubit_ground_energy_matches_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let terms = random_terms(3, 1 + k % 8, &mut rng);
        let dense = dense_hamiltonian(3, &terms);
        // Hermitian A + iB as the real symmetric [[A, -B], [B, A]]; spectrum doubles
        let mut real = vec![vec![0.0; 16]; 16];
        for i in 0..8 {
            for j in 0..8 {
                real[i][j] = dense[i][j].re;
                real[i + 8][j + 8] = dense[i][j].re;
                real[i][j + 8] = -dense[i][j].im;
                real[i + 8][j] = dense[i][j].im;
            }
        }
        let oracle = jacobi_eigenvalues(real)[0];
        let e = exact_ground_energy(&build(3, &terms)).unwrap();
        assert!((e - oracle).abs() < 1e-9, "{e} vs {oracle}");
    }
}

#[test]
fn overlap_is_squared_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_state(3, &mut rng);
    let b = random_state(3, &mut rng);
    let mut counter = EvalCounter::new();
    let f = counter.overlap(&a, &b).unwrap();
    let inner: Complex64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).sum();
    assert!((f - inner.norm_sqr()).abs() < 1e-15);
    assert!((counter.overlap(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(counter.count(), 2);
}

proptest! {
    #[test]
    fn random_circuits_preserve_norm(angles in proptest::collection::vec(-6.3f64..6.3, 12), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_state(5, &mut rng);
        for (k, theta) in angles.into_iter().enumerate() {
            let gate = match k % 4 {
                0 => Gate::Ry { qubit: k % 5, theta },
                1 => Gate::Cnot { control: k % 5, target: (k + 1) % 5 },
                2 => Gate::G1 { qubits: [k % 5, (k + 2) % 5], theta },
                _ => Gate::G2 { qubits: [k % 5, (k + 1) % 5, (k + 2) % 5, (k + 3) % 5], theta },
            };
            s.apply(&gate).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
