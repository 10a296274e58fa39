//! Preference-based training of the flow (elite buffers + maximum likelihood
//! on the buffered winners), the score-function alternative, and Adam.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::hamiltonian::{ContextVector, Hamiltonian};
use crate::simulator::EvalCounter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples drawn per context per epoch (`B`).
    pub batch_size: usize,
    /// Winners kept per context (`M`).
    pub buffer_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub winner_noise_var: f64,
    pub seed: u64,
    /// Stop once every context with a reference energy has a buffered
    /// winner within this error. `None` runs all epochs.
    pub target_error: Option<f64>,
    /// Keep a copy of every buffer after each epoch in the outcome.
    pub record_winners: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 2,
            buffer_size: 2,
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            winner_noise_var: 1e-3,
            seed: 0,
            target_error: None,
            record_winners: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("train config: {msg}")));
        if self.epochs == 0 || self.batch_size == 0 || self.buffer_size == 0 {
            return bad("epochs, batch_size and buffer_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.winner_noise_var >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("winner_noise_var and weight_decay must be non-negative");
        }
        Ok(())
    }
}

/// Per-context archives of the lowest-energy samples seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EliteBuffer {
    capacity: usize,
    entries: Vec<Vec<(Vec<f64>, f64)>>,
}

impl EliteBuffer {
    pub fn new(n_contexts: usize, capacity: usize) -> Self {
        Self {
            capacity,
            entries: vec![Vec::new(); n_contexts],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts after every entry with energy `<= energy`, so earlier samples
    /// win ties, then truncates to capacity.
    pub fn insert(&mut self, context: usize, theta: Vec<f64>, energy: f64) -> Result<()> {
        if !energy.is_finite() {
            return Err(Error::NonFiniteEnergy { energy, context });
        }
        let n = self.entries.len();
        let list = self.entries.get_mut(context).ok_or(Error::DimensionMismatch {
            what: "buffer context index",
            expected: n,
            got: context,
        })?;
        let pos = list.partition_point(|(_, e)| *e <= energy);
        if pos < self.capacity {
            list.insert(pos, (theta, energy));
            list.truncate(self.capacity);
        }
        Ok(())
    }

    pub fn entries(&self, context: usize) -> &[(Vec<f64>, f64)] {
        &self.entries[context]
    }

    pub fn best(&self, context: usize) -> Option<&(Vec<f64>, f64)> {
        self.entries[context].first()
    }

    pub fn n_contexts(&self) -> usize {
        self.entries.len()
    }
}

/// Returns noisy copies of the winners; the inputs are left untouched.
pub fn perturb_winners<R: Rng + ?Sized>(winners: &[Vec<f64>], var: f64, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if !(var >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {var}")));
    }
    if var == 0.0 {
        return Ok(winners.to_vec());
    }
    let noise = Normal::new(0.0, var.sqrt()).expect("valid deviation");
    Ok(winners
        .iter()
        .map(|w| w.iter().map(|x| x + noise.sample(rng)).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam step with L2 weight decay added to the gradient.
pub fn adam_update(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64, weight_decay: f64) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            what: "adam vector length",
            expected: params.len(),
            got: if grad.len() != params.len() { grad.len() } else { state.m.len() },
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        let g = grad[i] + weight_decay * params[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// One training instance: its context vector and Hamiltonian.
#[derive(Debug, Clone)]
pub struct TrainContext {
    pub context: ContextVector,
    pub hamiltonian: Hamiltonian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Energies of this epoch's samples, per context.
    pub sampled: Vec<Vec<f64>>,
    /// Best buffered energy per context after this epoch.
    pub best: Vec<f64>,
    pub loss: f64,
    pub cumulative_evaluations: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    pub buffer: EliteBuffer,
    pub evaluations: u64,
    /// Buffer snapshots after each epoch, when requested.
    pub winner_history: Vec<EliteBuffer>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic RNG stream for one `(epoch, context, sample)` slot, so
/// sampling does not depend on evaluation order.
pub fn stream_rng(seed: u64, epoch: u64, context: u64, sample: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for part in [epoch, context, sample] {
        h = splitmix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Stream slot reserved for the winner noise of an epoch.
const NOISE_SLOT: u64 = u64::MAX;

/// Runs preference-based training. One context gives single-instance
/// training, several share one model.
pub fn train_flow_vqe(
    model: &mut FlowModel,
    contexts: &[TrainContext],
    spec: &AnsatzSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if contexts.is_empty() {
        return Err(Error::InvalidArgument("at least one training context is required".into()));
    }
    if model.dim() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            what: "flow dimension vs ansatz parameter count",
            expected: spec.param_count(),
            got: model.dim(),
        });
    }
    for c in contexts {
        if c.hamiltonian.n_qubits() != spec.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "hamiltonian qubit count",
                expected: spec.n_qubits,
                got: c.hamiltonian.n_qubits(),
            });
        }
        if c.context.term_order != model.term_order() {
            return Err(Error::ContextMismatch);
        }
    }

    let start = Instant::now();
    let mut counter = EvalCounter::new();
    let mut buffer = EliteBuffer::new(contexts.len(), cfg.buffer_size);
    let mut adam = AdamState::new(model.n_params());
    let mut records = Vec::new();
    let mut history = Vec::new();

    for epoch in 0..cfg.epochs {
        let mut sampled = Vec::with_capacity(contexts.len());
        let mut conds = Vec::with_capacity(contexts.len());
        for (k, c) in contexts.iter().enumerate() {
            let cond = model.condition(&c.context)?;
            let mut energies = Vec::with_capacity(cfg.batch_size);
            for i in 0..cfg.batch_size {
                let mut rng = stream_rng(cfg.seed, epoch as u64, k as u64, i as u64);
                let (theta, _) = model.sample_with(&cond, &mut rng)?;
                let state = spec.prepare_state(&theta)?;
                let energy = counter.expectation(&state, &c.hamiltonian)?;
                buffer.insert(k, theta, energy)?;
                energies.push(energy);
            }
            sampled.push(energies);
            conds.push(cond);
        }

        let mut pooled: Vec<(usize, Vec<f64>)> = Vec::new();
        for k in 0..contexts.len() {
            for (theta, _) in buffer.entries(k) {
                pooled.push((k, theta.clone()));
            }
        }
        let mut noise_rng = stream_rng(cfg.seed, epoch as u64, NOISE_SLOT, NOISE_SLOT);
        let thetas: Vec<Vec<f64>> = pooled.iter().map(|(_, t)| t.clone()).collect();
        let noisy = perturb_winners(&thetas, cfg.winner_noise_var, &mut noise_rng)?;

        let weight = -1.0 / noisy.len() as f64;
        let mut grad = vec![0.0; model.n_params()];
        let mut loss = 0.0;
        for (k, cond) in conds.iter().enumerate() {
            let items: Vec<(&[f64], f64)> = pooled
                .iter()
                .zip(&noisy)
                .filter(|((kk, _), _)| *kk == k)
                .map(|(_, t)| (t.as_slice(), weight))
                .collect();
            if !items.is_empty() {
                loss += model.accumulate_log_prob_grad(cond, &items, &mut grad)?;
            }
        }
        adam_update(model.params_mut(), &grad, &mut adam, cfg.learning_rate, cfg.weight_decay)?;

        let best: Vec<f64> = (0..contexts.len())
            .map(|k| buffer.best(k).map(|b| b.1).unwrap_or(f64::INFINITY))
            .collect();
        records.push(EpochRecord {
            epoch,
            sampled,
            best: best.clone(),
            loss,
            cumulative_evaluations: counter.count(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if cfg.record_winners {
            history.push(buffer.clone());
        }

        if let Some(tol) = cfg.target_error {
            let mut any_ref = false;
            let done = contexts.iter().zip(&best).all(|(c, &b)| match c.hamiltonian.exact_reference() {
                Some(exact) => {
                    any_ref = true;
                    (b - exact).abs() <= tol
                }
                None => false,
            });
            if any_ref && done {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        records,
        buffer,
        evaluations: counter.count(),
        winner_history: history,
    })
}

/// Score-function gradient `(1/N) Σ E_i ∇ log p(θ_i | γ)`.
pub fn reinforce_grad(
    model: &FlowModel,
    context: &ContextVector,
    samples: &[(Vec<f64>, f64)],
    energies: &[f64],
) -> Result<Vec<f64>> {
    if samples.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            what: "energies vs samples",
            expected: samples.len(),
            got: energies.len(),
        });
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let n = samples.len() as f64;
    let cond = model.condition(context)?;
    let items: Vec<(&[f64], f64)> = samples
        .iter()
        .zip(energies)
        .map(|((t, _), e)| (t.as_slice(), e / n))
        .collect();
    let mut grad = vec![0.0; model.n_params()];
    model.accumulate_log_prob_grad(&cond, &items, &mut grad)?;
    Ok(grad)
}
