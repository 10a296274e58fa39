//! Experiment protocols built on the core library: baseline optimization,
//! flow training, sampling along a family, and warm-started optimization.

use std::collections::HashSet;
use std::time::Instant;

use flowvqe_core::ansatz::{parameter_transfer, AnsatzSpec};
use flowvqe_core::baselines::{energy, run_optimizer, OptimizerConfig, OptimizerRun, TrajectoryPoint};
use flowvqe_core::error::Error as CoreError;
use flowvqe_core::flow::FlowModel;
use flowvqe_core::hamiltonian::{
    context_of, exact_ground_energy, parse_hamiltonian, tfim, ContextVector, Hamiltonian, RefEnergies,
};
use flowvqe_core::simulator::EvalCounter;
use flowvqe_core::training::{stream_rng, train_flow_vqe, TrainConfig, TrainContext, TrainOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FlowSettings, RunConfig, TfimGrid};
use crate::error::{HarnessError, Result};
use crate::metrics::MetricsRecord;

#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub hamiltonian: Hamiltonian,
}

/// TFIM instances labeled `tfim_n{n}_g{g}`, with the exact ground energy and
/// the all-zeros reference energy `-J (n - 1)` attached.
pub fn tfim_instances(grid: &TfimGrid) -> Result<Vec<Instance>> {
    grid.g
        .iter()
        .map(|&g| {
            let h = tfim(grid.n, grid.j, g)?;
            let exact = exact_ground_energy(&h)?;
            let hf = -grid.j * (grid.n as f64 - 1.0);
            Ok(Instance {
                label: format!("tfim_n{}_g{}", grid.n, g),
                hamiltonian: h.with_ref_energies(RefEnergies { hf, exact }),
            })
        })
        .collect()
}

/// Hamiltonian files first, then the TFIM grid.
pub fn load_instances(cfg: &RunConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for path in &cfg.hamiltonians {
        let bytes = std::fs::read(path).map_err(|source| HarnessError::File {
            path: path.clone(),
            source,
        })?;
        let h = parse_hamiltonian(&bytes)?;
        out.push(Instance {
            label: h.instance_label.clone(),
            hamiltonian: h,
        });
    }
    if let Some(grid) = &cfg.tfim {
        out.extend(tfim_instances(grid)?);
    }
    let n = out.first().map(|i| i.hamiltonian.n_qubits());
    if out.iter().any(|i| Some(i.hamiltonian.n_qubits()) != n) {
        return Err(HarnessError::config("hamiltonians", "instances differ in qubit count"));
    }
    Ok(out)
}

/// Union of non-identity Pauli strings in first-appearance order. Identity
/// terms are left out so a constant shift does not change the context.
pub fn family_order(instances: &[Instance]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut order = Vec::new();
    for inst in instances {
        for t in inst.hamiltonian.terms() {
            if !t.is_identity() && seen.insert(t.pauli.clone()) {
                order.push(t.pauli.clone());
            }
        }
    }
    order
}

/// Context of `h` in `order`, rejecting Hamiltonians with terms the order
/// does not cover.
pub fn strict_context(h: &Hamiltonian, order: &[String]) -> Result<ContextVector> {
    let known: HashSet<&str> = order.iter().map(String::as_str).collect();
    if h.terms().iter().any(|t| !t.is_identity() && !known.contains(t.pauli.as_str())) {
        return Err(CoreError::ContextMismatch.into());
    }
    Ok(context_of(h, order)?)
}

fn error_of(h: &Hamiltonian, e: f64) -> Option<f64> {
    h.exact_reference().map(|x| (e - x).abs())
}

/// Metrics for an optimizer trajectory, with `offset` evaluations spent
/// before the optimizer started.
pub fn optimizer_records(
    run_id: &str,
    mode: &str,
    inst: &Instance,
    trajectory: &[TrajectoryPoint],
    offset: u64,
    wall_ms: f64,
) -> Vec<MetricsRecord> {
    let mut best = f64::INFINITY;
    trajectory
        .iter()
        .map(|p| {
            best = best.min(p.energy);
            MetricsRecord {
                run_id: run_id.to_string(),
                mode: mode.to_string(),
                instance_label: inst.label.clone(),
                step: p.iteration,
                energy: p.energy,
                best_energy: best,
                error_vs_exact: error_of(&inst.hamiltonian, best),
                cumulative_evaluations: offset + p.cumulative_evaluations,
                loss: None,
                wall_ms,
            }
        })
        .collect()
}

/// Standard VQE from the all-zeros initialization on every instance.
pub fn run_vqe(
    spec: &AnsatzSpec,
    instances: &[Instance],
    opt: &OptimizerConfig,
    run_id: &str,
) -> Result<Vec<MetricsRecord>> {
    let mut records = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let start = Instant::now();
        let mut rng = stream_rng(opt.seed, 0, k as u64, 0);
        let run = run_optimizer(spec, &inst.hamiltonian, &vec![0.0; spec.param_count()], opt, &mut rng)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        records.extend(optimizer_records(
            &format!("{run_id}:{}", inst.label),
            "vqe",
            inst,
            &run.trajectory,
            0,
            ms,
        ));
    }
    Ok(records)
}

pub struct FlowRun {
    pub model: FlowModel,
    pub outcome: TrainOutcome,
    pub records: Vec<MetricsRecord>,
}

/// Trains one model on all `instances`. A single instance is the
/// single-instance regime.
pub fn train_flow(
    spec: &AnsatzSpec,
    instances: &[Instance],
    settings: &FlowSettings,
    default_layers: usize,
    train: &TrainConfig,
    run_id: &str,
    mode: &str,
) -> Result<FlowRun> {
    let order = family_order(instances);
    let flow_cfg = settings.to_flow_config(spec.param_count(), order.len(), default_layers);
    let mut model = FlowModel::new(flow_cfg, order.clone(), &mut ChaCha8Rng::seed_from_u64(train.seed))?;
    let contexts = instances
        .iter()
        .map(|inst| {
            Ok(TrainContext {
                context: strict_context(&inst.hamiltonian, &order)?,
                hamiltonian: inst.hamiltonian.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outcome = train_flow_vqe(&mut model, &contexts, spec, train)?;

    let per_context = train.batch_size as u64;
    let per_epoch = per_context * contexts.len() as u64;
    let mut records = Vec::with_capacity(outcome.records.len() * contexts.len());
    for r in &outcome.records {
        for (k, inst) in instances.iter().enumerate() {
            let energy = r.sampled[k].iter().copied().fold(f64::INFINITY, f64::min);
            records.push(MetricsRecord {
                run_id: run_id.to_string(),
                mode: mode.to_string(),
                instance_label: inst.label.clone(),
                step: r.epoch,
                energy,
                best_energy: r.best[k],
                error_vs_exact: error_of(&inst.hamiltonian, r.best[k]),
                cumulative_evaluations: r.epoch as u64 * per_epoch + (k as u64 + 1) * per_context,
                loss: Some(r.loss),
                wall_ms: r.wall_ms,
            });
        }
    }
    Ok(FlowRun {
        model,
        outcome,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesPoint {
    pub instance_label: String,
    pub energies: Vec<f64>,
    pub e_min: f64,
    pub e_mean: f64,
    pub error_min: Option<f64>,
    pub error_mean: Option<f64>,
    pub evaluations: u64,
}

/// Draws `samples` parameter vectors per instance and evaluates each once.
pub fn generate_pes(
    model: &FlowModel,
    spec: &AnsatzSpec,
    instances: &[Instance],
    samples: usize,
    seed: u64,
    run_id: &str,
) -> Result<(Vec<PesPoint>, Vec<MetricsRecord>)> {
    let start = Instant::now();
    let mut counter = EvalCounter::new();
    let mut points = Vec::with_capacity(instances.len());
    let mut records = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let h = &inst.hamiltonian;
        let ctx = strict_context(h, model.term_order())?;
        let before = counter.count();
        let mut rng = stream_rng(seed, 0, k as u64, 0);
        let mut energies = Vec::with_capacity(samples);
        let mut best = f64::INFINITY;
        for (i, (theta, _)) in model.sample(&ctx, samples, &mut rng)?.into_iter().enumerate() {
            let e = energy(spec, h, &theta, &mut counter)?;
            best = best.min(e);
            energies.push(e);
            records.push(MetricsRecord {
                run_id: run_id.to_string(),
                mode: "generate".into(),
                instance_label: inst.label.clone(),
                step: i,
                energy: e,
                best_energy: best,
                error_vs_exact: error_of(h, best),
                cumulative_evaluations: counter.count(),
                loss: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        let e_mean = energies.iter().sum::<f64>() / energies.len() as f64;
        points.push(PesPoint {
            instance_label: inst.label.clone(),
            e_min: best,
            e_mean,
            error_min: error_of(h, best),
            error_mean: error_of(h, e_mean),
            evaluations: counter.count() - before,
            energies,
        });
    }
    Ok((points, records))
}

/// Where a warm-started optimization begins.
pub enum WarmStart<'a> {
    /// Best of `samples` flow draws; each draw costs one evaluation.
    Flow { model: &'a FlowModel, samples: usize },
    HfZero,
    Transferred(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct WarmStartRun {
    pub theta0: Vec<f64>,
    /// Evaluations spent choosing `theta0`.
    pub init_evaluations: u64,
    pub run: OptimizerRun,
    /// Total evaluations at first crossing of the threshold, initialization
    /// included.
    pub n_ca: Option<u64>,
    pub min_error: Option<f64>,
    pub evaluations: u64,
}

pub fn warm_start_post_train(
    init: &WarmStart<'_>,
    spec: &AnsatzSpec,
    h: &Hamiltonian,
    opt: &OptimizerConfig,
    rng_seed: u64,
) -> Result<WarmStartRun> {
    let mut counter = EvalCounter::new();
    let theta0 = match init {
        WarmStart::HfZero => vec![0.0; spec.param_count()],
        WarmStart::Transferred(theta) => parameter_transfer(theta, spec)?,
        WarmStart::Flow { model, samples } => {
            let ctx = strict_context(h, model.term_order())?;
            let mut rng = stream_rng(rng_seed, 0, 0, 1);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for (theta, _) in model.sample(&ctx, *samples, &mut rng)? {
                let e = energy(spec, h, &theta, &mut counter)?;
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, theta));
                }
            }
            best.map(|(_, t)| t)
                .ok_or_else(|| HarnessError::config("samples_per_point", "must be at least 1"))?
        }
    };
    let init_evaluations = counter.count();
    let mut rng = stream_rng(rng_seed, 0, 0, 0);
    let run = run_optimizer(spec, h, &theta0, opt, &mut rng)?;
    Ok(WarmStartRun {
        n_ca: run.n_ca.map(|n| n + init_evaluations),
        min_error: run.min_error,
        evaluations: run.evaluations + init_evaluations,
        theta0,
        init_evaluations,
        run,
    })
}
