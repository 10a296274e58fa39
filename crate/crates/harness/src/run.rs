//! Mode dispatch and artifact writing.

use std::path::{Path, PathBuf};

use flowvqe_core::flow::FlowModel;
use flowvqe_core::hamiltonian::exact_ground_energy;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig, WarmInit, MULTI_INSTANCE_LAYERS, SINGLE_INSTANCE_LAYERS};
use crate::cost::{cost_report, CostReport};
use crate::error::{HarnessError, Result};
use crate::experiments::{
    generate_pes, load_instances, optimizer_records, run_vqe, tfim_instances, train_flow, warm_start_post_train,
    PesPoint, WarmStart,
};
use crate::geometry::{geometry, to_xyz, Molecule};
use crate::metrics::{jsonl_to_csv, summarize, write_jsonl, InstanceSummary, MetricsRecord};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CSV_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartSummary {
    pub instance_label: String,
    pub init_evaluations: u64,
    pub n_ca: Option<u64>,
    pub min_error: Option<f64>,
    pub evaluations: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergy {
    pub instance_label: String,
    pub ground_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Summary {
    Vqe {
        run_id: String,
        threshold: f64,
        instances: Vec<InstanceSummary>,
    },
    FlowS {
        run_id: String,
        threshold: f64,
        epochs: usize,
        evaluations: u64,
        final_loss: f64,
        checkpoint: PathBuf,
        instances: Vec<InstanceSummary>,
    },
    FlowM {
        run_id: String,
        threshold: f64,
        epochs: usize,
        evaluations: u64,
        final_loss: f64,
        checkpoint: PathBuf,
        instances: Vec<InstanceSummary>,
    },
    Generate {
        run_id: String,
        samples_per_point: usize,
        evaluations: u64,
        points: Vec<PesPoint>,
    },
    WarmStart {
        run_id: String,
        init: WarmInit,
        threshold: f64,
        instances: Vec<WarmStartSummary>,
    },
    CostReport {
        report: CostReport,
    },
    Geometry {
        molecule: Molecule,
        files: Vec<PathBuf>,
    },
    GenTfim {
        files: Vec<PathBuf>,
    },
    Exact {
        instances: Vec<GroundEnergy>,
    },
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub metrics_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::File {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Validates `cfg`, runs its mode and writes the summary, metrics and any
/// checkpoint under `cfg.output_dir`.
pub fn run(cfg: &RunConfig, csv: bool) -> Result<RunArtifacts> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let run_id = cfg.run_id();

    let mut opt = cfg.optimizer.clone();
    opt.threshold = cfg.threshold;
    opt.seed = cfg.seed;
    let mut train = cfg.train.clone();
    train.seed = cfg.seed;

    let instances = match cfg.mode {
        Mode::CostReport | Mode::Geometry | Mode::GenTfim => Vec::new(),
        _ => load_instances(cfg)?,
    };
    let spec = match cfg.ansatz {
        Some(a) if !instances.is_empty() => Some(a.build(instances[0].hamiltonian.n_qubits())?),
        _ => None,
    };
    // validate() guarantees the ansatz for every mode that reads `spec`
    let spec = || spec.as_ref().expect("validated ansatz");

    let mut records: Vec<MetricsRecord> = Vec::new();
    let summary = match cfg.mode {
        Mode::Vqe => {
            records = run_vqe(spec(), &instances, &opt, &run_id)?;
            Summary::Vqe {
                run_id,
                threshold: cfg.threshold,
                instances: summarize(&records, cfg.threshold),
            }
        }
        Mode::FlowS | Mode::FlowM => {
            let (layers, mode) = if cfg.mode == Mode::FlowS {
                (SINGLE_INSTANCE_LAYERS, "flow-s")
            } else {
                (MULTI_INSTANCE_LAYERS, "flow-m")
            };
            let fr = train_flow(spec(), &instances, &cfg.flow, layers, &train, &run_id, mode)?;
            let ckpt = out.join(CHECKPOINT_FILE);
            fr.model.save(&ckpt)?;
            records = fr.records;
            let instances = summarize(&records, cfg.threshold);
            let epochs = fr.outcome.records.len();
            let final_loss = fr.outcome.records.last().map_or(f64::NAN, |r| r.loss);
            let evaluations = fr.outcome.evaluations;
            if cfg.mode == Mode::FlowS {
                Summary::FlowS {
                    run_id,
                    threshold: cfg.threshold,
                    epochs,
                    evaluations,
                    final_loss,
                    checkpoint: ckpt,
                    instances,
                }
            } else {
                Summary::FlowM {
                    run_id,
                    threshold: cfg.threshold,
                    epochs,
                    evaluations,
                    final_loss,
                    checkpoint: ckpt,
                    instances,
                }
            }
        }
        Mode::Generate => {
            let model = FlowModel::load(cfg.checkpoint.as_ref().expect("validated checkpoint"))?;
            let (points, recs) = generate_pes(&model, spec(), &instances, cfg.samples_per_point, cfg.seed, &run_id)?;
            records = recs;
            Summary::Generate {
                run_id,
                samples_per_point: cfg.samples_per_point,
                evaluations: points.iter().map(|p| p.evaluations).sum(),
                points,
            }
        }
        Mode::WarmStart => {
            let init = cfg.warm_init.expect("validated warm_init");
            let model = match init {
                WarmInit::Flow => Some(FlowModel::load(cfg.checkpoint.as_ref().expect("validated checkpoint"))?),
                _ => None,
            };
            let transfer: Option<Vec<f64>> = match init {
                WarmInit::Transferred => {
                    let path = cfg.transfer_theta.as_ref().expect("validated transfer_theta");
                    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::File {
                        path: path.clone(),
                        source,
                    })?;
                    Some(serde_json::from_str(&text).map_err(|source| HarnessError::Json {
                        path: path.clone(),
                        source,
                    })?)
                }
                _ => None,
            };
            let source = match (&model, &transfer) {
                (Some(m), _) => WarmStart::Flow {
                    model: m,
                    samples: cfg.samples_per_point,
                },
                (_, Some(t)) => WarmStart::Transferred(t),
                _ => WarmStart::HfZero,
            };
            let mut summaries = Vec::new();
            for (k, inst) in instances.iter().enumerate() {
                let start = std::time::Instant::now();
                let ws = warm_start_post_train(&source, spec(), &inst.hamiltonian, &opt, cfg.seed.wrapping_add(k as u64))?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                records.extend(optimizer_records(
                    &format!("{run_id}:{}", inst.label),
                    "warm-start",
                    inst,
                    &ws.run.trajectory,
                    ws.init_evaluations,
                    ms,
                ));
                summaries.push(WarmStartSummary {
                    instance_label: inst.label.clone(),
                    init_evaluations: ws.init_evaluations,
                    n_ca: ws.n_ca,
                    min_error: ws.min_error,
                    evaluations: ws.evaluations,
                    iterations: ws.run.iterations,
                });
            }
            Summary::WarmStart {
                run_id,
                init,
                threshold: cfg.threshold,
                instances: summaries,
            }
        }
        Mode::CostReport => {
            let c = cfg.cost.as_ref().expect("validated cost");
            Summary::CostReport {
                report: cost_report(c.c_pre, &c.post, &c.vqe)?,
            }
        }
        Mode::Geometry => {
            let g = cfg.geometry.as_ref().expect("validated geometry");
            let mut files = Vec::new();
            for &d in &g.distances {
                let path = out.join(format!("{}_d{}.xyz", g.molecule.name(), d));
                let comment = format!("{} d={} angstrom", g.molecule.name(), d);
                write_file(&path, &to_xyz(&geometry(g.molecule, d), &comment))?;
                files.push(path);
            }
            Summary::Geometry {
                molecule: g.molecule,
                files,
            }
        }
        Mode::GenTfim => {
            let dir = out.join("hamiltonians");
            create_dir(&dir)?;
            let mut files = Vec::new();
            for inst in tfim_instances(cfg.tfim.as_ref().expect("validated tfim"))? {
                let path = dir.join(format!("{}.json", inst.label));
                write_file(&path, &inst.hamiltonian.to_json_string())?;
                files.push(path);
            }
            Summary::GenTfim { files }
        }
        Mode::Exact => Summary::Exact {
            instances: instances
                .iter()
                .map(|i| {
                    Ok(GroundEnergy {
                        instance_label: i.label.clone(),
                        ground_energy: exact_ground_energy(&i.hamiltonian)?,
                    })
                })
                .collect::<Result<_>>()?,
        },
    };

    let (metrics_path, csv_path) = if records.is_empty() {
        (None, None)
    } else {
        let path = out.join(METRICS_FILE);
        write_jsonl(&path, &records)?;
        let csv_path = if csv {
            let p = out.join(CSV_FILE);
            jsonl_to_csv(&path, &p)?;
            Some(p)
        } else {
            None
        };
        (Some(path), csv_path)
    };
    let summary_path = out.join(SUMMARY_FILE);
    write_file(&summary_path, &serde_json::to_string_pretty(&summary)?)?;
    Ok(RunArtifacts {
        summary,
        summary_path,
        metrics_path,
        csv_path,
    })
}
