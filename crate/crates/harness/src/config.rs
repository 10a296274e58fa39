//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use flowvqe_core::ansatz::AnsatzSpec;
use flowvqe_core::baselines::{OptimizerConfig, CHEMICAL_ACCURACY};
use flowvqe_core::flow::FlowConfig;
use flowvqe_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::geometry::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Vqe,
    FlowS,
    FlowM,
    Generate,
    WarmStart,
    CostReport,
    Geometry,
    GenTfim,
    Exact,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Vqe,
        Mode::FlowS,
        Mode::FlowM,
        Mode::Generate,
        Mode::WarmStart,
        Mode::CostReport,
        Mode::Geometry,
        Mode::GenTfim,
        Mode::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Vqe => "vqe",
            Mode::FlowS => "flow-s",
            Mode::FlowM => "flow-m",
            Mode::Generate => "generate",
            Mode::WarmStart => "warm-start",
            Mode::CostReport => "cost-report",
            Mode::Geometry => "geometry",
            Mode::GenTfim => "gen-tfim",
            Mode::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn needs_instances(self) -> bool {
        matches!(
            self,
            Mode::Vqe | Mode::FlowS | Mode::FlowM | Mode::Generate | Mode::WarmStart | Mode::Exact
        )
    }

    fn needs_ansatz(self) -> bool {
        matches!(
            self,
            Mode::Vqe | Mode::FlowS | Mode::FlowM | Mode::Generate | Mode::WarmStart
        )
    }
}

/// Transverse-field Ising chains over a grid of field values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfimGrid {
    pub n: usize,
    #[serde(default = "one")]
    pub j: f64,
    pub g: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnsatzChoice {
    /// RY-linear HEA; the qubit count comes from the instances.
    Hea { layers: usize },
    Gsd {
        n_electrons: usize,
        n_spin_orbitals: usize,
    },
}

impl AnsatzChoice {
    pub fn build(self, n_qubits: usize) -> flowvqe_core::error::Result<AnsatzSpec> {
        match self {
            AnsatzChoice::Hea { layers } => AnsatzSpec::hea(n_qubits, layers),
            AnsatzChoice::Gsd {
                n_electrons,
                n_spin_orbitals,
            } => AnsatzSpec::gsd(n_electrons, n_spin_orbitals),
        }
    }
}

/// Flow architecture; `layers` defaults to 7 for single-instance and 20 for
/// multi-instance runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSettings {
    pub layers: Option<usize>,
    pub mixture_size: usize,
    pub embed_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub reflections: Option<usize>,
    pub base_variance: f64,
    pub share_conditioner: bool,
    pub anchor_init_std: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        let base = FlowConfig::default();
        Self {
            layers: None,
            mixture_size: base.mixture_size,
            embed_dim: base.embed_dim,
            hidden_width: base.hidden_width,
            hidden_layers: base.hidden_layers,
            reflections: base.reflections,
            base_variance: base.base_variance,
            share_conditioner: base.share_conditioner,
            anchor_init_std: base.anchor_init_std,
        }
    }
}

pub const SINGLE_INSTANCE_LAYERS: usize = 7;
pub const MULTI_INSTANCE_LAYERS: usize = 20;

impl FlowSettings {
    pub fn to_flow_config(&self, dim: usize, context_len: usize, default_layers: usize) -> FlowConfig {
        FlowConfig {
            dim,
            context_len,
            layers: self.layers.unwrap_or(default_layers),
            mixture_size: self.mixture_size,
            embed_dim: self.embed_dim,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            reflections: self.reflections,
            base_variance: self.base_variance,
            share_conditioner: self.share_conditioner,
            anchor_init_std: self.anchor_init_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmInit {
    /// Best of `samples_per_point` flow samples; the samples are counted.
    Flow,
    /// All-zero parameters, i.e. the reference state.
    HfZero,
    /// Parameters read from `transfer_theta`.
    Transferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostInput {
    pub c_pre: u64,
    pub post: Vec<u64>,
    pub vqe: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryInput {
    pub molecule: Molecule,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub hamiltonians: Vec<PathBuf>,
    #[serde(default)]
    pub tfim: Option<TfimGrid>,
    #[serde(default)]
    pub ansatz: Option<AnsatzChoice>,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Model checkpoint to read (generate, warm-start with flow init).
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default = "default_samples")]
    pub samples_per_point: usize,
    #[serde(default)]
    pub warm_init: Option<WarmInit>,
    /// JSON array of parameters for the transferred initialization.
    #[serde(default)]
    pub transfer_theta: Option<PathBuf>,
    #[serde(default)]
    pub cost: Option<CostInput>,
    #[serde(default)]
    pub geometry: Option<GeometryInput>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_threshold() -> f64 {
    CHEMICAL_ACCURACY
}

fn default_samples() -> usize {
    16
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            run_id: None,
            hamiltonians: Vec::new(),
            tfim: None,
            ansatz: None,
            flow: FlowSettings::default(),
            train: TrainConfig::default(),
            optimizer: OptimizerConfig::default(),
            threshold: default_threshold(),
            checkpoint: None,
            samples_per_point: default_samples(),
            warm_init: None,
            transfer_theta: None,
            cost: None,
            geometry: None,
            output_dir: default_output(),
            seed: 0,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::File {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.mode.name(), self.seed))
    }

    /// Checks that every field the mode needs is present and that referenced
    /// files exist.
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(HarnessError::config("threshold", "must be positive and finite"));
        }
        for p in &self.hamiltonians {
            if !p.is_file() {
                return Err(HarnessError::config(
                    "hamiltonians",
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        if let Some(t) = &self.tfim {
            if t.g.is_empty() {
                return Err(HarnessError::config("tfim.g", "needs at least one field value"));
            }
            if t.n < 2 {
                return Err(HarnessError::config("tfim.n", "needs at least two sites"));
            }
        }
        let has_instances = !self.hamiltonians.is_empty() || self.tfim.is_some();
        if self.mode.needs_instances() && !has_instances {
            return Err(HarnessError::config(
                "hamiltonians",
                format!("mode {} needs `hamiltonians` or `tfim`", self.mode.name()),
            ));
        }
        if self.mode.needs_ansatz() && self.ansatz.is_none() {
            return Err(HarnessError::config(
                "ansatz",
                format!("mode {} needs an ansatz", self.mode.name()),
            ));
        }
        if self.samples_per_point == 0 {
            return Err(HarnessError::config("samples_per_point", "must be at least 1"));
        }
        match self.mode {
            Mode::GenTfim if self.tfim.is_none() => {
                return Err(HarnessError::config("tfim", "mode gen-tfim needs a tfim grid"));
            }
            Mode::CostReport if self.cost.is_none() => {
                return Err(HarnessError::config("cost", "mode cost-report needs cost inputs"));
            }
            Mode::Geometry if self.geometry.is_none() => {
                return Err(HarnessError::config("geometry", "mode geometry needs a molecule"));
            }
            Mode::Generate => self.require_checkpoint()?,
            Mode::WarmStart => match self.warm_init {
                None => return Err(HarnessError::config("warm_init", "mode warm-start needs warm_init")),
                Some(WarmInit::Flow) => self.require_checkpoint()?,
                Some(WarmInit::Transferred) => match &self.transfer_theta {
                    Some(p) if p.is_file() => {}
                    Some(p) => {
                        return Err(HarnessError::config(
                            "transfer_theta",
                            format!("{} does not exist", p.display()),
                        ))
                    }
                    None => {
                        return Err(HarnessError::config(
                            "transfer_theta",
                            "transferred init needs a parameter file",
                        ))
                    }
                },
                Some(WarmInit::HfZero) => {}
            },
            Mode::FlowS if self.instance_count() != 1 => {
                return Err(HarnessError::config(
                    "hamiltonians",
                    "mode flow-s trains on exactly one instance",
                ));
            }
            _ => {}
        }
        self.train.validate()?;
        Ok(())
    }

    fn require_checkpoint(&self) -> Result<()> {
        match &self.checkpoint {
            Some(p) if p.is_file() => Ok(()),
            Some(p) => Err(HarnessError::config(
                "checkpoint",
                format!("{} does not exist", p.display()),
            )),
            None => Err(HarnessError::config(
                "checkpoint",
                format!("mode {} needs a checkpoint", self.mode.name()),
            )),
        }
    }

    fn instance_count(&self) -> usize {
        self.hamiltonians.len() + self.tfim.as_ref().map_or(0, |t| t.g.len())
    }
}
