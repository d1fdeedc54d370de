//! Experiment configuration files and the loss model.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observables::{self, Observable};
use crate::readout::{InputForm, TrainMethod, TrainOptions};
use crate::reservoir::{self, ReservoirConfig};
use crate::sampling::{SampleMode, Sampler, Shots};
use crate::states::{PrepMode, ReferenceTag};

/// Which states of a generated pool enter a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    Mixed,
    SeparableOnly,
    EntangledOnly,
    /// All separable states plus the first k entangled ones.
    SeparablePlusK(usize),
}

impl Composition {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Composition::Mixed),
            "separable_only" => Ok(Composition::SeparableOnly),
            "entangled_only" => Ok(Composition::EntangledOnly),
            other => {
                if let Some(k) = other.strip_prefix("separable_plus_") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::config(format!("bad composition: {other}")))?;
                    return Ok(Composition::SeparablePlusK(k));
                }
                Err(Error::config(format!(
                    "unknown composition {other}; expected mixed, separable_only, entangled_only or separable_plus_<k>"
                )))
            }
        }
    }

    pub fn as_string(&self) -> String {
        match self {
            Composition::Mixed => "mixed".into(),
            Composition::SeparableOnly => "separable_only".into(),
            Composition::EntangledOnly => "entangled_only".into(),
            Composition::SeparablePlusK(k) => format!("separable_plus_{k}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExperimentToml {
    reservoir: String,
    seed: u64,
    #[serde(default)]
    shots: Option<u64>,
    #[serde(default = "default_repeats")]
    repeats: usize,
    prep_mode: PrepMode,
    reference_separable: String,
    reference_entangled: String,
    targets: Vec<String>,
    #[serde(default = "default_mixed")]
    train_composition: String,
    #[serde(default = "default_mixed")]
    test_composition: String,
    n_sep_train: usize,
    n_ent_train: usize,
    n_sep_test: usize,
    n_ent_test: usize,
    #[serde(default = "default_input_form")]
    input_form: InputForm,
    #[serde(default = "default_rcond")]
    rcond: f64,
    #[serde(default)]
    ridge_lambda: Option<f64>,
    #[serde(default)]
    affine_offset: bool,
    #[serde(default = "default_sample_mode")]
    sample_mode: SampleMode,
    #[serde(default = "default_eta_extra")]
    eta_extra: f64,
    #[serde(default)]
    mislabel_partials: bool,
    #[serde(default)]
    observable_registry: Option<String>,
}

fn default_repeats() -> usize {
    20
}
fn default_mixed() -> String {
    "mixed".into()
}
fn default_input_form() -> InputForm {
    InputForm::NormalizedCounts
}
fn default_rcond() -> f64 {
    1e-12
}
fn default_sample_mode() -> SampleMode {
    SampleMode::Multinomial
}
fn default_eta_extra() -> f64 {
    1.0
}

/// Split sizes per repeat.
#[derive(Debug, Clone, Copy)]
pub struct SplitSizes {
    pub n_sep_train: usize,
    pub n_ent_train: usize,
    pub n_sep_test: usize,
    pub n_ent_test: usize,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub reservoir_path: PathBuf,
    pub reservoir: ReservoirConfig,
    pub seed: u64,
    pub shots: Shots,
    pub repeats: usize,
    pub prep_mode: PrepMode,
    pub reference_separable: ReferenceTag,
    pub reference_entangled: ReferenceTag,
    pub target_names: Vec<String>,
    pub observables: Vec<Observable>,
    pub train_composition: Composition,
    pub test_composition: Composition,
    pub sizes: SplitSizes,
    pub train_options: TrainOptions,
    pub sampler: Sampler,
    pub mislabel_partials: bool,
    /// SHA-256 of the raw config file, hex-encoded.
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let raw: ExperimentToml = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_raw(raw, base, &text, path)
    }

    fn from_raw(raw: ExperimentToml, base: &Path, text: &str, path: &Path) -> Result<Self> {
        let reservoir_path = base.join(&raw.reservoir);
        let reservoir = reservoir::load_reservoir(&reservoir_path)
            .map_err(|e| Error::config(format!("{} (key `reservoir`): {e}", path.display())))?;
        let registry = match &raw.observable_registry {
            Some(p) => observables::load_registry(&base.join(p))?,
            None => Default::default(),
        };
        let obs = observables::resolve_names(&raw.targets, &registry)
            .map_err(|e| Error::config(format!("{} (key `targets`): {e}", path.display())))?;
        let method = match raw.ridge_lambda {
            Some(lambda) => TrainMethod::Ridge { lambda },
            None => TrainMethod::Pinv { rcond: raw.rcond },
        };
        let sampler = Sampler::new(raw.sample_mode, raw.eta_extra)
            .map_err(|e| Error::config(format!("{} (key `eta_extra`): {e}", path.display())))?;
        let cfg = Self {
            reservoir_path,
            reservoir,
            seed: raw.seed,
            shots: raw.shots.map_or(Shots::Exact, Shots::PerState),
            repeats: raw.repeats,
            prep_mode: raw.prep_mode,
            reference_separable: raw.reference_separable.parse()?,
            reference_entangled: raw.reference_entangled.parse()?,
            target_names: raw.targets,
            observables: obs,
            train_composition: Composition::parse(&raw.train_composition)?,
            test_composition: Composition::parse(&raw.test_composition)?,
            sizes: SplitSizes {
                n_sep_train: raw.n_sep_train,
                n_ent_train: raw.n_ent_train,
                n_sep_test: raw.n_sep_test,
                n_ent_test: raw.n_ent_test,
            },
            train_options: TrainOptions {
                method,
                input_form: raw.input_form,
                affine_offset: raw.affine_offset,
            },
            sampler,
            mislabel_partials: raw.mislabel_partials,
            config_hash: hex_digest(text),
        };
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config(format!("{}: repeats must be positive", path.display())));
        }
        if self.target_names.is_empty() {
            return Err(Error::config(format!("{}: targets must be nonempty", path.display())));
        }
        if matches!(self.reference_entangled.label(), crate::states::StateLabel::Separable) {
            return Err(Error::config(format!(
                "{}: reference_entangled must name an entangled reference",
                path.display()
            )));
        }
        self.reservoir.validate()?;
        Ok(())
    }

    /// First witness-style target (name starting with "W_"), used for
    /// confusion matrices and the benchmark table.
    pub fn primary_witness(&self) -> Option<usize> {
        self.target_names.iter().position(|n| n.starts_with("W_"))
    }
}

pub fn hex_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a config template whose fields mirror [`ExperimentConfig::load`].
pub fn write_experiment_toml(
    path: &Path,
    reservoir: &str,
    seed: u64,
    shots: Option<u64>,
    overrides: &[(&str, String)],
) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("reservoir = \"{reservoir}\"\nseed = {seed}\n"));
    if let Some(n) = shots {
        text.push_str(&format!("shots = {n}\n"));
    }
    for (key, value) in overrides {
        text.push_str(&format!("{key} = {value}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Transmission budget of the apparatus and the source rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossModel {
    pub eta_qp: f64,
    pub eta_qw: f64,
    pub eta_proj: f64,
    pub eta_slm: f64,
    pub eta_smf: f64,
    pub cc_source_hz: f64,
}

impl LossModel {
    /// Transmissions measured on the physical apparatus.
    pub fn experimental() -> Self {
        Self { eta_qp: 0.80, eta_qw: 0.56, eta_proj: 0.5, eta_slm: 0.78, eta_smf: 0.4, cc_source_hz: 20_000.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_qp", self.eta_qp),
            ("eta_qw", self.eta_qw),
            ("eta_proj", self.eta_proj),
            ("eta_slm", self.eta_slm),
            ("eta_smf", self.eta_smf),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.cc_source_hz <= 0.0 {
            return Err(Error::config("cc_source_hz must be positive"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: LossModel = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}
