//! Declarative JSON configs for the CLI commands.
//!
//! Every command accepts `--config <file>`; the schemas below are versioned
//! by an optional `"schema"` field and documented in the README. Nested
//! resources (system, signal, pair) may be given inline or as
//! `{"file": "path"}` references resolved relative to the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use switchstab::lyapunov::QuadraticPairJson;
use switchstab::signal::{GenerateOptions, ModeId, SignalClassSpec, SwitchingSignal};
use switchstab::system::SystemJson;
use switchstab::Signal;

/// Inline value or a `{"file": path}` reference.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Source<X> {
    File { file: PathBuf },
    Inline(X),
}

impl<X: DeserializeOwned> Source<X> {
    pub fn load(&self, base: &Path) -> Result<X>
    where
        X: Clone,
    {
        match self {
            Source::Inline(x) => Ok(x.clone()),
            Source::File { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))
            }
        }
    }
}

/// Signal generation request used wherever a command accepts a signal.
#[derive(Clone, Debug, Deserialize)]
pub struct GenerateSpec {
    pub class: SignalClassSpec,
    pub horizon: Option<(f64, f64)>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub modes: Option<Vec<u32>>,
    #[serde(default)]
    pub initial_mode: Option<u32>,
    /// `[[mode, weight], ...]`
    #[serde(default)]
    pub mode_weights: Option<Vec<(u32, f64)>>,
}

impl GenerateSpec {
    pub fn options(&self) -> GenerateOptions {
        GenerateOptions {
            modes: self
                .modes
                .as_ref()
                .map(|m| m.iter().copied().map(ModeId).collect()),
            initial_mode: self.initial_mode.map(ModeId),
            mode_weights: self.mode_weights.as_ref().map(|w| {
                w.iter()
                    .map(|&(m, weight)| (ModeId(m), weight))
                    .collect::<BTreeMap<_, _>>()
            }),
        }
    }

    pub fn build(&self, fallback_horizon: Option<(f64, f64)>, seed_override: Option<u64>) -> Result<Signal> {
        let horizon = self
            .horizon
            .or(fallback_horizon)
            .ok_or_else(|| anyhow!("signal generation needs a horizon"))?;
        let seed = seed_override.unwrap_or(self.seed);
        Ok(switchstab::signal::generate(
            &self.class,
            horizon,
            seed,
            &self.options(),
        )?)
    }
}

/// A signal: inline object, file reference, or generation request.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SignalSource {
    File { file: PathBuf },
    Generate { generate: GenerateSpec },
    Inline(SwitchingSignal<f64>),
}

impl SignalSource {
    pub fn load(
        &self,
        base: &Path,
        fallback_horizon: Option<(f64, f64)>,
        seed_override: Option<u64>,
    ) -> Result<Signal> {
        match self {
            SignalSource::Inline(sig) => Ok(sig.clone()),
            SignalSource::File { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))
            }
            SignalSource::Generate { generate } => generate.build(fallback_horizon, seed_override),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub system: Source<SystemJson>,
    pub signal: SignalSource,
    pub x0: Vec<f64>,
    pub span: (f64, f64),
    pub step: f64,
    #[serde(default)]
    pub backward: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub class: SignalClassSpec,
    pub signal: SignalSource,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(flatten)]
    pub generate: GenerateSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub system: Source<SystemJson>,
    pub signal: SignalSource,
    pub x0: Vec<f64>,
    pub span: (f64, f64),
    pub step: f64,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    /// Gap threshold for the switch-aware estimate; defaults to a quarter of
    /// the smallest inter-switch gap.
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_tail_fraction() -> f64 {
    0.2
}

fn default_cluster_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CertifyTuning {
    pub seed: Option<u64>,
    pub candidate_samples: Option<usize>,
    pub decrease_samples: Option<usize>,
    pub membership_tau: Option<f64>,
    pub membership_step: Option<f64>,
    pub monitor_trials: Option<usize>,
    pub monitor_horizon: Option<f64>,
    pub uniqueness_asserted: Option<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub system: Source<SystemJson>,
    pub pair: Source<QuadraticPairJson>,
    #[serde(default)]
    pub class: Option<SignalClassSpec>,
    #[serde(default)]
    pub common_p_assumed: bool,
    #[serde(default)]
    pub options: CertifyTuning,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub system: Source<SystemJson>,
    pub class: SignalClassSpec,
    pub trials: usize,
    pub ball_radius: f64,
    pub horizon: f64,
    pub eps: f64,
    #[serde(default = "default_sweep_step")]
    pub step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub modes: Option<Vec<u32>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_sweep_step() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(default)]
    pub certificate: Option<PathBuf>,
    #[serde(default)]
    pub validation: Option<PathBuf>,
    #[serde(default)]
    pub stats: Option<PathBuf>,
    #[serde(default)]
    pub limits: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Expected schema tags, one per command config.
pub mod schemas {
    pub const SIMULATE: &str = "switchstab/simulate/v1";
    pub const VALIDATE: &str = "switchstab/validate-signal/v1";
    pub const GENERATE: &str = "switchstab/generate-signal/v1";
    pub const LIMITS: &str = "switchstab/limits-config/v1";
    pub const CERTIFY: &str = "switchstab/certify/v1";
    pub const SWEEP: &str = "switchstab/stability-sweep/v1";
    pub const REPORT: &str = "switchstab/report/v1";
}

/// A `schema` field, when present, must carry the expected tag.
pub fn check_schema(found: &Option<String>, expected: &str) -> Result<()> {
    match found {
        None => Ok(()),
        Some(tag) if tag == expected => Ok(()),
        Some(tag) => Err(anyhow!(
            "config schema `{tag}` does not match expected `{expected}`"
        )),
    }
}

/// Loads and parses a JSON config file.
pub fn load_config<X: DeserializeOwned>(path: &Path) -> Result<(X, PathBuf)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = serde_json::from_str(&text)
        .with_context(|| format!("parsing {} (line/column in the cause)", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok((cfg, base))
}
