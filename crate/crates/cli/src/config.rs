//! Experiment configuration: a TOML document, overridden by command-line
//! flags, validated and hashed before anything runs.

use crate::error::{CliError, Result};
use hyperop_constructions::Builder;
use hyperop_core::measures::{MeasureSpec, SolverSettings};
use hyperop_nets::train::{Architecture, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// File written next to every command's outputs.
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Benchmark {
    Advection,
    BurgersGrf,
    ShockTube,
    ShiftedSine,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Advection => "advection",
            Benchmark::BurgersGrf => "burgers_grf",
            Benchmark::ShockTube => "shock_tube",
            Benchmark::ShiftedSine => "shifted_sine",
        }
    }

    pub fn default_measure(self) -> MeasureSpec {
        match self {
            Benchmark::Advection => MeasureSpec::desk_box(),
            Benchmark::BurgersGrf => MeasureSpec::desk_grf(),
            Benchmark::ShockTube => MeasureSpec::shock_tube(),
            Benchmark::ShiftedSine => MeasureSpec::shifted_sine(),
        }
    }

    pub fn default_solver(self) -> SolverSettings {
        match self {
            Benchmark::Advection => SolverSettings::desk_advection(),
            Benchmark::BurgersGrf => SolverSettings::desk_burgers_grf(),
            Benchmark::ShockTube => SolverSettings::shock_tube(),
            Benchmark::ShiftedSine => SolverSettings { final_time: 1.5, ..SolverSettings::shock_tube() },
        }
    }
}

/// One benchmark; `measure` and `solver` replace the preset when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub name: Benchmark,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
}

impl BenchmarkConfig {
    pub fn preset(name: Benchmark) -> Self {
        Self { name, measure: None, solver: None }
    }

    pub fn measure(&self) -> MeasureSpec {
        self.measure.clone().unwrap_or_else(|| self.name.default_measure())
    }

    pub fn solver(&self) -> SolverSettings {
        self.solver.unwrap_or_else(|| self.name.default_solver())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_eval")]
    pub n_val: usize,
    #[serde(default = "default_n_eval")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid() -> usize {
    128
}
fn default_n_train() -> usize {
    256
}
fn default_n_eval() -> usize {
    64
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { grid: default_grid(), n_train: default_n_train(), n_val: default_n_eval(), n_test: default_n_eval(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Field {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_field")]
    pub field: Field,
    #[serde(default = "default_split")]
    pub split: Split,
    /// Eigenvalues kept in the report.
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default = "default_fit_min")]
    pub fit_min: usize,
    #[serde(default = "default_p_max")]
    pub fit_max: usize,
    /// Leading eigenvalues compared with the Fourier prediction for box-wave
    /// measures; 0 disables the comparison.
    #[serde(default = "default_fourier_top")]
    pub fourier_top: usize,
}

fn default_field() -> Field {
    Field::Output
}
fn default_split() -> Split {
    Split::Train
}
fn default_p_max() -> usize {
    64
}
fn default_fit_min() -> usize {
    4
}
fn default_fourier_top() -> usize {
    16
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            field: default_field(),
            split: default_split(),
            p_max: default_p_max(),
            fit_min: default_fit_min(),
            fit_max: default_p_max(),
            fourier_top: default_fourier_top(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<Builder>,
    /// Budget ladder (`m`, `N` or `eps` depending on the builder); empty
    /// means the builder's default ladder.
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_mc() -> usize {
    256
}

impl Default for ConstructConfig {
    fn default() -> Self {
        Self { builder: None, budgets: Vec::new(), n_mc: default_n_mc(), seed: 0 }
    }
}

/// Default budget ladder for a builder.
pub fn default_budgets(builder: &Builder) -> Vec<f64> {
    match builder {
        Builder::AdvSdon { .. } => vec![128.0, 256.0, 512.0, 1024.0, 2048.0],
        Builder::AdvFno => vec![64.0, 128.0, 256.0, 512.0, 1024.0],
        Builder::BurgSdon { .. } | Builder::BurgFno { .. } => vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub architecture: Architecture,
}

fn default_models() -> Vec<ModelConfig> {
    [Architecture::desk_fno(), Architecture::desk_shift_deeponet(), Architecture::desk_deeponet()]
        .into_iter()
        .map(|a| ModelConfig { name: a.name().to_string(), architecture: a })
        .collect()
}

fn default_train() -> TrainConfig {
    TrainConfig { val_every: 10, ..TrainConfig::with_epochs(2000) }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_benchmarks() -> Vec<BenchmarkConfig> {
    vec![BenchmarkConfig::preset(Benchmark::Advection)]
}

/// Everything a run depends on. `output_dir` is excluded from the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Model seeds; each one replaces `train.seed` and seeds initialisation.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_benchmarks")]
    pub benchmarks: Vec<BenchmarkConfig>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub construct: ConstructConfig,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: default_output_dir(),
            seeds: default_seeds(),
            benchmarks: default_benchmarks(),
            data: DataConfig::default(),
            spectrum: SpectrumConfig::default(),
            construct: ConstructConfig::default(),
            train: default_train(),
            models: default_models(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Schema checks beyond what deserialisation enforces.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.benchmarks.is_empty() {
            return bad("no benchmarks".into());
        }
        for (i, b) in self.benchmarks.iter().enumerate() {
            if self.benchmarks[..i].iter().any(|o| o.name == b.name) {
                return bad(format!("benchmark {} listed twice", b.name.name()));
            }
            b.measure().validate().map_err(|e| CliError::Config(format!("{}: {e}", b.name.name())))?;
            let s = b.solver();
            if !(s.final_time >= 0.0 && s.cfl > 0.0 && s.cfl <= 1.0) || s.refinement == 0 {
                return bad(format!("{}: invalid solver settings {s:?}", b.name.name()));
            }
        }
        if self.data.grid < 2 {
            return bad(format!("grid must be at least 2 (got {})", self.data.grid));
        }
        if self.seeds.is_empty() {
            return bad("no model seeds".into());
        }
        if self.models.is_empty() {
            return bad("no models".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("model name {:?} must be non-empty [A-Za-z0-9_-]", m.name));
            }
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return bad(format!("model {} listed twice", m.name));
            }
        }
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let sp = &self.spectrum;
        if sp.p_max == 0 || sp.fit_min == 0 || sp.fit_min >= sp.fit_max {
            return bad(format!("spectrum window: need 0 < fit_min < fit_max (got {} and {})", sp.fit_min, sp.fit_max));
        }
        if self.construct.n_mc == 0 {
            return bad("construct.n_mc must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn benchmark_dir(&self, b: Benchmark) -> PathBuf {
        self.output_dir.join(b.name())
    }

    pub fn dataset_path(&self, b: Benchmark, split: Split) -> PathBuf {
        self.benchmark_dir(b).join(format!("{}.dpl", split.name()))
    }

    pub fn checkpoint_path(&self, b: Benchmark, model: &str, seed: u64) -> PathBuf {
        self.benchmark_dir(b).join("models").join(format!("{model}_s{seed}.ckpt"))
    }

    /// Writes the resolved config into the output directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join(RESOLVED_CONFIG);
        let text = format!("# config_hash = \"{}\"\n{}", self.hash(), self.to_toml()?);
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Message attached to Burgers reports with a final time at or below π.
pub fn burgers_time_note(t: f64) -> Option<String> {
    (t <= PI).then(|| format!("t = {t} <= pi: the long-time profile bound assumes t > pi; errors are reported as measured"))
}
