//! Experiment configuration: one JSON document with every default filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Ablation, FitOptions};
use crate::io::trace::LoadOptions;
use crate::model::{global_bandwidth, silverman_bandwidths, HyperParams, OptimSettings, SpatialKernel, Trace, DEFAULT_NU, DEFAULT_SAMPLES};
use crate::simulate::{benchmark_config, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthSetting {
    /// One value for every user.
    Fixed { value: f64 },
    /// Per-user Silverman rule; `fallback` when the data give no spread.
    Silverman { fallback: f64 },
    /// Silverman rule over all check-ins, shared by every user.
    Global { fallback: f64 },
}

impl Default for BandwidthSetting {
    fn default() -> Self {
        BandwidthSetting::Silverman { fallback: 1.0 }
    }
}

impl BandwidthSetting {
    pub fn resolve(&self, trace: &Trace) -> Vec<f64> {
        match *self {
            BandwidthSetting::Fixed { value } => vec![value; trace.n_users],
            BandwidthSetting::Silverman { fallback } => silverman_bandwidths(trace, fallback),
            BandwidthSetting::Global { fallback } => vec![global_bandwidth(trace, fallback); trace.n_users],
        }
    }
}

/// Data-independent parts of [`HyperParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub n_communities: usize,
    pub nu: f64,
    pub bandwidth: BandwidthSetting,
    /// Symmetric Dirichlet prior on θ.
    pub theta0: f64,
    pub n_samples: usize,
    pub kernel: SpatialKernel,
    pub quadrature_order: usize,
    pub excitation_cutoff: f64,
    pub optim: OptimSettings,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let base = HyperParams::new(0, 0, 10, 1.0);
        ModelSettings {
            n_communities: 10,
            nu: DEFAULT_NU,
            bandwidth: BandwidthSetting::default(),
            theta0: 1.0,
            n_samples: DEFAULT_SAMPLES,
            kernel: SpatialKernel::default(),
            quadrature_order: base.quadrature_order,
            excitation_cutoff: base.excitation_cutoff,
            optim: OptimSettings::default(),
        }
    }
}

impl ModelSettings {
    pub fn hyper_for(&self, trace: &Trace, seed: u64) -> Result<HyperParams> {
        let hyper = HyperParams {
            nu: self.nu,
            bandwidth: self.bandwidth.resolve(trace),
            theta0: vec![self.theta0; trace.n_categories],
            n_communities: self.n_communities,
            n_samples: self.n_samples,
            kernel: self.kernel,
            quadrature_order: self.quadrature_order,
            excitation_cutoff: self.excitation_cutoff,
            optim: self.optim.clone(),
            seed,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    /// Copies the optimiser and sampling settings onto `hyper`.
    pub fn apply_inference_settings(&self, hyper: &mut HyperParams) {
        hyper.n_samples = self.n_samples;
        hyper.optim = self.optim.clone();
        hyper.quadrature_order = self.quadrature_order;
        hyper.excitation_cutoff = self.excitation_cutoff;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Check-in CSV for `fit`, `predict`, `eval-communities` and `export-network`.
    pub trace: Option<PathBuf>,
    /// Category embedding table for `eval-communities`.
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Where fitted models are read from; defaults to `output_dir`.
    pub model_dir: Option<PathBuf>,
    pub load: LoadOptions,
    pub model: ModelSettings,
    /// Generator for `simulate` and `synth-recover`. Its seed is replaced by `seed`.
    pub sim: SimConfig,
    pub fit: FitOptions,
    /// Variants fitted by `fit` and compared by `predict` and `synth-recover`.
    pub ablations: Vec<Ablation>,
    /// In `synth-recover`, hold μ, η, θ and π at their true values and learn A and φ.
    pub recover_influence_only: bool,
    /// Fraction of events (by time) used for training.
    pub train_fraction: f64,
    pub ks: Vec<usize>,
    pub k_cats: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Soft per-event community weights instead of the argmax.
    pub soft_assignments: bool,
    pub seed: u64,
    /// Leave wall-clock timings out of every report.
    pub deterministic: bool,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trace: None,
            embeddings: None,
            output_dir: PathBuf::from("out"),
            model_dir: None,
            load: LoadOptions::default(),
            model: ModelSettings::default(),
            sim: benchmark_config(1),
            fit: FitOptions::default(),
            ablations: vec![Ablation::Full, Ablation::NoCategory, Ablation::NoInfluence, Ablation::NoBase],
            recover_influence_only: true,
            train_fraction: 0.8,
            ks: vec![5, 10, 20, 50],
            k_cats: vec![10, 50, 100],
            thresholds: vec![0.5, 0.7, 0.9],
            soft_assignments: false,
            seed: 1,
            deterministic: false,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.trace, &mut config.embeddings, &mut config.model_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.trace, &self.embeddings].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::config(format!("{} does not exist", p.display())));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::config(format!("train_fraction {} outside (0, 1]", self.train_fraction)));
        }
        if self.ks.contains(&0) {
            return Err(Error::config("top-K cutoffs must be positive"));
        }
        if self.k_cats.contains(&0) {
            return Err(Error::config("K_cat values must be positive"));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::config(format!("threshold {t} outside [0, 1]")));
        }
        if self.model.n_communities == 0 {
            return Err(Error::config("n_communities must be positive"));
        }
        if !(self.model.nu > 0.0 && self.model.theta0 > 0.0 && self.model.n_samples > 0) {
            return Err(Error::config("nu, theta0 and n_samples must be positive"));
        }
        Ok(())
    }

    pub fn model_dir(&self) -> &Path {
        self.model_dir.as_deref().unwrap_or(&self.output_dir)
    }

    /// The generator config with the experiment seed.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig { seed: self.seed, ..self.sim.clone() }
    }

    pub fn require_trace(&self) -> Result<&Path> {
        self.trace.as_deref().ok_or_else(|| Error::config("no trace file configured"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let config = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
        let sparse: ExperimentConfig = serde_json::from_str("{\"seed\": 7}").unwrap();
        assert_eq!(sparse.seed, 7);
        assert_eq!(sparse.ks, vec![5, 10, 20, 50]);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "user_id,timestamp,x,y,venue_id,category\n").unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\"trace\": \"t.csv\", \"output_dir\": \"o\"}").unwrap();
        let config = ExperimentConfig::load(&path).unwrap();
        assert_eq!(config.trace.unwrap(), dir.path().join("t.csv"));
        assert_eq!(config.output_dir, dir.path().join("o"));
        std::fs::write(&path, "{\"trace\": \"missing.csv\"}").unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));
        std::fs::write(&path, "{\"ks\": [0]}").unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
    }
}
