//! Experiment configuration: a TOML document with `[model]`, `[numerics]`
//! and `[output]` sections.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use qsdlab_core::engine::JumpRule;
use qsdlab_core::qsd::EnsembleMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Criteria,
    Qsd,
    Qprocess,
    ComingDown,
    Validate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Criteria => "criteria",
            Task::Qsd => "qsd",
            Task::Qprocess => "qprocess",
            Task::ComingDown => "coming_down",
            Task::Validate => "validate",
        }
    }
}

/// Killing rate `κ` in original coordinates (for `natural_scale`, the
/// density of `k` on `(0, 1)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Killing {
    #[default]
    None,
    /// `c · min(1, y)`
    MinOne {
        #[serde(default = "one")]
        c: f64,
    },
    Constant { c: f64 },
    /// `c · y^p`
    Power { c: f64, p: f64 },
    /// `max(sin(1/y), √y)`
    Oscillating,
    /// `max(y^{−1/2}, √y)`
    InvSqrtOrSqrt,
    /// Atoms of mass `2^{-n}` at `2^{-n}`, `n = 1..=count`.
    Atoms { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ModelConfig {
    /// `dY = √Y dB + Y h(Y) dt`, `h(y) = growth − competition · y^beta`.
    Logistic {
        #[serde(default = "one")]
        growth: f64,
        #[serde(default = "one")]
        competition: f64,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        killing: Killing,
    },
    /// `dY = dB − h(Y) dt`, `h(y) = coef · y^beta`.
    DriftedBm {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default = "two")]
        beta: f64,
        #[serde(default)]
        killing: Killing,
    },
    /// Natural scale, `m = dx` on `(0, 1)` and `e^{−(x−1)} dx` above;
    /// `k = κ(x) dx` restricted to `(0, 1)`.
    NaturalScale {
        #[serde(default)]
        killing: Killing,
    },
    /// Logistic model with `+size` jumps at rate `rate` above `threshold`.
    JumpExtended {
        #[serde(default = "one")]
        growth: f64,
        #[serde(default = "one")]
        competition: f64,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        killing: Killing,
        #[serde(default)]
        jump: JumpRule,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub seed: u64,
    #[serde(default = "d::dt")]
    pub dt: f64,
    /// Starting point of paths and ensembles (original coordinates).
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default = "d::n_particles")]
    pub n_particles: usize,
    #[serde(default = "d::n_paths")]
    pub n_paths: usize,
    #[serde(default = "d::grid_nodes")]
    pub grid_nodes: usize,
    /// Top of the spectral grid; defaults to the entrance truncation level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_top: Option<f64>,
    /// Horizon of the survival fit.
    #[serde(default = "d::horizon")]
    pub horizon: f64,
    #[serde(default = "d::t_end")]
    pub t_end: f64,
    /// Resampling interval of the Fleming–Viot ensemble.
    #[serde(default = "d::slice")]
    pub slice: f64,
    #[serde(default = "d::snapshot_every")]
    pub snapshot_every: f64,
    #[serde(default = "d::mode")]
    pub mode: EnsembleMode,
    #[serde(default = "d::bins")]
    pub bins: usize,
    #[serde(default = "d::eta_x")]
    pub eta_x: Vec<f64>,
    #[serde(default = "d::eta_t_star")]
    pub eta_t_star: f64,
    /// Paths per point of `eta_x`; 0 skips the eigenfunction estimate.
    #[serde(default = "d::eta_paths")]
    pub eta_paths: usize,
    #[serde(default = "d::qprocess_grid_nodes")]
    pub qprocess_grid_nodes: usize,
    #[serde(default = "d::qprocess_paths")]
    pub qprocess_paths: usize,
    #[serde(default = "d::qprocess_horizon")]
    pub qprocess_horizon: f64,
    /// Diffusion Q-process paths (rejection sampler); 0 skips.
    #[serde(default)]
    pub qprocess_sde_paths: usize,
    #[serde(default = "d::sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "one")]
    pub burn_in: f64,
    #[serde(default = "d::cd_t")]
    pub coming_down_t: f64,
    #[serde(default = "d::cd_x")]
    pub coming_down_x: Vec<f64>,
    #[serde(default = "d::cd_paths")]
    pub coming_down_paths: usize,
    #[serde(default = "d::cd_dt")]
    pub coming_down_dt: f64,
    /// Truncation levels (natural coordinates) for unbounded supports.
    #[serde(default = "d::cd_trunc")]
    pub coming_down_truncation: Vec<f64>,
    #[serde(default = "d::feller_paths")]
    pub feller_paths: usize,
}

mod d {
    use qsdlab_core::qsd::EnsembleMode;
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn n_particles() -> usize {
        10_000
    }
    pub fn n_paths() -> usize {
        20_000
    }
    pub fn grid_nodes() -> usize {
        800
    }
    pub fn horizon() -> f64 {
        8.0
    }
    pub fn t_end() -> f64 {
        10.0
    }
    pub fn slice() -> f64 {
        1e-3
    }
    pub fn snapshot_every() -> f64 {
        0.1
    }
    pub fn mode() -> EnsembleMode {
        EnsembleMode::FlemingViot
    }
    pub fn bins() -> usize {
        20
    }
    pub fn eta_x() -> Vec<f64> {
        vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0]
    }
    pub fn eta_t_star() -> f64 {
        3.0
    }
    pub fn eta_paths() -> usize {
        4000
    }
    pub fn qprocess_grid_nodes() -> usize {
        200
    }
    pub fn qprocess_paths() -> usize {
        50
    }
    pub fn qprocess_horizon() -> f64 {
        200.0
    }
    pub fn sample_dt() -> f64 {
        0.01
    }
    pub fn cd_t() -> f64 {
        2.0
    }
    pub fn cd_x() -> Vec<f64> {
        vec![0.25, 0.5, 1.0, 2.0, 4.0]
    }
    pub fn cd_paths() -> usize {
        2000
    }
    pub fn cd_dt() -> f64 {
        1e-2
    }
    pub fn cd_trunc() -> Vec<f64> {
        vec![6.0]
    }
    pub fn feller_paths() -> usize {
        100_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Number of individual paths dumped to `paths.csv` (qsd task).
    #[serde(default)]
    pub dump_paths: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), formats: default_formats(), dump_paths: 0 }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub model: ModelConfig,
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        let positive = [
            ("dt", n.dt),
            ("x0", n.x0),
            ("horizon", n.horizon),
            ("t_end", n.t_end),
            ("slice", n.slice),
            ("snapshot_every", n.snapshot_every),
            ("eta_t_star", n.eta_t_star),
            ("qprocess_horizon", n.qprocess_horizon),
            ("sample_dt", n.sample_dt),
            ("coming_down_t", n.coming_down_t),
            ("coming_down_dt", n.coming_down_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if !(n.burn_in >= 0.0) {
            return Err(ConfigError::Invalid("numerics.burn_in must be non-negative".into()));
        }
        let counts = [
            ("n_particles", n.n_particles),
            ("n_paths", n.n_paths),
            ("grid_nodes", n.grid_nodes),
            ("bins", n.bins),
            ("qprocess_grid_nodes", n.qprocess_grid_nodes),
            ("qprocess_paths", n.qprocess_paths),
            ("coming_down_paths", n.coming_down_paths),
            ("feller_paths", n.feller_paths),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("numerics.{name} must be positive")));
            }
        }
        if let Some(top) = n.grid_top {
            if !(top > n.x0) {
                return Err(ConfigError::Invalid("numerics.grid_top must exceed x0".into()));
            }
        }
        for (name, v) in [("eta_x", &n.eta_x), ("coming_down_x", &n.coming_down_x), ("coming_down_truncation", &n.coming_down_truncation)] {
            if v.iter().any(|&x| !(x > 0.0)) || v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ConfigError::Invalid(format!("numerics.{name} must be positive and increasing")));
            }
        }
        let with_killing = |k: &Killing| -> Result<(), ConfigError> {
            match k {
                Killing::Constant { c } | Killing::MinOne { c } | Killing::Power { c, .. } if !(*c >= 0.0) => {
                    Err(ConfigError::Invalid("killing coefficient must be non-negative".into()))
                }
                Killing::Atoms { count } if *count == 0 => Err(ConfigError::Invalid("killing.count must be positive".into())),
                _ => Ok(()),
            }
        };
        match &self.model {
            ModelConfig::Logistic { competition, beta, killing, .. } | ModelConfig::JumpExtended { competition, beta, killing, .. } => {
                if !(*competition > 0.0 && *beta > 0.0) {
                    return Err(ConfigError::Invalid("logistic competition and beta must be positive".into()));
                }
                with_killing(killing)?;
            }
            ModelConfig::DriftedBm { coef, beta, killing } => {
                if !(*coef > 0.0 && *beta > 0.0) {
                    return Err(ConfigError::Invalid("drifted_bm coef and beta must be positive".into()));
                }
                with_killing(killing)?;
            }
            ModelConfig::NaturalScale { killing } => with_killing(killing)?,
        }
        if let ModelConfig::JumpExtended { jump, .. } = &self.model {
            if !(jump.rate > 0.0 && jump.size > 0.0 && jump.threshold > 0.0) {
                return Err(ConfigError::Invalid("jump rate, size and threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
kind = "logistic"

[model.killing]
kind = "min_one"

[numerics]
seed = 42
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.numerics.seed, 42);
        assert_eq!(cfg.numerics.dt, 1e-3);
        assert_eq!(cfg.output.directory, PathBuf::from("out"));
        assert!(matches!(cfg.model, ModelConfig::Logistic { killing: Killing::MinOne { c }, .. } if c == 1.0));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let once = cfg.to_toml();
        let again = ExperimentConfig::parse(&once).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(once, again.to_toml());
    }

    #[test]
    fn seed_is_required() {
        let err = ExperimentConfig::parse("[model]\nkind = \"logistic\"\n[numerics]\ndt = 0.01\n").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn rejects_unknown_kind_and_bad_numbers() {
        assert!(ExperimentConfig::parse("[model]\nkind = \"wright_fisher\"\n[numerics]\nseed = 1\n").is_err());
        assert!(ExperimentConfig::parse("[model]\nkind = \"logistic\"\n[numerics]\nseed = 1\ndt = -1.0\n").is_err());
        assert!(ExperimentConfig::parse("[model]\nkind = \"logistic\"\n[numerics]\nseed = 1\nn_paths = 0\n").is_err());
        assert!(ExperimentConfig::parse("[model]\nkind = \"logistic\"\n[numerics]\nseed = 1\ntypo = 3\n").is_err());
    }

    #[test]
    fn jump_section_parses() {
        let text = "[model]\nkind = \"jump_extended\"\n[model.jump]\nrate = 2.0\nsize = 0.5\nthreshold = 1.0\n[numerics]\nseed = 3\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(cfg.model, ModelConfig::JumpExtended { jump, .. } if jump.rate == 2.0 && jump.size == 0.5));
    }
}
