//! Configuration resolution: TOML file keys, command-line overrides, and
//! range validation. Precedence is flags > `RLTC_WORKERS` (workers only) >
//! file > defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::FailureModel;
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, SweepAxes};
use crate::learning::DecayGranularity;
use crate::policy::PolicyKind;

/// Environment variable overriding the worker count from the config file.
pub const WORKERS_ENV: &str = "RLTC_WORKERS";

/// Raw file contents; every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub grid_dim: Option<usize>,
    pub frac_reliable: Option<f64>,
    pub noise: Option<f64>,
    pub failure_model: Option<String>,
    pub policy: Option<String>,
    pub horizon: Option<usize>,
    pub train_episodes: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon0: Option<f64>,
    pub decay_r: Option<f64>,
    pub decay_granularity: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub axes: Option<FileAxes>,
}

/// Sweep axes (file-only; absent axes fall back to the base value).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileAxes {
    pub grid_dim: Option<Vec<usize>>,
    pub frac_reliable: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    pub failure_model: Option<Vec<String>>,
    pub policy: Option<Vec<String>>,
    pub alpha: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub epsilon0: Option<Vec<f64>>,
    pub decay_r: Option<Vec<f64>>,
}

/// Command-line overrides; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid_dim: Option<usize>,
    pub frac_reliable: Option<f64>,
    pub noise: Option<f64>,
    pub failure_model: Option<FailureModel>,
    pub policy: Option<PolicyKind>,
    pub horizon: Option<usize>,
    pub train_episodes: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon0: Option<f64>,
    pub decay_r: Option<f64>,
    pub decay_granularity: Option<DecayGranularity>,
    pub seeds: Option<Vec<u64>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Fully resolved settings for a run or sweep.
#[derive(Debug, Clone)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub axes: SweepAxes,
    pub workers: usize,
    pub out: PathBuf,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig {
        key: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_token<T>(key: &str, token: &str) -> Result<T>
where
    T: std::str::FromStr<Err = String>,
{
    token.parse().map_err(|e| invalid(key, e))
}

fn check_range(key: &str, ok: bool, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, reason))
    }
}

/// Merge file values and overrides onto the defaults and validate ranges.
pub fn resolve(file: FileConfig, over: Overrides) -> Result<Settings> {
    let defaults = ExperimentConfig::default();

    let failure_model = match (over.failure_model, file.failure_model) {
        (Some(v), _) => v,
        (None, Some(token)) => parse_token("failure_model", &token)?,
        (None, None) => defaults.failure_model,
    };
    let policy = match (over.policy, file.policy) {
        (Some(v), _) => v,
        (None, Some(token)) => parse_token("policy", &token)?,
        (None, None) => defaults.policy,
    };
    let decay_granularity = match (over.decay_granularity, file.decay_granularity) {
        (Some(v), _) => v,
        (None, Some(token)) => parse_token("decay_granularity", &token)?,
        (None, None) => defaults.learner.decay_granularity,
    };

    let experiment = ExperimentConfig {
        grid_dim: over.grid_dim.or(file.grid_dim).unwrap_or(defaults.grid_dim),
        frac_reliable: over
            .frac_reliable
            .or(file.frac_reliable)
            .unwrap_or(defaults.frac_reliable),
        noise: over.noise.or(file.noise).unwrap_or(defaults.noise),
        failure_model,
        policy,
        horizon: over.horizon.or(file.horizon).unwrap_or(defaults.horizon),
        train_episodes: over
            .train_episodes
            .or(file.train_episodes)
            .unwrap_or(defaults.train_episodes),
        eval_episodes: over
            .eval_episodes
            .or(file.eval_episodes)
            .unwrap_or(defaults.eval_episodes),
        learner: crate::learning::LearnerConfig {
            alpha: over.alpha.or(file.alpha).unwrap_or(defaults.learner.alpha),
            gamma: over.gamma.or(file.gamma).unwrap_or(defaults.learner.gamma),
            epsilon0: over
                .epsilon0
                .or(file.epsilon0)
                .unwrap_or(defaults.learner.epsilon0),
            decay_r: over
                .decay_r
                .or(file.decay_r)
                .unwrap_or(defaults.learner.decay_r),
            decay_granularity,
        },
        seeds: over.seeds.or(file.seeds).unwrap_or(defaults.seeds),
    };

    validate(&experiment)?;

    let axes = resolve_axes(file.axes.unwrap_or_default(), &experiment)?;

    let workers = over
        .workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .or(file.workers)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    check_range("workers", workers >= 1, "must be at least 1")?;

    let out = over
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("results.csv"));

    Ok(Settings {
        experiment,
        axes,
        workers,
        out,
    })
}

fn validate(c: &ExperimentConfig) -> Result<()> {
    check_range("grid_dim", c.grid_dim >= 2, "must be at least 2")?;
    check_range(
        "frac_reliable",
        c.frac_reliable > 0.0 && c.frac_reliable <= 1.0,
        "must be in (0, 1]",
    )?;
    check_range("noise", (0.0..=1.0).contains(&c.noise), "must be in [0, 1]")?;
    check_range("horizon", c.horizon >= 1, "must be at least 1")?;
    check_range("eval_episodes", c.eval_episodes >= 1, "must be at least 1")?;
    check_range("alpha", c.learner.alpha > 0.0, "must be positive")?;
    check_range(
        "gamma",
        (0.0..1.0).contains(&c.learner.gamma),
        "must be in [0, 1)",
    )?;
    check_range(
        "epsilon0",
        (0.0..=1.0).contains(&c.learner.epsilon0),
        "must be in [0, 1]",
    )?;
    check_range(
        "decay_r",
        c.learner.decay_r > 0.0 && c.learner.decay_r <= 1.0,
        "must be in (0, 1]",
    )?;
    check_range("seeds", !c.seeds.is_empty(), "must list at least one seed")?;
    Ok(())
}

fn resolve_axes(file: FileAxes, base: &ExperimentConfig) -> Result<SweepAxes> {
    let mut axes = SweepAxes {
        grid_dim: file.grid_dim.unwrap_or_default(),
        frac_reliable: file.frac_reliable.unwrap_or_default(),
        noise: file.noise.unwrap_or_default(),
        failure_model: Vec::new(),
        policy: Vec::new(),
        alpha: file.alpha.unwrap_or_default(),
        gamma: file.gamma.unwrap_or_default(),
        epsilon0: file.epsilon0.unwrap_or_default(),
        decay_r: file.decay_r.unwrap_or_default(),
    };
    for token in file.failure_model.unwrap_or_default() {
        axes.failure_model
            .push(parse_token("axes.failure_model", &token)?);
    }
    for token in file.policy.unwrap_or_default() {
        axes.policy.push(parse_token("axes.policy", &token)?);
    }

    // validate every expanded condition so errors surface before any run
    for config in crate::harness::expand_axes(base, &axes) {
        validate(&config)?;
    }
    Ok(axes)
}
