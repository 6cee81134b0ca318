//! Experiment orchestration: seeded repetitions (train then evaluate),
//! Cartesian parameter sweeps, and cross-seed aggregation.
//!
//! A repetition is a pure function of (config, seed): the seed feeds one
//! generator whose first draws place the unreliable nodes, followed by all
//! training-episode draws, then all evaluation-episode draws. Repetitions
//! never share state, so sweeps parallelize over them freely without
//! affecting any result.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{run_episode, EpisodeConfig, FailureModel, Roster};
use crate::error::{Error, Result};
use crate::learning::{LearnerConfig, QTableSet, TrainingState};
use crate::metrics::MetricSample;
use crate::policy::{PolicyKind, PolicySet};
use crate::topology::Topology;

/// Full description of one experimental condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid_dim: usize,
    pub frac_reliable: f64,
    /// Probability `1 - p` that a reliable agent's initial value is 0.
    pub noise: f64,
    pub failure_model: FailureModel,
    pub policy: PolicyKind,
    /// Episode length T.
    pub horizon: usize,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    pub learner: LearnerConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_dim: 4,
            frac_reliable: 0.75,
            noise: 0.2,
            failure_model: FailureModel::AlwaysZero,
            policy: PolicyKind::Rltc,
            horizon: 30,
            train_episodes: 20_000,
            eval_episodes: 2_000,
            learner: LearnerConfig::default(),
            seeds: (1..=30).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn node_count(&self) -> usize {
        self.grid_dim * self.grid_dim
    }

    /// Stable identifier for one condition (everything except the seed).
    pub fn config_id(&self) -> String {
        format!(
            "d{}-f{}-n{}-{}-{}-T{}-tr{}-ev{}-a{}-g{}-e{}-r{}-{}",
            self.grid_dim,
            self.frac_reliable,
            self.noise,
            self.failure_model,
            self.policy,
            self.horizon,
            self.train_episodes,
            self.eval_episodes,
            self.learner.alpha,
            self.learner.gamma,
            self.learner.epsilon0,
            self.learner.decay_r,
            self.learner.decay_granularity,
        )
    }
}

/// Outcome of one repetition: the per-episode evaluation metric means,
/// their across-episode mean and standard deviation, plus optional
/// training traces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    /// One metric mean per evaluation episode.
    pub episode_means: Vec<MetricSample>,
    pub eval_mean: MetricSample,
    pub eval_std: MetricSample,
    /// Per-training-episode mean reward, present when requested.
    pub train_rewards: Option<Vec<f64>>,
    /// Learned tables (RLTC only).
    pub qtables: Option<QTableSet>,
}

/// One seeded repetition: place the roster, train (RLTC only), evaluate
/// greedily with frozen tables, and aggregate the evaluation episodes.
pub fn run_repetition(
    config: &ExperimentConfig,
    seed: u64,
    record_training: bool,
) -> Result<RunResult> {
    let topology = Topology::grid(config.grid_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // roster placement consumes the first draws of the repetition RNG
    let roster = Roster::assign(&topology, config.frac_reliable, &mut rng);
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }

    let mut policy = PolicySet::new(config.policy, &topology, &roster);
    let episode = EpisodeConfig {
        horizon: config.horizon,
        p: 1.0 - config.noise,
    };

    // baselines have nothing to learn; their training phase is skipped
    let mut train_rewards = record_training.then(Vec::new);
    if config.policy == PolicyKind::Rltc {
        let mut training = TrainingState::new(config.learner.clone());
        for _ in 0..config.train_episodes {
            let (metrics, _) = run_episode(
                &topology,
                &roster,
                config.failure_model,
                &mut policy,
                Some(&mut training),
                &episode,
                &mut rng,
            )?;
            if let Some(curve) = &mut train_rewards {
                curve.push(metrics.mean.avg_reward);
            }
        }
    }

    // evaluation: greedy (epsilon = 0), tables frozen
    let mut episode_means = Vec::with_capacity(config.eval_episodes);
    for _ in 0..config.eval_episodes {
        let (metrics, _) = run_episode(
            &topology,
            &roster,
            config.failure_model,
            &mut policy,
            None,
            &episode,
            &mut rng,
        )?;
        episode_means.push(metrics.mean);
    }

    Ok(RunResult {
        seed,
        eval_mean: MetricSample::mean_of(&episode_means)?,
        eval_std: MetricSample::std_of(&episode_means)?,
        episode_means,
        train_rewards: train_rewards.filter(|c| !c.is_empty()),
        qtables: policy.qtables().cloned(),
    })
}

/// Axis values for a sweep. Empty axes are filled from the base config, so
/// a default `SweepAxes` reproduces the base condition alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAxes {
    pub grid_dim: Vec<usize>,
    pub frac_reliable: Vec<f64>,
    pub noise: Vec<f64>,
    pub failure_model: Vec<FailureModel>,
    pub policy: Vec<PolicyKind>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon0: Vec<f64>,
    pub decay_r: Vec<f64>,
}

fn axis<T: Clone>(values: &[T], base: &T) -> Vec<T> {
    if values.is_empty() {
        vec![base.clone()]
    } else {
        values.to_vec()
    }
}

/// Cartesian product of the axes over the base config, in a fixed order:
/// grid_dim, frac_reliable, noise, failure_model, policy, alpha, gamma,
/// epsilon0, decay_r (innermost).
pub fn expand_axes(base: &ExperimentConfig, axes: &SweepAxes) -> Vec<ExperimentConfig> {
    let mut configs = Vec::new();
    for &grid_dim in &axis(&axes.grid_dim, &base.grid_dim) {
        for &frac_reliable in &axis(&axes.frac_reliable, &base.frac_reliable) {
            for &noise in &axis(&axes.noise, &base.noise) {
                for &failure_model in &axis(&axes.failure_model, &base.failure_model) {
                    for &policy in &axis(&axes.policy, &base.policy) {
                        for &alpha in &axis(&axes.alpha, &base.learner.alpha) {
                            for &gamma in &axis(&axes.gamma, &base.learner.gamma) {
                                for &epsilon0 in &axis(&axes.epsilon0, &base.learner.epsilon0) {
                                    for &decay_r in &axis(&axes.decay_r, &base.learner.decay_r) {
                                        configs.push(ExperimentConfig {
                                            grid_dim,
                                            frac_reliable,
                                            noise,
                                            failure_model,
                                            policy,
                                            learner: LearnerConfig {
                                                alpha,
                                                gamma,
                                                epsilon0,
                                                decay_r,
                                                ..base.learner.clone()
                                            },
                                            ..base.clone()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    configs
}

/// One sweep cell: a condition, a seed, and its outcome. Failures carry the
/// offending configuration and do not abort sibling runs.
pub type SweepCell = (ExperimentConfig, u64, Result<RunResult>);

/// Run the full axes product x seeds, parallelized over repetitions up to
/// `workers` threads. The returned order (and every result) is independent
/// of the worker count.
pub fn run_sweep(
    base: &ExperimentConfig,
    axes: &SweepAxes,
    workers: usize,
    record_training: bool,
) -> Vec<SweepCell> {
    let mut tasks: Vec<(ExperimentConfig, u64)> = Vec::new();
    for config in expand_axes(base, axes) {
        for &seed in &config.seeds {
            tasks.push((config.clone(), seed));
        }
    }
    let results = run_parallel(&tasks, workers, |(config, seed)| {
        run_repetition(config, *seed, record_training)
    });
    tasks
        .into_iter()
        .zip(results)
        .map(|((config, seed), result)| (config, seed, result))
        .collect()
}

/// Execute `work` over `tasks` on up to `workers` threads, returning
/// results in task order.
fn run_parallel<T, R, F>(tasks: &[T], workers: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(tasks.len().max(1));
    if workers == 1 {
        return tasks.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= tasks.len() {
                    break;
                }
                let result = work(&tasks[idx]);
                *slots[idx].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker completed"))
        .collect()
}

/// Cross-seed aggregation: sample mean and sample standard deviation
/// (n-1 denominator, 0 for a single seed) of the per-seed evaluation means.
pub fn aggregate(results: &[&RunResult]) -> Result<(MetricSample, MetricSample)> {
    let means: Vec<MetricSample> = results.iter().map(|r| r.eval_mean).collect();
    Ok((
        MetricSample::mean_of(&means)?,
        MetricSample::std_of(&means)?,
    ))
}

/// Derive `count` seeds from one master seed via SplitMix64; seed i is the
/// i-th output of the stream.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut state = master;
    (0..count)
        .map(|_| {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        })
        .collect()
}
