//! Per-timestep performance metrics, computed over reliable agents only,
//! plus episode-level aggregation.

use crate::engine::{Roster, SimState};
use crate::error::{Error, Result};
use crate::topology::Topology;

/// One timestep's worth of metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    /// Fraction of reliable agents holding the correct value 1.
    pub success_rate: f64,
    /// Mean over reliable agents of the fraction of neighbors they trust.
    pub avg_trust_rate: f64,
    /// Fraction of reliable-reliable edges trusted in both directions.
    pub mutual_trust_rate: f64,
    /// Mean over reliable agents of the fraction of trust scores matching
    /// the neighbors' true reliability.
    pub avg_trust_accuracy: f64,
    /// Mean reward over reliable agents, in [-1, 1].
    pub avg_reward: f64,
}

impl MetricSample {
    /// Assemble a sample from the post-update state. The reward average is
    /// supplied by the engine since it is not a function of the state alone.
    pub fn from_state(
        state: &SimState,
        topology: &Topology,
        roster: &Roster,
        avg_reward: f64,
    ) -> Result<MetricSample> {
        Ok(MetricSample {
            success_rate: success_rate(state, roster)?,
            avg_trust_rate: avg_trust_rate(state, topology, roster)?,
            mutual_trust_rate: mutual_trust_rate(state, topology, roster),
            avg_trust_accuracy: avg_trust_accuracy(state, topology, roster)?,
            avg_reward,
        })
    }

    /// Component-wise arithmetic mean.
    pub fn mean_of(samples: &[MetricSample]) -> Result<MetricSample> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let n = samples.len() as f64;
        let mut acc = MetricSample {
            success_rate: 0.0,
            avg_trust_rate: 0.0,
            mutual_trust_rate: 0.0,
            avg_trust_accuracy: 0.0,
            avg_reward: 0.0,
        };
        for s in samples {
            acc.success_rate += s.success_rate;
            acc.avg_trust_rate += s.avg_trust_rate;
            acc.mutual_trust_rate += s.mutual_trust_rate;
            acc.avg_trust_accuracy += s.avg_trust_accuracy;
            acc.avg_reward += s.avg_reward;
        }
        acc.success_rate /= n;
        acc.avg_trust_rate /= n;
        acc.mutual_trust_rate /= n;
        acc.avg_trust_accuracy /= n;
        acc.avg_reward /= n;
        Ok(acc)
    }

    /// Component-wise sample standard deviation (n-1 denominator, 0 when
    /// only one sample).
    pub fn std_of(samples: &[MetricSample]) -> Result<MetricSample> {
        let mean = Self::mean_of(samples)?;
        if samples.len() == 1 {
            return Ok(MetricSample {
                success_rate: 0.0,
                avg_trust_rate: 0.0,
                mutual_trust_rate: 0.0,
                avg_trust_accuracy: 0.0,
                avg_reward: 0.0,
            });
        }
        let n1 = (samples.len() - 1) as f64;
        let var = |f: fn(&MetricSample) -> f64| {
            (samples
                .iter()
                .map(|s| (f(s) - f(&mean)).powi(2))
                .sum::<f64>()
                / n1)
                .sqrt()
        };
        Ok(MetricSample {
            success_rate: var(|s| s.success_rate),
            avg_trust_rate: var(|s| s.avg_trust_rate),
            mutual_trust_rate: var(|s| s.mutual_trust_rate),
            avg_trust_accuracy: var(|s| s.avg_trust_accuracy),
            avg_reward: var(|s| s.avg_reward),
        })
    }
}

/// Per-timestep samples of one episode and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub samples: Vec<MetricSample>,
    pub mean: MetricSample,
}

/// Unweighted mean over the per-timestep samples of an episode.
pub fn episode_mean(samples: &[MetricSample]) -> Result<MetricSample> {
    MetricSample::mean_of(samples)
}

/// Fraction of reliable agents holding value 1.
pub fn success_rate(state: &SimState, roster: &Roster) -> Result<f64> {
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    let correct = roster
        .reliable_nodes()
        .filter(|&i| state.value(i) == 1)
        .count();
    Ok(correct as f64 / roster.reliable_count() as f64)
}

/// Mean over reliable agents of the trusted fraction of their neighbors
/// (neighbors counted whether reliable or not).
pub fn avg_trust_rate(state: &SimState, topology: &Topology, roster: &Roster) -> Result<f64> {
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    let sum: f64 = roster
        .reliable_nodes()
        .map(|i| {
            let trusted = state.trust_mask(i).count_ones() as f64;
            trusted / topology.degree(i) as f64
        })
        .sum();
    Ok(sum / roster.reliable_count() as f64)
}

/// Over edges whose both endpoints are reliable, the fraction trusted in
/// both directions; 0 when no two reliable agents are adjacent.
pub fn mutual_trust_rate(state: &SimState, topology: &Topology, roster: &Roster) -> f64 {
    let mut total = 0usize;
    let mut mutual = 0usize;
    for (i, j) in topology.edge_list() {
        if roster.is_reliable(i) && roster.is_reliable(j) {
            total += 1;
            if state.trusts(topology, i, j) && state.trusts(topology, j, i) {
                mutual += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        mutual as f64 / total as f64
    }
}

/// Mean over reliable agents of the fraction of their trust scores that
/// match the neighbors' reliability flags.
pub fn avg_trust_accuracy(state: &SimState, topology: &Topology, roster: &Roster) -> Result<f64> {
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    let sum: f64 = roster
        .reliable_nodes()
        .map(|i| {
            let neighbors = topology.neighbors(i);
            let correct = neighbors
                .iter()
                .enumerate()
                .filter(|&(k, &j)| state.trust_bit(i, k) == roster.is_reliable(j))
                .count();
            correct as f64 / neighbors.len() as f64
        })
        .sum();
    Ok(sum / roster.reliable_count() as f64)
}
