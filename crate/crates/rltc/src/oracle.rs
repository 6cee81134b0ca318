//! Exact expected-metric computation for small instances by evolving the
//! full probability distribution over joint value configurations under a
//! deterministic trust schedule. This is the ground truth the Monte Carlo
//! engine is validated against; it is for tests and spot checks, not
//! experiments.

use crate::engine::{FailureModel, Roster};
use crate::error::{Error, Result};
use crate::policy::{initial_trust, PolicyKind};
use crate::topology::Topology;

/// Largest node count the exact evolution accepts (2^N configurations,
/// quadratic work per step).
pub const MAX_EXACT_NODES: usize = 14;

/// Probability mass per joint value configuration in {0,1}^N. Bit `i - 1`
/// of a configuration index is node `i`'s value.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    probs: Vec<f64>,
    node_count: usize,
}

impl ValueDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal probability that node `i` holds value 1.
    pub fn marginal_one(&self, i: usize) -> f64 {
        let bit = 1usize << (i - 1);
        self.probs
            .iter()
            .enumerate()
            .filter(|(config, _)| config & bit != 0)
            .map(|(_, &m)| m)
            .sum()
    }

    /// Expected fraction of reliable nodes holding value 1.
    pub fn expected_success_rate(&self, roster: &Roster) -> Result<f64> {
        if roster.reliable_count() == 0 {
            return Err(Error::EmptyReliableSet);
        }
        let sum: f64 = roster.reliable_nodes().map(|i| self.marginal_one(i)).sum();
        Ok(sum / roster.reliable_count() as f64)
    }
}

/// Deterministic trust bits per timestep: `at(t)[i - 1]` is node `i`'s
/// trust mask in effect during the receive phase of timestep `t` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct TrustSchedule {
    steps: Vec<Vec<u32>>,
}

impl TrustSchedule {
    /// The same trust masks at every timestep.
    pub fn constant(masks: Vec<u32>, horizon: usize) -> TrustSchedule {
        TrustSchedule {
            steps: vec![masks; horizon],
        }
    }

    /// Explicit per-timestep masks.
    pub fn from_steps(steps: Vec<Vec<u32>>) -> TrustSchedule {
        TrustSchedule { steps }
    }

    /// The constant schedule a fixed baseline policy induces.
    pub fn for_policy(
        kind: PolicyKind,
        topology: &Topology,
        roster: &Roster,
        horizon: usize,
    ) -> TrustSchedule {
        TrustSchedule::constant(initial_trust(kind, topology, roster), horizon)
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn at(&self, t: usize) -> Result<&[u32]> {
        self.steps
            .get(t - 1)
            .map(Vec::as_slice)
            .ok_or(Error::ScheduleTooShort {
                have: self.steps.len(),
                need: t,
            })
    }
}

fn check_size(topology: &Topology) -> Result<()> {
    if topology.node_count() > MAX_EXACT_NODES {
        return Err(Error::DistributionTooLarge {
            nodes: topology.node_count(),
            limit: MAX_EXACT_NODES,
        });
    }
    Ok(())
}

/// Product distribution of the episode initialization: reliable nodes hold
/// 1 with probability `p`, AlwaysZero nodes with probability 0, RandomFlip
/// nodes with probability 0.5.
pub fn initial_distribution(
    topology: &Topology,
    roster: &Roster,
    p: f64,
    failure: FailureModel,
) -> Result<ValueDistribution> {
    check_size(topology)?;
    let n = topology.node_count();
    let mut probs = vec![0.0; 1 << n];
    probs[0] = 1.0;
    for i in 1..=n {
        let p_one = if roster.is_reliable(i) {
            p
        } else {
            match failure {
                FailureModel::AlwaysZero => 0.0,
                FailureModel::RandomFlip => 0.5,
            }
        };
        let half = 1usize << (i - 1);
        for config in 0..half {
            let mass = probs[config];
            probs[config] = mass * (1.0 - p_one);
            probs[config | half] = mass * p_one;
        }
    }
    Ok(ValueDistribution {
        probs,
        node_count: n,
    })
}

/// One exact protocol step: every reliable node independently resamples
/// from its multiset (own value plus trusted neighbors' values), unreliable
/// nodes follow the failure model. Agents' draws are conditionally
/// independent given the source configuration, so the kernel factorizes
/// per node and is expanded source by source.
pub fn step_distribution(
    dist: &ValueDistribution,
    topology: &Topology,
    roster: &Roster,
    failure: FailureModel,
    trust_masks: &[u32],
) -> ValueDistribution {
    let n = dist.node_count;
    let size = 1usize << n;
    let mut next = vec![0.0; size];
    let mut scratch = vec![0.0; size];
    let mut one_probs = vec![0.0; n];

    for (config, &mass) in dist.probs.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (idx, slot) in one_probs.iter_mut().enumerate() {
            let i = idx + 1;
            *slot = if roster.is_reliable(i) {
                let mut ones = (config >> idx) & 1;
                let mut total = 1usize;
                for (k, &j) in topology.neighbors(i).iter().enumerate() {
                    if (trust_masks[idx] >> k) & 1 == 1 {
                        ones += (config >> (j - 1)) & 1;
                        total += 1;
                    }
                }
                ones as f64 / total as f64
            } else {
                match failure {
                    FailureModel::AlwaysZero => 0.0,
                    FailureModel::RandomFlip => 0.5,
                }
            };
        }
        // expand the product measure over target configurations
        scratch[0] = mass;
        for (i, &p_one) in one_probs.iter().enumerate() {
            let half = 1usize << i;
            for target in 0..half {
                let m = scratch[target];
                scratch[target] = m * (1.0 - p_one);
                scratch[target | half] = m * p_one;
            }
        }
        for (target, &m) in scratch.iter().enumerate() {
            next[target] += m;
        }
    }

    ValueDistribution {
        probs: next,
        node_count: n,
    }
}

/// Exact `E[success_rate]` at each timestep 1..=T under the given schedule.
pub fn expected_success_curve(
    topology: &Topology,
    roster: &Roster,
    p: f64,
    failure: FailureModel,
    schedule: &TrustSchedule,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_size(topology)?;
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    let mut dist = initial_distribution(topology, roster, p, failure)?;
    let mut curve = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        dist = step_distribution(&dist, topology, roster, failure, schedule.at(t)?);
        curve.push(dist.expected_success_rate(roster)?);
    }
    Ok(curve)
}
