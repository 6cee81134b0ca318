//! Episode execution for the trusted-consensus protocol: value
//! initialization, trust-filtered receive, simultaneous voter-style value
//! updates, trust toggles, rewards, and the optional per-step Q-update.
//!
//! Everything here is deterministic given the caller's RNG. Per timestep,
//! draws happen in ascending agent ID order within each phase, with the
//! phases in protocol order. That draw ordering is part of the crate's
//! reproducibility contract.

use rand::Rng;

use crate::error::{Error, Result};
use crate::learning::{q_update, TrainingState};
use crate::metrics::{episode_mean, EpisodeMetrics, MetricSample};
use crate::policy::{initial_trust, PolicyKind, PolicySet};
use crate::topology::{NodeId, Topology};

/// Which nodes are protocol-following agents vs failure-model automata.
///
/// Unreliable placement is drawn once per repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    reliable: Vec<bool>,
    reliable_count: usize,
}

impl Roster {
    /// Flag `round_half_up(f * N)` nodes reliable, choosing the unreliable
    /// placement uniformly without replacement from `rng`.
    pub fn assign<R: Rng>(topology: &Topology, f: f64, rng: &mut R) -> Roster {
        let n = topology.node_count();
        let reliable_count = round_half_up(f * n as f64).min(n);
        let unreliable_count = n - reliable_count;
        // partial Fisher-Yates over node IDs; the first `unreliable_count`
        // entries become the unreliable set
        let mut ids: Vec<NodeId> = (1..=n).collect();
        for k in 0..unreliable_count {
            let pick = k + rng.gen_range(0..n - k);
            ids.swap(k, pick);
        }
        let mut reliable = vec![true; n];
        for &i in &ids[..unreliable_count] {
            reliable[i - 1] = false;
        }
        Roster {
            reliable,
            reliable_count,
        }
    }

    /// Explicit flags, mainly for tests and oracle fixtures.
    pub fn from_reliable_flags(reliable: Vec<bool>) -> Result<Roster> {
        if reliable.is_empty() {
            return Err(Error::EmptyReliableSet);
        }
        let reliable_count = reliable.iter().filter(|&&r| r).count();
        Ok(Roster {
            reliable,
            reliable_count,
        })
    }

    pub fn all_reliable(node_count: usize) -> Roster {
        Roster {
            reliable: vec![true; node_count],
            reliable_count: node_count,
        }
    }

    pub fn is_reliable(&self, i: NodeId) -> bool {
        self.reliable[i - 1]
    }

    pub fn reliable_count(&self) -> usize {
        self.reliable_count
    }

    pub fn node_count(&self) -> usize {
        self.reliable.len()
    }

    /// Reliable node IDs, ascending.
    pub fn reliable_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.reliable
            .iter()
            .enumerate()
            .filter_map(|(k, &r)| r.then_some(k + 1))
    }
}

/// `floor(x + 0.5)` as a count.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Fixed behavior of unreliable nodes. They never read their buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureModel {
    /// Value is 0 at initialization and after every update phase.
    AlwaysZero,
    /// Value is an independent fair coin at initialization and at every
    /// update phase.
    RandomFlip,
}

impl std::str::FromStr for FailureModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "always-zero" => Ok(FailureModel::AlwaysZero),
            "random-flip" => Ok(FailureModel::RandomFlip),
            other => Err(format!(
                "unknown failure model `{other}` (expected `always-zero` or `random-flip`)"
            )),
        }
    }
}

impl std::fmt::Display for FailureModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureModel::AlwaysZero => write!(f, "always-zero"),
            FailureModel::RandomFlip => write!(f, "random-flip"),
        }
    }
}

/// Joint simulation state of one episode.
///
/// Trust masks are meaningful only for reliable nodes; bit k of node `i`'s
/// mask is its trust toward the k-th neighbor in ascending ID order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    values: Vec<u8>,
    trusts: Vec<u32>,
    timestep: usize,
}

impl SimState {
    /// State with the given values and every trust bit set.
    pub fn with_full_trust(topology: &Topology, values: Vec<u8>) -> SimState {
        let trusts = topology
            .nodes()
            .map(|i| full_mask(topology.degree(i)))
            .collect();
        SimState {
            values,
            trusts,
            timestep: 0,
        }
    }

    pub fn value(&self, i: NodeId) -> u8 {
        self.values[i - 1]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn trust_mask(&self, i: NodeId) -> u32 {
        self.trusts[i - 1]
    }

    /// Trust bit of node `i` toward its k-th neighbor.
    pub fn trust_bit(&self, i: NodeId, k: usize) -> bool {
        (self.trusts[i - 1] >> k) & 1 == 1
    }

    /// Whether `i` trusts its neighbor `j`. False if not adjacent.
    pub fn trusts(&self, topology: &Topology, i: NodeId, j: NodeId) -> bool {
        topology
            .neighbor_position(i, j)
            .is_some_and(|k| self.trust_bit(i, k))
    }

    /// Replace all trust masks (indexed by node ID - 1).
    pub fn set_trust_masks(&mut self, masks: Vec<u32>) {
        debug_assert_eq!(masks.len(), self.trusts.len());
        self.trusts = masks;
    }
}

fn full_mask(degree: usize) -> u32 {
    (1u32 << degree) - 1
}

/// A reliable agent's trust action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    NoOp,
    /// Toggle the trust bit toward this neighbor.
    Toggle(NodeId),
}

impl Action {
    /// Canonical index: 0 is no-op, k >= 1 toggles the (k-1)-th neighbor in
    /// ascending ID order.
    pub fn from_index(topology: &Topology, agent: NodeId, index: usize) -> Result<Action> {
        let actions = topology.degree(agent) + 1;
        match index {
            0 => Ok(Action::NoOp),
            k if k < actions => Ok(Action::Toggle(topology.neighbors(agent)[k - 1])),
            _ => Err(Error::ActionIndexOutOfRange { index, actions }),
        }
    }

    pub fn to_index(self, topology: &Topology, agent: NodeId) -> Result<usize> {
        match self {
            Action::NoOp => Ok(0),
            Action::Toggle(j) => topology
                .neighbor_position(agent, j)
                .map(|k| k + 1)
                .ok_or(Error::InvalidAction { agent, target: j }),
        }
    }
}

/// One agent's trust-state transition within a timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrustTransition {
    pub agent: NodeId,
    pub state_before: u32,
    pub action: Action,
    pub action_index: usize,
    pub state_after: u32,
}

/// Everything produced by one protocol timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Reward per reliable agent, ascending agent ID.
    pub rewards: Vec<(NodeId, i8)>,
    /// Trust transition per reliable agent, same order as `rewards`.
    pub transitions: Vec<TrustTransition>,
    /// Metrics recorded after both the value and trust updates.
    pub sample: MetricSample,
}

/// Episode-level parameters: horizon `T` and the probability `p` that a
/// reliable agent's initial value is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub p: f64,
}

/// Fresh episode state: reliable values are 1 with probability `p` each,
/// unreliable values follow the failure model, every trust bit is 1.
/// Unreliable nodes carry no trust state (mask 0).
pub fn init_episode<R: Rng>(
    topology: &Topology,
    roster: &Roster,
    p: f64,
    failure: FailureModel,
    rng: &mut R,
) -> SimState {
    let values = topology
        .nodes()
        .map(|i| {
            if roster.is_reliable(i) {
                u8::from(rng.gen::<f64>() < p)
            } else {
                failure_value(failure, rng)
            }
        })
        .collect();
    let mut state = SimState::with_full_trust(topology, values);
    for i in topology.nodes() {
        if !roster.is_reliable(i) {
            state.trusts[i - 1] = 0;
        }
    }
    state
}

fn failure_value<R: Rng>(failure: FailureModel, rng: &mut R) -> u8 {
    match failure {
        FailureModel::AlwaysZero => 0,
        FailureModel::RandomFlip => u8::from(rng.gen::<f64>() < 0.5),
    }
}

/// Receive phase: each reliable agent's buffer holds the pre-phase values
/// of its trusted neighbors (ascending neighbor order). Unreliable nodes
/// get an empty buffer.
pub fn receive_phase(state: &SimState, topology: &Topology, roster: &Roster) -> Vec<Vec<u8>> {
    topology
        .nodes()
        .map(|i| {
            if !roster.is_reliable(i) {
                return Vec::new();
            }
            topology
                .neighbors(i)
                .iter()
                .enumerate()
                .filter(|&(k, _)| state.trust_bit(i, k))
                .map(|(_, &j)| state.value(j))
                .collect()
        })
        .collect()
}

/// Value update phase, simultaneous against the pre-phase snapshot: each
/// reliable agent draws uniformly from the multiset of its own value plus
/// its buffer; each unreliable node follows the failure model.
pub fn value_update_phase<R: Rng>(
    state: &mut SimState,
    buffers: &[Vec<u8>],
    roster: &Roster,
    failure: FailureModel,
    rng: &mut R,
) {
    let next: Vec<u8> = (1..=state.values.len())
        .map(|i| {
            if roster.is_reliable(i) {
                let buffer = &buffers[i - 1];
                let pick = rng.gen_range(0..buffer.len() + 1);
                if pick == 0 {
                    state.value(i)
                } else {
                    buffer[pick - 1]
                }
            } else {
                failure_value(failure, rng)
            }
        })
        .collect();
    state.values = next;
}

/// Reward for reliable agent `i`: +1 iff `i` and every graph neighbor
/// (trusted or not, reliable or not) hold value 1, else -1.
pub fn compute_reward(
    state: &SimState,
    topology: &Topology,
    roster: &Roster,
    agent: NodeId,
) -> Result<i8> {
    if !roster.is_reliable(agent) {
        return Err(Error::UnreliableAgent(agent));
    }
    let agreed = state.value(agent) == 1
        && topology
            .neighbors(agent)
            .iter()
            .all(|&j| state.value(j) == 1);
    Ok(if agreed { 1 } else { -1 })
}

/// Trust update phase: apply each agent's toggle (or no-op). At most one
/// bit flips per agent.
pub fn trust_update_phase(
    state: &mut SimState,
    topology: &Topology,
    actions: &[(NodeId, Action)],
) -> Result<()> {
    for &(agent, action) in actions {
        match action {
            Action::NoOp => {}
            Action::Toggle(j) => {
                let k = topology
                    .neighbor_position(agent, j)
                    .ok_or(Error::InvalidAction { agent, target: j })?;
                state.trusts[agent - 1] ^= 1 << k;
            }
        }
    }
    Ok(())
}

/// One protocol timestep: receive, value update, rewards, action selection,
/// trust update, optional Q-update, metric sample.
pub fn run_timestep<R: Rng>(
    state: &mut SimState,
    topology: &Topology,
    roster: &Roster,
    failure: FailureModel,
    policy: &mut PolicySet,
    training: Option<&mut TrainingState>,
    rng: &mut R,
) -> Result<StepOutcome> {
    let buffers = receive_phase(state, topology, roster);
    value_update_phase(state, &buffers, roster, failure, rng);

    let rewards: Vec<(NodeId, i8)> = roster
        .reliable_nodes()
        .map(|i| compute_reward(state, topology, roster, i).map(|r| (i, r)))
        .collect::<Result<_>>()?;

    let epsilon = training.as_ref().map_or(0.0, |t| t.epsilon());
    let mut picks = Vec::with_capacity(rewards.len());
    for i in roster.reliable_nodes() {
        let s = state.trust_mask(i);
        let action = policy.act(topology, i, s, epsilon, rng)?;
        picks.push((i, s, action));
    }

    let actions: Vec<(NodeId, Action)> = picks.iter().map(|&(i, _, a)| (i, a)).collect();
    trust_update_phase(state, topology, &actions)?;

    let transitions: Vec<TrustTransition> = picks
        .iter()
        .map(|&(agent, state_before, action)| {
            Ok(TrustTransition {
                agent,
                state_before,
                action,
                action_index: action.to_index(topology, agent)?,
                state_after: state.trust_mask(agent),
            })
        })
        .collect::<Result<_>>()?;

    if let Some(trainer) = training {
        if policy.kind() == PolicyKind::Rltc {
            for (transition, &(_, reward)) in transitions.iter().zip(&rewards) {
                let table = policy.qtables_mut().unwrap().table_mut(transition.agent)?;
                q_update(
                    table,
                    transition.state_before,
                    transition.action_index,
                    reward as f64,
                    transition.state_after,
                    &trainer.learner,
                )?;
            }
        }
        trainer.steps += 1;
    }

    let avg_reward =
        rewards.iter().map(|&(_, r)| r as f64).sum::<f64>() / rewards.len().max(1) as f64;
    let sample = MetricSample::from_state(state, topology, roster, avg_reward)?;
    state.timestep += 1;

    Ok(StepOutcome {
        rewards,
        transitions,
        sample,
    })
}

/// Execute one full episode of `cfg.horizon` timesteps and return the
/// per-timestep metrics plus their mean, along with the final state.
///
/// When `training` is supplied the policy's Q-tables are updated each step
/// and the episode counter advances at the end.
pub fn run_episode<R: Rng>(
    topology: &Topology,
    roster: &Roster,
    failure: FailureModel,
    policy: &mut PolicySet,
    mut training: Option<&mut TrainingState>,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<(EpisodeMetrics, SimState)> {
    if roster.reliable_count() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    let mut state = init_episode(topology, roster, cfg.p, failure, rng);
    state.set_trust_masks(initial_trust(policy.kind(), topology, roster));

    let mut samples = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let outcome = run_timestep(
            &mut state,
            topology,
            roster,
            failure,
            policy,
            training.as_deref_mut(),
            rng,
        )?;
        samples.push(outcome.sample);
    }
    if let Some(trainer) = training {
        trainer.episodes += 1;
    }
    let mean = episode_mean(&samples)?;
    Ok((EpisodeMetrics { samples, mean }, state))
}
