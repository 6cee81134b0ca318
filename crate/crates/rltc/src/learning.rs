//! Independent tabular Q-learning: per-agent Q-tables over trust states,
//! the one-step update rule, epsilon-greedy selection and multiplicative
//! epsilon decay.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::engine::Roster;
use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Decay step counter used by [`epsilon_at`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayGranularity {
    /// Cumulative environment timesteps across all training episodes.
    GlobalTimestep,
    /// Training episode index.
    Episode,
}

impl std::str::FromStr for DecayGranularity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "global-timestep" => Ok(DecayGranularity::GlobalTimestep),
            "episode" => Ok(DecayGranularity::Episode),
            other => Err(format!(
                "unknown decay granularity `{other}` (expected `global-timestep` or `episode`)"
            )),
        }
    }
}

impl std::fmt::Display for DecayGranularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecayGranularity::GlobalTimestep => write!(f, "global-timestep"),
            DecayGranularity::Episode => write!(f, "episode"),
        }
    }
}

/// Q-learning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Step size (alpha).
    pub alpha: f64,
    /// Discount factor (gamma), in [0, 1).
    pub gamma: f64,
    /// Initial exploration probability.
    pub epsilon0: f64,
    /// Per-step multiplicative decay factor, in (0, 1].
    pub decay_r: f64,
    pub decay_granularity: DecayGranularity,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.03,
            gamma: 0.999,
            epsilon0: 0.3,
            decay_r: 0.9996,
            decay_granularity: DecayGranularity::GlobalTimestep,
        }
    }
}

/// Exploration probability after `step` decay steps: `epsilon0 * r^step`.
pub fn epsilon_at(step: u64, cfg: &LearnerConfig) -> f64 {
    let exp = step.min(i32::MAX as u64) as i32;
    cfg.epsilon0 * cfg.decay_r.powi(exp)
}

/// Mutable training-phase state: the hyperparameters plus the decay counters.
#[derive(Debug, Clone)]
pub struct TrainingState {
    pub learner: LearnerConfig,
    /// Environment timesteps executed so far, across episodes.
    pub steps: u64,
    /// Training episodes completed so far.
    pub episodes: u64,
}

impl TrainingState {
    pub fn new(learner: LearnerConfig) -> Self {
        TrainingState {
            learner,
            steps: 0,
            episodes: 0,
        }
    }

    /// Exploration probability for the current timestep.
    pub fn epsilon(&self) -> f64 {
        let step = match self.learner.decay_granularity {
            DecayGranularity::GlobalTimestep => self.steps,
            DecayGranularity::Episode => self.episodes,
        };
        epsilon_at(step, &self.learner)
    }
}

/// One agent's action-value table.
///
/// Rows are trust-state bitmasks (bit k = trust toward the k-th neighbor in
/// ascending ID order), columns are actions in canonical order: no-op first,
/// then toggles of neighbors ascending. All entries start at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    degree: usize,
    values: Vec<Vec<f64>>,
}

impl QTable {
    pub fn new(degree: usize) -> Self {
        QTable {
            degree,
            values: vec![vec![0.0; degree + 1]; 1 << degree],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn action_count(&self) -> usize {
        self.degree + 1
    }

    pub fn state_count(&self) -> usize {
        1 << self.degree
    }

    fn check_state(&self, state: u32) -> Result<()> {
        if (state as usize) < self.state_count() {
            Ok(())
        } else {
            Err(Error::TrustStateOutOfRange {
                state,
                degree: self.degree,
            })
        }
    }

    pub fn value(&self, state: u32, action: usize) -> Result<f64> {
        self.check_state(state)?;
        if action >= self.action_count() {
            return Err(Error::ActionIndexOutOfRange {
                index: action,
                actions: self.action_count(),
            });
        }
        Ok(self.values[state as usize][action])
    }

    pub fn max_value(&self, state: u32) -> Result<f64> {
        self.check_state(state)?;
        Ok(self.values[state as usize]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy argmax with the canonical tie-break: the lowest action index
    /// wins, so no-op beats any toggle and lower neighbor IDs beat higher.
    pub fn greedy_action(&self, state: u32) -> Result<usize> {
        self.check_state(state)?;
        let row = &self.values[state as usize];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        Ok(best)
    }

    fn row_mut(&mut self, state: u32) -> &mut Vec<f64> {
        &mut self.values[state as usize]
    }
}

/// One-step update: `Q(s,a) += alpha * (reward + gamma * max_a' Q(s',a') - Q(s,a))`.
/// Touches exactly one cell.
pub fn q_update(
    table: &mut QTable,
    state: u32,
    action: usize,
    reward: f64,
    next_state: u32,
    cfg: &LearnerConfig,
) -> Result<()> {
    if action >= table.action_count() {
        return Err(Error::ActionIndexOutOfRange {
            index: action,
            actions: table.action_count(),
        });
    }
    let max_next = table.max_value(next_state)?;
    table.check_state(state)?;
    let cell = &mut table.row_mut(state)[action];
    *cell += cfg.alpha * (reward + cfg.gamma * max_next - *cell);
    Ok(())
}

/// Epsilon-greedy selection over the canonical action indices.
pub fn select_action<R: Rng>(
    table: &QTable,
    state: u32,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..table.action_count()))
    } else {
        table.greedy_action(state)
    }
}

/// Q-tables for every reliable agent of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct QTableSet {
    tables: BTreeMap<NodeId, QTable>,
}

impl QTableSet {
    /// Fresh all-zero tables for the reliable agents of `roster`.
    pub fn new(topology: &Topology, roster: &Roster) -> Self {
        let tables = roster
            .reliable_nodes()
            .map(|i| (i, QTable::new(topology.degree(i))))
            .collect();
        QTableSet { tables }
    }

    pub fn table(&self, agent: NodeId) -> Result<&QTable> {
        self.tables.get(&agent).ok_or(Error::MissingQTable(agent))
    }

    pub fn table_mut(&mut self, agent: NodeId) -> Result<&mut QTable> {
        self.tables
            .get_mut(&agent)
            .ok_or(Error::MissingQTable(agent))
    }

    pub fn agents(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.tables.keys().copied()
    }

    /// Plain-text snapshot: one line per (agent, trust state) holding the
    /// action values in canonical order, 17 significant digits so reloading
    /// is value-exact.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# agent state q_values[noop, neighbors ascending]")?;
        for (&agent, table) in &self.tables {
            for state in 0..table.state_count() {
                write!(w, "{agent} {state}")?;
                for action in 0..table.action_count() {
                    write!(w, " {:.16e}", table.values[state][action])?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<QTableSet> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut rows: BTreeMap<NodeId, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = line_no + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| Error::MalformedSnapshot {
                line: line_no,
                reason: reason.to_string(),
            };
            let mut fields = line.split_whitespace();
            let agent: NodeId = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| malformed("missing or invalid agent id"))?;
            let state: u32 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| malformed("missing or invalid state bitmask"))?;
            let values: Vec<f64> = fields
                .map(|f| f.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| malformed("invalid action value"))?;
            if values.is_empty() {
                return Err(malformed("no action values"));
            }
            if rows
                .entry(agent)
                .or_default()
                .insert(state, values)
                .is_some()
            {
                return Err(malformed("duplicate (agent, state) record"));
            }
        }
        let mut tables = BTreeMap::new();
        for (agent, states) in rows {
            let actions = states.values().next().map(|v| v.len()).unwrap_or(0);
            let degree = actions - 1;
            let expected_states = 1usize << degree;
            if states.len() != expected_states
                || states.keys().last() != Some(&(expected_states as u32 - 1))
                || states.values().any(|v| v.len() != actions)
            {
                return Err(Error::MalformedSnapshot {
                    line: 0,
                    reason: format!("agent {agent}: inconsistent state/action dimensions"),
                });
            }
            let mut table = QTable::new(degree);
            for (state, values) in states {
                table.values[state as usize] = values;
            }
            tables.insert(agent, table);
        }
        Ok(QTableSet { tables })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> LearnerConfig {
        LearnerConfig::default()
    }

    #[test]
    fn update_from_zero_table() {
        let mut t = QTable::new(2);
        q_update(&mut t, 0b11, 1, -1.0, 0b01, &cfg()).unwrap();
        assert!((t.value(0b11, 1).unwrap() - (-0.03)).abs() < 1e-12);
        // only that cell changed
        assert_eq!(t.value(0b11, 0).unwrap(), 0.0);
        assert_eq!(t.value(0b01, 1).unwrap(), 0.0);
    }

    #[test]
    fn update_with_zero_alpha_is_identity() {
        let mut t = QTable::new(3);
        let zero_alpha = LearnerConfig {
            alpha: 0.0,
            ..cfg()
        };
        q_update(&mut t, 5, 2, 1.0, 3, &zero_alpha).unwrap();
        assert_eq!(t, QTable::new(3));
    }

    #[test]
    fn update_with_bootstrap() {
        let mut t = QTable::new(1);
        t.row_mut(0)[0] = 1.0;
        t.row_mut(1)[0] = 1.0;
        t.row_mut(1)[1] = 0.5;
        q_update(&mut t, 0, 0, 1.0, 1, &cfg()).unwrap();
        assert!((t.value(0, 0).unwrap() - 1.02997).abs() < 1e-12);
    }

    #[test]
    fn update_rejects_out_of_range() {
        let mut t = QTable::new(2);
        assert!(matches!(
            q_update(&mut t, 0, 3, 1.0, 0, &cfg()),
            Err(Error::ActionIndexOutOfRange { .. })
        ));
        assert!(matches!(
            q_update(&mut t, 4, 0, 1.0, 0, &cfg()),
            Err(Error::TrustStateOutOfRange { .. })
        ));
    }

    #[test]
    fn epsilon_decay_values() {
        assert_eq!(epsilon_at(0, &cfg()), 0.3);
        let no_decay = LearnerConfig {
            decay_r: 1.0,
            ..cfg()
        };
        assert_eq!(epsilon_at(0, &no_decay), 0.3);
        assert_eq!(epsilon_at(10_000, &no_decay), 0.3);
        // half-life of r = 0.9996 is ~1733 steps
        assert!((epsilon_at(1733, &cfg()) - 0.15).abs() < 5e-4);
    }

    #[test]
    fn greedy_prefers_noop_on_ties() {
        let t = QTable::new(2);
        assert_eq!(t.greedy_action(0b00).unwrap(), 0);
    }

    #[test]
    fn greedy_argmax() {
        let mut t = QTable::new(4);
        t.row_mut(0b1111)[1] = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&t, 0b1111, 0.0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn pure_exploration_is_roughly_uniform() {
        let t = QTable::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let draws = 40_000;
        for _ in 0..draws {
            counts[select_action(&t, 0, 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn snapshot_roundtrip_preserves_greedy_actions() {
        let topology = Topology::grid(3).unwrap();
        let roster = Roster::from_reliable_flags(vec![true; 9]).unwrap();
        let mut set = QTableSet::new(&topology, &roster);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for agent in 1..=9 {
            let table = set.table_mut(agent).unwrap();
            for state in 0..table.state_count() {
                for action in 0..table.action_count() {
                    table.row_mut(state as u32)[action] = rng.gen_range(-3.0..3.0);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qtables.txt");
        set.save(&path).unwrap();
        let loaded = QTableSet::load(&path).unwrap();
        assert_eq!(set, loaded);
        for agent in 1..=9 {
            let a = set.table(agent).unwrap();
            let b = loaded.table(agent).unwrap();
            for state in 0..a.state_count() {
                assert_eq!(
                    a.greedy_action(state as u32).unwrap(),
                    b.greedy_action(state as u32).unwrap()
                );
            }
        }
    }

    proptest! {
        #[test]
        fn update_contracts_toward_target(
            q0 in -5.0f64..5.0,
            max_next in -5.0f64..5.0,
            reward in prop::sample::select(vec![-1.0f64, 1.0]),
            alpha in 0.001f64..1.0,
        ) {
            let learner = LearnerConfig { alpha, ..cfg() };
            let mut t = QTable::new(1);
            t.row_mut(0)[0] = q0;
            t.row_mut(1)[0] = max_next;
            t.row_mut(1)[1] = max_next - 1.0;
            let target = reward + learner.gamma * max_next;
            q_update(&mut t, 0, 0, reward, 1, &learner).unwrap();
            let q1 = t.value(0, 0).unwrap();
            prop_assert!(((q1 - target).abs() - (1.0 - alpha) * (q0 - target).abs()).abs() < 1e-9);
        }

        #[test]
        fn values_stay_bounded(seed in 0u64..500) {
            let learner = cfg();
            let bound = 1.0 / (1.0 - learner.gamma);
            let mut t = QTable::new(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..3000 {
                let s = rng.gen_range(0..4u32);
                let a = rng.gen_range(0..3usize);
                let r = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let s2 = rng.gen_range(0..4u32);
                q_update(&mut t, s, a, r, s2, &learner).unwrap();
            }
            for s in 0..4u32 {
                for a in 0..3 {
                    prop_assert!(t.value(s, a).unwrap().abs() <= bound);
                }
            }
        }

        #[test]
        fn greedy_selection_is_deterministic(seed in 0u64..100) {
            let mut t = QTable::new(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for state in 0..t.state_count() {
                for action in 0..t.action_count() {
                    t.row_mut(state as u32)[action] = rng.gen_range(-1.0..1.0);
                }
            }
            for state in 0..t.state_count() as u32 {
                let first = select_action(&t, state, 0.0, &mut rng).unwrap();
                for _ in 0..5 {
                    prop_assert_eq!(select_action(&t, state, 0.0, &mut rng).unwrap(), first);
                }
            }
        }

        #[test]
        fn epsilon_is_monotone_non_increasing(
            epsilon0 in 0.0f64..=1.0,
            decay_r in 0.1f64..=1.0,
            step in 0u64..100_000,
            gap in 1u64..10_000,
        ) {
            let learner = LearnerConfig { epsilon0, decay_r, ..cfg() };
            let before = epsilon_at(step, &learner);
            let after = epsilon_at(step + gap, &learner);
            prop_assert!(after <= before);
            prop_assert!((0.0..=1.0).contains(&before));
        }
    }
}
