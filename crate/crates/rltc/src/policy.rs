//! The three agent behaviors behind one interface: learned trust (RLTC)
//! and the two fixed baselines. Baselines are plain no-op policies with a
//! trust initialization override, so a single episode loop serves all
//! conditions.

use rand::Rng;

use crate::engine::{Action, Roster};
use crate::error::{Error, Result};
use crate::learning::{select_action, QTableSet};
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Trust learned by independent Q-learning; starts from full trust.
    Rltc,
    /// Every trust bit stays 1 forever.
    TrustAll,
    /// Each reliable agent trusts exactly its reliable neighbors, forever.
    Oracle,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rltc" => Ok(PolicyKind::Rltc),
            "trust-all" => Ok(PolicyKind::TrustAll),
            "oracle" => Ok(PolicyKind::Oracle),
            other => Err(format!(
                "unknown policy `{other}` (expected `rltc`, `trust-all` or `oracle`)"
            )),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Rltc => write!(f, "rltc"),
            PolicyKind::TrustAll => write!(f, "trust-all"),
            PolicyKind::Oracle => write!(f, "oracle"),
        }
    }
}

/// Initial trust mask per node (indexed by node ID - 1; unreliable nodes
/// get 0 since they carry no trust state).
///
/// TrustAll and RLTC start from full trust; Oracle sets each bit to the
/// neighbor's reliability flag.
pub fn initial_trust(kind: PolicyKind, topology: &Topology, roster: &Roster) -> Vec<u32> {
    topology
        .nodes()
        .map(|i| {
            if !roster.is_reliable(i) {
                return 0;
            }
            match kind {
                PolicyKind::Rltc | PolicyKind::TrustAll => (1u32 << topology.degree(i)) - 1,
                PolicyKind::Oracle => topology
                    .neighbors(i)
                    .iter()
                    .enumerate()
                    .fold(0u32, |mask, (k, &j)| {
                        mask | (u32::from(roster.is_reliable(j)) << k)
                    }),
            }
        })
        .collect()
}

/// A policy kind plus, for RLTC, the per-agent Q-tables it selects from.
#[derive(Debug, Clone)]
pub struct PolicySet {
    kind: PolicyKind,
    tables: Option<QTableSet>,
}

impl PolicySet {
    /// Fresh policy; RLTC gets all-zero Q-tables for the reliable agents.
    pub fn new(kind: PolicyKind, topology: &Topology, roster: &Roster) -> PolicySet {
        let tables = match kind {
            PolicyKind::Rltc => Some(QTableSet::new(topology, roster)),
            PolicyKind::TrustAll | PolicyKind::Oracle => None,
        };
        PolicySet { kind, tables }
    }

    /// RLTC policy backed by existing tables (e.g. loaded from a snapshot).
    pub fn with_tables(tables: QTableSet) -> PolicySet {
        PolicySet {
            kind: PolicyKind::Rltc,
            tables: Some(tables),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn qtables(&self) -> Option<&QTableSet> {
        self.tables.as_ref()
    }

    pub fn qtables_mut(&mut self) -> Option<&mut QTableSet> {
        self.tables.as_mut()
    }

    /// Select agent `i`'s action in trust state `s`. Baselines return the
    /// no-op unconditionally and consume no randomness.
    pub fn act<R: Rng>(
        &self,
        topology: &Topology,
        agent: NodeId,
        state: u32,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Action> {
        match self.kind {
            PolicyKind::TrustAll | PolicyKind::Oracle => Ok(Action::NoOp),
            PolicyKind::Rltc => {
                let tables = self.tables.as_ref().ok_or(Error::MissingQTable(agent))?;
                let index = select_action(tables.table(agent)?, state, epsilon, rng)?;
                Action::from_index(topology, agent, index)
            }
        }
    }
}
