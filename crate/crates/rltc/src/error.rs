use crate::topology::NodeId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid dimension must be at least 2, got {0}")]
    GridTooSmall(usize),

    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    EdgeOutOfRange(NodeId, NodeId, usize),

    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),

    #[error("graph is not connected")]
    Disconnected,

    #[error("agent {0} is not reliable")]
    UnreliableAgent(NodeId),

    #[error("agent {agent}: action targets {target}, which is not one of its neighbors")]
    InvalidAction { agent: NodeId, target: NodeId },

    #[error("action index {index} out of range for an agent with {actions} actions")]
    ActionIndexOutOfRange { index: usize, actions: usize },

    #[error("trust state {state:#b} out of range for an agent of degree {degree}")]
    TrustStateOutOfRange { state: u32, degree: usize },

    #[error("agent {0} has no Q-table")]
    MissingQTable(NodeId),

    #[error("no reliable agents in the roster")]
    EmptyReliableSet,

    #[error("empty sample list")]
    EmptySamples,

    #[error("exact distribution evolution supports at most {limit} nodes, got {nodes}")]
    DistributionTooLarge { nodes: usize, limit: usize },

    #[error("trust schedule covers {have} timesteps, needed {need}")]
    ScheduleTooShort { have: usize, need: usize },

    #[error("config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("malformed Q-table snapshot at line {line}: {reason}")]
    MalformedSnapshot { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
