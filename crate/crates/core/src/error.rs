use alloc::string::String;

use thiserror::Error;

use crate::item::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("cannot build a semantic network from an empty item set")]
    EmptyItemSet,
    #[error("edge {0} -- {1} is not in the network")]
    UnknownEdge(String, String),
    #[error("vertex {0} is not in the network")]
    UnknownVertex(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("tag label is empty after normalization")]
    EmptyLabel,
    #[error("item has no tags")]
    EmptyItem,
}

/// A configuration value violates one of its typed invariants.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Raised before a run starts when its inputs do not fit together.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("contact references node {0} but only {1} nodes exist")]
    UnknownNode(NodeId, usize),
    #[error("node {0} has an item assignment but only {1} nodes exist")]
    UnknownAssignedNode(NodeId, usize),
    #[error("item {0} is assigned but not defined in the dataset")]
    UnknownItem(u64),
    #[error("contact {0}-{1} is invalid: {2}")]
    BadContact(NodeId, NodeId, String),
    #[error("global knowledge graph is empty")]
    EmptyGlobalGraph,
}
