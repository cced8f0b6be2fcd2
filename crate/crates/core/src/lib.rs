//! Semantic knowledge and content dissemination over opportunistic contacts.
//!
//! Every node keeps an associative semantic network built from the tags of the
//! items it owns. Edge strength decays with time since last use and is
//! reinforced when the edge takes part in an exchange. When two nodes meet,
//! each in turn donates a subgraph of its network selected around the concepts
//! both already know, then pushes the items best matching that subgraph.
//!
//! The crate is `no_std` (with `alloc`); file formats, the CLI and parallel
//! sweeps live in the `semnet` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod benchmark;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod exchange;
pub mod graph;
pub mod item;
pub mod metrics;
pub mod mobility;
pub mod seed;

pub use error::{ConfigError, GraphError};
pub use graph::{ContributedNetwork, Edge, EdgeState, SemanticNetwork};
pub use item::{ItemId, ItemStore, NodeId, TagLabel, TaggedItem};

/// Simulation time in seconds.
pub type Seconds = f64;
