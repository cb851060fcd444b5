//! Knowledge-graph retrieval and tool-chaining engine.
//!
//! The crate is organized bottom-up:
//!
//! - [`kgstore`]: property graph with exact cosine kNN and JSONL persistence
//! - [`ingest`]: documents, tables, images and code into the graph, plus
//!   entity de-duplication
//! - [`retrieval`]: top-k entity seeds, one-hop expansion, context layout
//! - [`tools`]: tool protocols, model backends and the built-in experts
//! - [`orchestrator`]: the plan / execute / reflect / revise solve loop
//! - [`evalkit`]: planning, selection, calling and response metrics
//! - [`config`]: key-value engine configuration

pub mod config;
pub mod evalkit;
pub mod ingest;
pub mod kgstore;
pub mod remote;
pub mod orchestrator;
pub mod retrieval;
pub mod text;
pub mod tools;

pub use kgstore::{Direction, Edge, EdgeLabel, GraphError, Node, NodeId, NodeKind, PropValue, PropertyGraph};
