//! Knowledge-graph storage, dataset ingestion and seed handling.
//!
//! A [`KnowledgeGraph`] keeps entity and relation ids as they appear in the
//! dataset files. Every id also has a dense *position* (its rank in ascending
//! id order), which is what the embedding code indexes by.

mod adjacency;
mod graph;
mod io;
mod seeds;

pub use adjacency::{build_adjacency, build_pair_adjacency, Edge, NeighborIndex};
pub use graph::{display_name, KgPair, KnowledgeGraph, Side, Triple};
pub use io::{
    load_dataset, parse_kg_files, parse_seed_pairs, write_dataset, write_kg_files, write_seed_pairs,
    Dataset, DatasetLayout,
};
pub use seeds::{split_seeds, AlignmentSeedSet};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("{path}:{line}: malformed line: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: duplicate {kind} id {id}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: u64,
    },
    #[error("{path}:{line}: triple references unknown {kind} id {id}")]
    DanglingId {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: u64,
    },
    #[error("{context}: unknown {side:?} entity id {id}")]
    UnknownEntity {
        context: String,
        side: Side,
        id: u64,
    },
    #[error("{context}: {side:?} entity id {id} appears in more than one pair")]
    DuplicateSeed {
        context: String,
        side: Side,
        id: u64,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;
