//! Graphs, edge contexts and the Markov-blanket partitions they induce.

mod graph;
mod partition;
mod structure;

pub use graph::UndirectedGraph;
pub use partition::{build_blanket_partition, BlanketPartition, MAX_BLANKET_CONFIGS};
pub use structure::{
    space_size, ContextJson, ContextualStructure, EdgeContext, StructureJson, ValidationReport,
    Violation,
};
