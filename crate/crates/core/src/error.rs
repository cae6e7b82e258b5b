use thiserror::Error;

use crate::tree::NodeId;

/// Errors produced while parsing, comparing or refining trees.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Text that does not follow the accepted Newick grammar.
    #[error("malformed Newick input at byte {position}: {message}")]
    MalformedInput { position: usize, message: String },
    /// Two leaves of the same tree carry the same label.
    #[error("duplicate leaf label `{0}`")]
    DuplicateLeafLabel(String),
    /// A leaf without a label, e.g. `(,a);`.
    #[error("unlabeled leaf at byte {position}")]
    UnlabeledLeaf { position: usize },
    /// The document holds no tree at all.
    #[error("empty tree")]
    EmptyTree,
    /// The two trees are not defined over the same taxa.
    #[error("leaf sets differ: {0}")]
    LeafSetMismatch(String),
    /// Clusters must hold at least one taxon.
    #[error("empty cluster")]
    EmptyCluster,
    /// A taxon that is not a leaf of the tree.
    #[error("unknown taxon `{0}`")]
    UnknownTaxon(String),
    /// The leaf was already added since the last clear.
    #[error("leaf {0:?} was already added in the current accumulation")]
    LeafAlreadyAdded(NodeId),
    /// The propagated children of `z` do not add up to the cluster size.
    #[error("inconsistent propagation at {node:?}: expected {expected} leaves, found {found}")]
    InconsistentPropagation {
        node: NodeId,
        expected: usize,
        found: usize,
    },
    /// Tree built from an inconsistent arena.
    #[error("invalid tree structure: {0}")]
    InvalidStructure(String),
    /// Random tree generation parameters out of range.
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = TreeError> = std::result::Result<T, E>;
