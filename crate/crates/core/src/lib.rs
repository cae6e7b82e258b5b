//! Greedy refinement of a rooted tree by the compatible clusters of a
//! second tree over the same taxa.
//!
//! The counter engines keep, for every node of the working tree, how many
//! of the currently added leaves have reached it through complete
//! children. A cluster is compatible exactly when all of its leaves meet at
//! one node, and it is inserted by regrouping the children that carried
//! them there. Recounting only light subtrees brings the whole refinement
//! to `O(n log n)`.

pub mod cluster;
pub mod counters;
pub mod error;
pub mod gen;
pub mod harness;
pub mod newick;
pub mod refine;
pub mod tree;

pub use cluster::{
    clusters, compatible_oracle, compatible_pairwise, lca, leaf_set, rf_distance, rf_distance_symmetric,
    Cluster, ClusterSet,
};
pub use counters::{CounterState, WorkMeter};
pub use error::{Result, TreeError};
pub use gen::{generate, GenSpec, Shape};
pub use newick::{parse_newick, parse_newick_lines, serialize_newick, serialize_newick_canonical};
pub use refine::{refine, refine_basic, refine_fast, refine_oracle, EngineKind, RefinementReport};
pub use tree::{NodeId, TaxonId, TaxonLabel, Tree, TreeBuilder};
