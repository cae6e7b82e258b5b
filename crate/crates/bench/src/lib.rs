//! Workloads shared by the criterion benchmarks.

use treegraft_core::harness::bench_instance;
use treegraft_core::tree::star_tree;
use treegraft_core::{generate, GenSpec, Result, Shape, Tree};

/// Contracted Yule host and a binary source of `shape` with `n` leaves.
pub fn workload(n: usize, shape: Shape) -> Result<(Tree, Tree)> {
    bench_instance(n, 0, shape)
}

/// Star host with a caterpillar source: the worst case for the basic engine.
pub fn star_caterpillar(n: usize) -> Result<(Tree, Tree)> {
    let source = generate(&GenSpec::new(n, 0, Shape::Caterpillar))?;
    let star = star_tree(source.taxon_labels().map(|l| l.to_string()))?;
    Ok((star, source))
}
