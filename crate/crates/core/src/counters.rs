//! Amortized leaf counters over the working tree.
//!
//! After a clear and the addition of a leaf set `S`, every node `v` holds
//!
//! ```text
//! counter(leaf) = 1 if the leaf was added, else 0
//! counter(v)    = sum of counter(w) over children w with counter(w) = size(w)
//! ```
//!
//! A node is *complete* when `counter(v) = size(v)`. Adding a leaf walks up
//! only through nodes that just became complete, so a run of `m` leaf
//! additions performs at most `2m` upward steps in total.

use crate::error::{Result, TreeError};
use crate::tree::{NodeId, Tree};

/// Instrumentation gathered while counting and refining.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkMeter {
    /// Calls to [`CounterState::update_counter_leaf`].
    pub leaf_updates: u64,
    /// Upward steps taken by those calls.
    pub loop_iterations: u64,
    /// Refinements that created a node.
    pub refinements: u64,
    /// Nodes created or re-parented by refinements.
    pub refinement_touches: u64,
    /// Largest `touched - |propagated(z)|` over all refinements.
    pub max_touch_excess: u64,
}

impl WorkMeter {
    pub fn amortized_bound_holds(&self) -> bool {
        self.loop_iterations <= 2 * self.leaf_updates
    }
}

/// Counters, dirty list and propagation lists over an owned host tree.
#[derive(Clone, Debug)]
pub struct CounterState {
    host: Tree,
    counter: Vec<usize>,
    dirty: Vec<NodeId>,
    propagated: Vec<Vec<NodeId>>,
    meter: WorkMeter,
}

impl CounterState {
    pub fn new(host: Tree) -> Self {
        let n = host.node_count();
        CounterState {
            host,
            counter: vec![0; n],
            dirty: Vec::new(),
            propagated: vec![Vec::new(); n],
            meter: WorkMeter::default(),
        }
    }

    pub fn host(&self) -> &Tree {
        &self.host
    }

    pub fn into_host(self) -> Tree {
        self.host
    }

    pub fn meter(&self) -> &WorkMeter {
        &self.meter
    }

    pub fn counter(&self, v: NodeId) -> usize {
        self.counter[v.index()]
    }

    /// Children of `v` that pushed a complete count into it since the
    /// last clear, in arrival order.
    pub fn propagated(&self, v: NodeId) -> &[NodeId] {
        &self.propagated[v.index()]
    }

    pub fn dirty(&self) -> &[NodeId] {
        &self.dirty
    }

    pub fn is_complete(&self, v: NodeId) -> bool {
        self.counter[v.index()] == self.host.size(v)
    }

    /// Resets every counter, in time proportional to the dirty list.
    pub fn clear(&mut self) {
        for v in self.dirty.drain(..) {
            self.counter[v.index()] = 0;
            self.propagated[v.index()].clear();
        }
    }

    fn bump(&mut self, v: NodeId, by: usize) {
        let slot = &mut self.counter[v.index()];
        if *slot == 0 {
            self.dirty.push(v);
        }
        *slot += by;
        debug_assert!(*slot <= self.host.size(v));
    }

    /// Marks `leaf` as added and pushes complete counts upward. Returns the
    /// last node whose counter changed: the first ancestor left incomplete,
    /// or the root.
    pub fn update_counter_leaf(&mut self, leaf: NodeId) -> Result<NodeId> {
        if leaf.index() >= self.host.node_count() || !self.host.is_leaf(leaf) {
            return Err(TreeError::UnknownTaxon(format!("node #{}", leaf.index())));
        }
        if self.counter[leaf.index()] != 0 {
            return Err(TreeError::LeafAlreadyAdded(leaf));
        }
        self.meter.leaf_updates += 1;
        self.bump(leaf, 1);
        let mut v = leaf;
        while self.is_complete(v) {
            let Some(p) = self.host.parent(v) else {
                break;
            };
            let carried = self.counter[v.index()];
            self.bump(p, carried);
            self.propagated[p.index()].push(v);
            self.meter.loop_iterations += 1;
            v = p;
        }
        Ok(v)
    }

    /// [`update_counter_leaf`](Self::update_counter_leaf) by label.
    pub fn update_counter_taxon(&mut self, label: &str) -> Result<NodeId> {
        let leaf = self
            .host
            .leaf(label)
            .ok_or_else(|| TreeError::UnknownTaxon(label.to_string()))?;
        self.update_counter_leaf(leaf)
    }

    /// Of two nodes returned during one accumulation, keeps the one closer
    /// to the root. Sizes grow strictly along ancestor chains, so the
    /// larger subtree wins; ties keep `current`.
    pub fn closer_to_root(&self, current: NodeId, candidate: NodeId) -> NodeId {
        if self.host.size(candidate) > self.host.size(current) {
            candidate
        } else {
            current
        }
    }

    /// Adds every host leaf in `leaves`, returning the returned node
    /// closest to the root, or `None` for an empty input.
    pub fn accumulate<I>(&mut self, leaves: I) -> Result<Option<NodeId>>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut z: Option<NodeId> = None;
        for leaf in leaves {
            let p = self.update_counter_leaf(leaf)?;
            z = Some(match z {
                None => p,
                Some(cur) => self.closer_to_root(cur, p),
            });
        }
        Ok(z)
    }

    /// Adds the leaves of `u`'s subtree in `source`, matched to host leaves
    /// by label, and returns `z`.
    pub fn update_counter_subtree(&mut self, source: &Tree, u: NodeId) -> Result<NodeId> {
        let mut leaves = Vec::with_capacity(source.size(u));
        for leaf in source.leaves_under(u) {
            let label = source.label(leaf).expect("leaf label");
            let host_leaf = self
                .host
                .leaf(label.as_str())
                .ok_or_else(|| TreeError::UnknownTaxon(label.to_string()))?;
            leaves.push(host_leaf);
        }
        Ok(self.accumulate(leaves)?.expect("a subtree has at least one leaf"))
    }

    /// True iff every added leaf has reached `z`'s counter.
    pub fn is_compatible(&self, cluster_size: usize, z: NodeId) -> bool {
        self.counter[z.index()] == cluster_size
    }

    /// Inserts the accumulated cluster below `z` by regrouping the children
    /// that propagated into it. Returns the node carrying the cluster, which
    /// is an existing node when the cluster is already present.
    pub fn apply_refinement(&mut self, z: NodeId, cluster_size: usize) -> Result<NodeId> {
        let found: usize = self.propagated[z.index()]
            .iter()
            .map(|w| self.counter[w.index()])
            .sum();
        if found != cluster_size || self.counter[z.index()] != cluster_size {
            return Err(TreeError::InconsistentPropagation {
                node: z,
                expected: cluster_size,
                found,
            });
        }
        let moved = &self.propagated[z.index()];
        if moved.len() == 1 {
            return Ok(moved[0]);
        }
        if moved.len() == self.host.degree(z) {
            return Ok(z);
        }

        let moved = std::mem::take(&mut self.propagated[z.index()]);
        let group = self.host.group_children(z, &moved)?;
        debug_assert_eq!(group.index(), self.counter.len());
        self.counter.push(0);
        self.bump(group, cluster_size);
        self.propagated[z.index()].push(group);
        self.meter.refinements += 1;
        self.meter.refinement_touches += moved.len() as u64 + 1;
        self.meter.max_touch_excess = self.meter.max_touch_excess.max(1);
        self.propagated.push(moved);
        Ok(group)
    }
}
