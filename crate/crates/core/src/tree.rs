//! Arena-backed rooted trees.
//!
//! Children are kept in an intrusive doubly linked sibling list so that a
//! group of children can be moved under a fresh node in time proportional
//! to the group, regardless of the parent's degree.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Result, TreeError};

/// Index of a node inside a [`Tree`] arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Dense taxon identifier: the rank of the leaf label among all labels of
/// the tree in lexicographic order. Two trees over the same leaf set
/// therefore agree on every id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaxonId(u32);

impl TaxonId {
    pub fn new(index: usize) -> Self {
        TaxonId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A nonempty leaf label over `[A-Za-z0-9_.-]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaxonLabel(String);

impl TaxonLabel {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(TreeError::MalformedInput {
                position: 0,
                message: "empty taxon label".into(),
            });
        }
        if let Some(pos) = text.bytes().position(|b| !is_label_byte(b)) {
            return Err(TreeError::MalformedInput {
                position: pos,
                message: format!("invalid character in taxon label `{text}`"),
            });
        }
        Ok(TaxonLabel(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_label_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-')
}

impl fmt::Display for TaxonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for TaxonLabel {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    parent: Option<NodeId>,
    first_child: Option<NodeId>,
    last_child: Option<NodeId>,
    prev_sibling: Option<NodeId>,
    next_sibling: Option<NodeId>,
    degree: usize,
    label: Option<TaxonLabel>,
    taxon: Option<TaxonId>,
    size: usize,
    depth: usize,
}

impl Node {
    fn new(label: Option<TaxonLabel>) -> Self {
        Node {
            parent: None,
            first_child: None,
            last_child: None,
            prev_sibling: None,
            next_sibling: None,
            degree: 0,
            label,
            taxon: None,
            size: 0,
            depth: 1,
        }
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn label(&self) -> Option<&TaxonLabel> {
        self.label.as_ref()
    }

    pub fn taxon(&self) -> Option<TaxonId> {
        self.taxon
    }

    /// Number of leaves below (and including) this node.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_leaf(&self) -> bool {
        self.degree == 0
    }
}

/// Iterator over the children of a node in stored order.
pub struct Children<'a> {
    tree: &'a Tree,
    next: Option<NodeId>,
}

impl Iterator for Children<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let current = self.next?;
        self.next = self.tree.nodes[current.0].next_sibling;
        Some(current)
    }
}

/// A rooted tree with ordered children, unique leaf labels and cached
/// subtree sizes and depths.
#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    root: NodeId,
    leaf_index: HashMap<TaxonLabel, NodeId>,
    taxa: Vec<NodeId>,
    /// Roots of subtrees whose descendants may carry stale depths.
    stale_depths: Vec<NodeId>,
}

impl Tree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    /// Number of nodes in the arena.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.taxa.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> Children<'_> {
        Children {
            tree: self,
            next: self.nodes[id.0].first_child,
        }
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.nodes[id.0].degree
    }

    pub fn size(&self, id: NodeId) -> usize {
        self.nodes[id.0].size
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].degree == 0
    }

    pub fn label(&self, id: NodeId) -> Option<&TaxonLabel> {
        self.nodes[id.0].label.as_ref()
    }

    pub fn taxon(&self, id: NodeId) -> Option<TaxonId> {
        self.nodes[id.0].taxon
    }

    /// Depth with the root at depth 1.
    ///
    /// Cached depths below freshly grouped nodes are refreshed lazily; until
    /// [`Tree::refresh_depths`] runs, reads below such nodes walk to the root.
    pub fn depth(&self, id: NodeId) -> usize {
        if self.stale_depths.is_empty() {
            return self.nodes[id.0].depth;
        }
        let mut depth = 1;
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            depth += 1;
            cur = p;
        }
        depth
    }

    pub fn has_stale_depths(&self) -> bool {
        !self.stale_depths.is_empty()
    }

    /// Brings every cached depth up to date in one pass over the tree.
    pub fn refresh_depths(&mut self) {
        if self.stale_depths.is_empty() {
            return;
        }
        self.stale_depths.clear();
        let mut stack = vec![(self.root, 1)];
        while let Some((v, d)) = stack.pop() {
            self.nodes[v.0].depth = d;
            let mut c = self.nodes[v.0].first_child;
            while let Some(child) = c {
                stack.push((child, d + 1));
                c = self.nodes[child.0].next_sibling;
            }
        }
    }

    /// Leaf node carrying `label`.
    pub fn leaf(&self, label: &str) -> Option<NodeId> {
        self.leaf_index.get(label).copied()
    }

    pub fn leaf_by_taxon(&self, taxon: TaxonId) -> Option<NodeId> {
        self.taxa.get(taxon.index()).copied()
    }

    pub fn taxon_of(&self, label: &str) -> Option<TaxonId> {
        self.leaf(label).and_then(|id| self.taxon(id))
    }

    /// Leaf labels in taxon-id (lexicographic) order.
    pub fn taxon_labels(&self) -> impl Iterator<Item = &TaxonLabel> + '_ {
        self.taxa
            .iter()
            .map(|&id| self.nodes[id.0].label.as_ref().expect("leaf label"))
    }

    /// True when both trees are defined over exactly the same labels.
    pub fn same_leaf_set(&self, other: &Tree) -> bool {
        self.leaf_count() == other.leaf_count() && self.taxon_labels().eq(other.taxon_labels())
    }

    pub(crate) fn check_same_leaf_set(&self, other: &Tree) -> Result<()> {
        if self.same_leaf_set(other) {
            return Ok(());
        }
        let mine: HashSet<&str> = self.taxon_labels().map(|l| l.as_str()).collect();
        let theirs: HashSet<&str> = other.taxon_labels().map(|l| l.as_str()).collect();
        let detail = match (mine.difference(&theirs).min(), theirs.difference(&mine).min()) {
            (Some(a), _) => format!("`{a}` only in the first tree"),
            (None, Some(b)) => format!("`{b}` only in the second tree"),
            (None, None) => "label multisets differ".to_string(),
        };
        Err(TreeError::LeafSetMismatch(detail))
    }

    /// Nodes in pre-order, children visited in stored order.
    pub fn pre_order(&self) -> Vec<NodeId> {
        self.pre_order_from(self.root)
    }

    pub fn pre_order_from(&self, top: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes[top.0].size * 2);
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            out.push(v);
            let mut c = self.nodes[v.0].last_child;
            while let Some(child) = c {
                stack.push(child);
                c = self.nodes[child.0].prev_sibling;
            }
        }
        out
    }

    /// Nodes in post-order, children visited in stored order.
    pub fn post_order(&self) -> Vec<NodeId> {
        self.post_order_from(self.root)
    }

    pub fn post_order_from(&self, top: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes[top.0].size * 2);
        let mut cur = top;
        loop {
            while let Some(c) = self.nodes[cur.0].first_child {
                cur = c;
            }
            loop {
                out.push(cur);
                if cur == top {
                    return out;
                }
                if let Some(s) = self.nodes[cur.0].next_sibling {
                    cur = s;
                    break;
                }
                cur = self.nodes[cur.0].parent.expect("non-top node has a parent");
            }
        }
    }

    /// Leaves of the subtree rooted at `top`, left to right.
    pub fn leaves_under(&self, top: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes[top.0].size);
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            if self.nodes[v.0].degree == 0 {
                out.push(v);
                continue;
            }
            let mut c = self.nodes[v.0].last_child;
            while let Some(child) = c {
                stack.push(child);
                c = self.nodes[child.0].prev_sibling;
            }
        }
        out
    }

    /// Recomputes sizes, depths and the taxon tables in linear time.
    pub fn build_indices(&mut self) {
        let order = self.pre_order();
        for &v in order.iter().rev() {
            let node = &self.nodes[v.0];
            let size = if node.degree == 0 {
                1
            } else {
                self.children(v).map(|c| self.nodes[c.0].size).sum()
            };
            self.nodes[v.0].size = size;
        }
        for &v in &order {
            let depth = match self.nodes[v.0].parent {
                Some(p) => self.nodes[p.0].depth + 1,
                None => 1,
            };
            self.nodes[v.0].depth = depth;
        }
        self.stale_depths.clear();

        let mut leaves: Vec<NodeId> = order.into_iter().filter(|&v| self.is_leaf(v)).collect();
        leaves.sort_by(|a, b| self.nodes[a.0].label.cmp(&self.nodes[b.0].label));
        self.leaf_index.clear();
        for (rank, &leaf) in leaves.iter().enumerate() {
            self.nodes[leaf.0].taxon = Some(TaxonId::new(rank));
            let label = self.nodes[leaf.0].label.clone().expect("leaf label");
            self.leaf_index.insert(label, leaf);
        }
        self.taxa = leaves;
    }

    /// Moves `members`, all children of `parent`, under a fresh node that
    /// takes the place of the first member. Returns the new node.
    ///
    /// Runs in `O(members.len())`. The new node's depth is exact; depths
    /// below it are refreshed lazily.
    pub fn group_children(&mut self, parent: NodeId, members: &[NodeId]) -> Result<NodeId> {
        if members.len() < 2 || members.len() >= self.nodes[parent.0].degree {
            return Err(TreeError::InvalidStructure(format!(
                "cannot group {} of {} children",
                members.len(),
                self.nodes[parent.0].degree
            )));
        }
        if let Some(bad) = members
            .iter()
            .find(|m| self.nodes[m.0].parent != Some(parent))
        {
            return Err(TreeError::InvalidStructure(format!(
                "{bad:?} is not a child of {parent:?}"
            )));
        }

        let group = NodeId(self.nodes.len());
        let mut node = Node::new(None);
        node.parent = Some(parent);
        node.depth = self.nodes[parent.0].depth + 1;
        self.nodes.push(node);

        // Splice the new node in right before the first member.
        let anchor = members[0];
        let before = self.nodes[anchor.0].prev_sibling;
        self.nodes[group.0].prev_sibling = before;
        self.nodes[group.0].next_sibling = Some(anchor);
        self.nodes[anchor.0].prev_sibling = Some(group);
        match before {
            Some(b) => self.nodes[b.0].next_sibling = Some(group),
            None => self.nodes[parent.0].first_child = Some(group),
        }
        self.nodes[parent.0].degree += 1;

        let mut size = 0;
        for &m in members {
            self.unlink(m);
            self.append_child(group, m);
            size += self.nodes[m.0].size;
        }
        self.nodes[group.0].size = size;
        self.stale_depths.push(group);
        Ok(group)
    }

    fn unlink(&mut self, v: NodeId) {
        let parent = self.nodes[v.0].parent.take().expect("unlink a child");
        let prev = self.nodes[v.0].prev_sibling.take();
        let next = self.nodes[v.0].next_sibling.take();
        match prev {
            Some(p) => self.nodes[p.0].next_sibling = next,
            None => self.nodes[parent.0].first_child = next,
        }
        match next {
            Some(n) => self.nodes[n.0].prev_sibling = prev,
            None => self.nodes[parent.0].last_child = prev,
        }
        self.nodes[parent.0].degree -= 1;
    }

    fn append_child(&mut self, parent: NodeId, v: NodeId) {
        let last = self.nodes[parent.0].last_child;
        self.nodes[v.0].parent = Some(parent);
        self.nodes[v.0].prev_sibling = last;
        self.nodes[v.0].next_sibling = None;
        match last {
            Some(l) => self.nodes[l.0].next_sibling = Some(v),
            None => self.nodes[parent.0].first_child = Some(v),
        }
        self.nodes[parent.0].last_child = Some(v);
        self.nodes[parent.0].degree += 1;
    }

    /// Reorders the children of `parent` to follow `order`, which must be a
    /// permutation of its current children.
    pub(crate) fn reorder_children(&mut self, parent: NodeId, order: &[NodeId]) {
        debug_assert_eq!(order.len(), self.nodes[parent.0].degree);
        for &c in order {
            self.unlink(c);
        }
        for &c in order {
            self.append_child(parent, c);
        }
    }

    /// Checks every structural invariant and that the cached sizes and
    /// depths agree with a recomputation from scratch.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let root = &self.nodes[self.root.0];
        if root.parent.is_some() {
            return Err("root has a parent".into());
        }
        let order = self.pre_order();
        if order.len() != self.nodes.len() {
            return Err(format!(
                "{} nodes reachable out of {}",
                order.len(),
                self.nodes.len()
            ));
        }
        let mut size = vec![0usize; self.nodes.len()];
        for &v in order.iter().rev() {
            let node = &self.nodes[v.0];
            let kids: Vec<NodeId> = self.children(v).collect();
            if kids.len() != node.degree {
                return Err(format!("{v:?}: degree {} but {} children", node.degree, kids.len()));
            }
            if kids.len() == 1 {
                return Err(format!("{v:?} is a unary node"));
            }
            for (i, &c) in kids.iter().enumerate() {
                let child = &self.nodes[c.0];
                if child.parent != Some(v) {
                    return Err(format!("{c:?} has the wrong parent"));
                }
                let prev = if i == 0 { None } else { Some(kids[i - 1]) };
                if child.prev_sibling != prev {
                    return Err(format!("{c:?} has a broken sibling link"));
                }
            }
            if node.first_child != kids.first().copied() || node.last_child != kids.last().copied()
            {
                return Err(format!("{v:?} has broken child endpoints"));
            }
            size[v.0] = if kids.is_empty() {
                if node.label.is_none() {
                    return Err(format!("leaf {v:?} has no label"));
                }
                1
            } else {
                if node.label.is_some() {
                    return Err(format!("internal node {v:?} carries a label"));
                }
                kids.iter().map(|c| size[c.0]).sum()
            };
            if size[v.0] != node.size {
                return Err(format!("{v:?}: cached size {} != {}", node.size, size[v.0]));
            }
        }
        let mut depth = vec![0usize; self.nodes.len()];
        for &v in &order {
            depth[v.0] = self.nodes[v.0].parent.map_or(1, |p| depth[p.0] + 1);
            if self.depth(v) != depth[v.0] {
                return Err(format!("{v:?}: depth {} != {}", self.depth(v), depth[v.0]));
            }
        }
        let leaves: Vec<NodeId> = order.iter().copied().filter(|&v| self.is_leaf(v)).collect();
        if leaves.len() != self.leaf_index.len() || leaves.len() != self.taxa.len() {
            return Err("leaf index is not a bijection".into());
        }
        for (rank, &leaf) in self.taxa.iter().enumerate() {
            let node = &self.nodes[leaf.0];
            if node.taxon != Some(TaxonId::new(rank)) {
                return Err(format!("leaf {leaf:?} has the wrong taxon id"));
            }
            if let Some(label) = &node.label {
                if self.leaf_index.get(label) != Some(&leaf) {
                    return Err(format!("leaf index misses `{label}`"));
                }
            }
            if rank > 0 && self.nodes[self.taxa[rank - 1].0].label >= node.label {
                return Err("taxon ids are not in label order".into());
            }
        }
        Ok(())
    }
}

/// Bottom-up constructor: children must exist before their parent.
#[derive(Default, Debug)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
    labels: HashSet<TaxonLabel>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_leaf(&mut self, label: TaxonLabel) -> Result<NodeId> {
        if !self.labels.insert(label.clone()) {
            return Err(TreeError::DuplicateLeafLabel(label.0));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node::new(Some(label)));
        Ok(id)
    }

    pub fn add_internal(&mut self, children: &[NodeId]) -> Result<NodeId> {
        if children.len() < 2 {
            return Err(TreeError::InvalidStructure(
                "internal nodes need at least two children".into(),
            ));
        }
        let id = NodeId(self.nodes.len());
        for &c in children {
            let child = self
                .nodes
                .get(c.0)
                .ok_or_else(|| TreeError::InvalidStructure(format!("unknown node {c:?}")))?;
            if child.parent.is_some() {
                return Err(TreeError::InvalidStructure(format!("{c:?} already has a parent")));
            }
            self.nodes[c.0].parent = Some(id);
        }
        let mut node = Node::new(None);
        node.degree = children.len();
        node.first_child = Some(children[0]);
        node.last_child = Some(children[children.len() - 1]);
        for pair in children.windows(2) {
            self.nodes[pair[0].0].next_sibling = Some(pair[1]);
            self.nodes[pair[1].0].prev_sibling = Some(pair[0]);
        }
        self.nodes.push(node);
        Ok(id)
    }

    pub fn finish(self, root: NodeId) -> Result<Tree> {
        if self.nodes.is_empty() {
            return Err(TreeError::EmptyTree);
        }
        if root.0 >= self.nodes.len() || self.nodes[root.0].parent.is_some() {
            return Err(TreeError::InvalidStructure(format!("{root:?} is not a root")));
        }
        if let Some(orphan) = self
            .nodes
            .iter()
            .enumerate()
            .position(|(i, n)| i != root.0 && n.parent.is_none())
        {
            return Err(TreeError::InvalidStructure(format!(
                "node {orphan} is detached from the root"
            )));
        }
        let mut tree = Tree {
            nodes: self.nodes,
            root,
            leaf_index: HashMap::new(),
            taxa: Vec::new(),
            stale_depths: Vec::new(),
        };
        tree.build_indices();
        Ok(tree)
    }
}

/// Star tree over `labels`, or a single leaf when only one label is given.
pub fn star_tree<I, S>(labels: I) -> Result<Tree>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut builder = TreeBuilder::new();
    let mut leaves = Vec::new();
    for label in labels {
        leaves.push(builder.add_leaf(TaxonLabel::new(label)?)?);
    }
    let root = match leaves.len() {
        0 => return Err(TreeError::EmptyTree),
        1 => leaves[0],
        _ => builder.add_internal(&leaves)?,
    };
    builder.finish(root)
}
