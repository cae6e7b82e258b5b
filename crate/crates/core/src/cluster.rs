//! Leaf clusters, cluster sets, Robinson-Foulds distances and the
//! definition-level compatibility test.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Result, TreeError};
use crate::tree::{NodeId, TaxonId, Tree};

/// A nonempty set of taxa, stored as a sorted id sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cluster(Vec<TaxonId>);

impl Cluster {
    /// Sorts and deduplicates `ids`. Fails on an empty input.
    pub fn new(mut ids: Vec<TaxonId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(TreeError::EmptyCluster);
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(Cluster(ids))
    }

    pub fn from_labels<'a, I>(tree: &Tree, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ids = labels
            .into_iter()
            .map(|l| {
                tree.taxon_of(l)
                    .ok_or_else(|| TreeError::UnknownTaxon(l.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Cluster::new(ids)
    }

    pub fn ids(&self) -> &[TaxonId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: TaxonId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn intersection_len(&self, other: &Cluster) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Disjoint or nested.
    pub fn is_compatible_with(&self, other: &Cluster) -> bool {
        let common = self.intersection_len(other);
        common == 0 || common == self.len() || common == other.len()
    }

    pub fn labels<'t>(&self, tree: &'t Tree) -> Vec<&'t str> {
        self.0
            .iter()
            .map(|&id| {
                let leaf = tree.leaf_by_taxon(id).expect("taxon of this tree");
                tree.label(leaf).expect("leaf label").as_str()
            })
            .collect()
    }
}

/// The nontrivial clusters of a tree: every cluster `A` with `1 < |A| < n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterSet(BTreeSet<Cluster>);

impl ClusterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cluster: Cluster) -> bool {
        self.0.insert(cluster)
    }

    pub fn contains(&self, cluster: &Cluster) -> bool {
        self.0.contains(cluster)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cluster> {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &ClusterSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// `|self \ other|`.
    pub fn difference_count(&self, other: &ClusterSet) -> usize {
        self.0.difference(&other.0).count()
    }

    pub fn union(&self, other: &ClusterSet) -> ClusterSet {
        ClusterSet(self.0.union(&other.0).cloned().collect())
    }
}

impl FromIterator<Cluster> for ClusterSet {
    fn from_iter<I: IntoIterator<Item = Cluster>>(iter: I) -> Self {
        ClusterSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ClusterSet {
    type Item = &'a Cluster;
    type IntoIter = std::collections::btree_set::Iter<'a, Cluster>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Leaves below `u`, as a cluster.
pub fn leaf_set(tree: &Tree, u: NodeId) -> Cluster {
    let ids = tree
        .leaves_under(u)
        .into_iter()
        .map(|leaf| tree.taxon(leaf).expect("indexed leaf"))
        .collect();
    Cluster::new(ids).expect("every subtree has a leaf")
}

/// `C(tree)`: clusters of all internal non-root nodes.
pub fn clusters(tree: &Tree) -> ClusterSet {
    let mut below: Vec<Vec<TaxonId>> = vec![Vec::new(); tree.node_count()];
    let mut out = ClusterSet::new();
    let n = tree.leaf_count();
    for v in tree.post_order() {
        if let Some(t) = tree.taxon(v) {
            below[v.index()].push(t);
        } else {
            let mut ids = Vec::with_capacity(tree.size(v));
            for c in tree.children(v) {
                ids.extend_from_slice(&below[c.index()]);
            }
            for c in tree.children(v) {
                below[c.index()] = Vec::new();
            }
            if ids.len() > 1 && ids.len() < n {
                out.insert(Cluster::new(ids.clone()).expect("nonempty"));
            }
            below[v.index()] = ids;
        }
    }
    out
}

/// Number of internal non-root nodes. Without unary nodes each of them
/// carries a distinct nontrivial cluster, so this equals `|C(tree)|`.
pub fn cluster_count(tree: &Tree) -> usize {
    tree.node_ids()
        .filter(|&v| !tree.is_leaf(v) && v != tree.root())
        .count()
}

/// Counts clusters present in both trees in linear expected time.
///
/// Leaves are ranked by their left-to-right position in `ta`, which makes
/// every cluster of `ta` a contiguous rank interval. A node of `tb` matches
/// iff its ranks span an interval of exactly its size that is also an
/// interval of `ta`.
fn shared_cluster_count(ta: &Tree, tb: &Tree) -> usize {
    let n = ta.leaf_count();
    let mut rank = vec![0u32; n];
    let mut lo = vec![0u32; ta.node_count()];
    let mut hi = vec![0u32; ta.node_count()];
    let mut next = 0u32;
    let mut intervals = HashSet::new();
    for v in ta.post_order() {
        if let Some(t) = ta.taxon(v) {
            rank[t.index()] = next;
            lo[v.index()] = next;
            hi[v.index()] = next;
            next += 1;
        } else {
            let first = ta.children(v).next().expect("internal");
            let last = ta.children(v).last().expect("internal");
            lo[v.index()] = lo[first.index()];
            hi[v.index()] = hi[last.index()];
            if v != ta.root() {
                intervals.insert((lo[v.index()], hi[v.index()]));
            }
        }
    }

    let mut lo = vec![u32::MAX; tb.node_count()];
    let mut hi = vec![0u32; tb.node_count()];
    let mut shared = 0;
    for v in tb.post_order() {
        if let Some(t) = tb.taxon(v) {
            lo[v.index()] = rank[t.index()];
            hi[v.index()] = rank[t.index()];
        } else {
            let (mut l, mut h) = (u32::MAX, 0);
            for c in tb.children(v) {
                l = l.min(lo[c.index()]);
                h = h.max(hi[c.index()]);
            }
            lo[v.index()] = l;
            hi[v.index()] = h;
            if v != tb.root()
                && (h - l) as usize + 1 == tb.size(v)
                && intervals.contains(&(l, h))
            {
                shared += 1;
            }
        }
    }
    shared
}

/// One-sided Robinson-Foulds distance `|C(ta) \ C(tb)|`.
pub fn rf_distance(ta: &Tree, tb: &Tree) -> Result<usize> {
    ta.check_same_leaf_set(tb)?;
    Ok(cluster_count(ta) - shared_cluster_count(ta, tb))
}

/// Symmetric Robinson-Foulds distance `|C(ta) Δ C(tb)|`. This is the
/// convention most tools report; the one-sided form is [`rf_distance`].
pub fn rf_distance_symmetric(ta: &Tree, tb: &Tree) -> Result<usize> {
    ta.check_same_leaf_set(tb)?;
    let shared = shared_cluster_count(ta, tb);
    Ok(cluster_count(ta) + cluster_count(tb) - 2 * shared)
}

fn check_ids(a: &Cluster, tree: &Tree) -> Result<()> {
    match a.ids().last() {
        Some(id) if id.index() >= tree.leaf_count() => {
            Err(TreeError::UnknownTaxon(format!("taxon #{}", id.index())))
        }
        _ => Ok(()),
    }
}

/// Least common ancestor of the leaves in `a`, found by marking the path
/// of one leaf and walking the others up to it.
pub fn lca(tree: &Tree, a: &Cluster) -> Result<NodeId> {
    check_ids(a, tree)?;
    let mut leaves = a
        .ids()
        .iter()
        .map(|&id| tree.leaf_by_taxon(id).expect("checked id"));
    let first = leaves.next().expect("nonempty cluster");
    let mut path = vec![first];
    let mut pos = vec![usize::MAX; tree.node_count()];
    pos[first.index()] = 0;
    let mut cur = first;
    while let Some(p) = tree.parent(cur) {
        pos[p.index()] = path.len();
        path.push(p);
        cur = p;
    }
    let mut highest = 0;
    for leaf in leaves {
        let mut cur = leaf;
        while pos[cur.index()] == usize::MAX {
            cur = tree.parent(cur).expect("paths meet at the root");
        }
        highest = highest.max(pos[cur.index()]);
    }
    Ok(path[highest])
}

/// Compatibility straight from the definition: every child of the LCA of
/// `a` is either disjoint from `a` or contained in it.
pub fn compatible_oracle(a: &Cluster, tree: &Tree) -> Result<bool> {
    Ok(contained_children(a, tree)?.is_some())
}

/// When `a` is compatible with `tree`, returns its LCA together with the
/// LCA's children that lie inside `a`, in stored order.
pub fn contained_children(a: &Cluster, tree: &Tree) -> Result<Option<(NodeId, Vec<NodeId>)>> {
    let z = lca(tree, a)?;
    if tree.is_leaf(z) {
        return Ok(Some((z, Vec::new())));
    }
    let mut member = vec![false; tree.leaf_count()];
    for id in a.ids() {
        member[id.index()] = true;
    }
    let mut inside = Vec::new();
    for child in tree.children(z) {
        let hits = tree
            .leaves_under(child)
            .into_iter()
            .filter(|&l| member[tree.taxon(l).expect("leaf").index()])
            .count();
        if hits == tree.size(child) {
            inside.push(child);
        } else if hits != 0 {
            return Ok(None);
        }
    }
    Ok(Some((z, inside)))
}

/// Compatibility through pairwise tests: `a` is disjoint from or nested
/// with every cluster of the tree.
pub fn compatible_pairwise(a: &Cluster, tree_clusters: &ClusterSet) -> bool {
    tree_clusters.iter().all(|b| a.is_compatible_with(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;

    fn cl(t: &Tree, labels: &[&str]) -> Cluster {
        Cluster::from_labels(t, labels.iter().copied()).unwrap()
    }

    fn set(t: &Tree, groups: &[&[&str]]) -> ClusterSet {
        groups.iter().map(|g| cl(t, g)).collect()
    }

    #[test]
    fn leaf_sets() {
        let t = parse_newick("((a,b),c);").unwrap();
        let a = t.leaf("a").unwrap();
        assert_eq!(leaf_set(&t, a), cl(&t, &["a"]));
        assert_eq!(leaf_set(&t, t.root()), cl(&t, &["a", "b", "c"]));
        assert_eq!(leaf_set(&t, t.parent(a).unwrap()), cl(&t, &["a", "b"]));
        assert_eq!(leaf_set(&t, t.root()).len(), t.size(t.root()));
    }

    #[test]
    fn cluster_sets() {
        let t = parse_newick("((a,b),c);").unwrap();
        assert_eq!(clusters(&t), set(&t, &[&["a", "b"]]));
        let t = parse_newick("(a,b,c);").unwrap();
        assert!(clusters(&t).is_empty());
        let t = parse_newick("((a,b),(c,d));").unwrap();
        assert_eq!(clusters(&t), set(&t, &[&["a", "b"], &["c", "d"]]));
        assert_eq!(cluster_count(&t), 2);
    }

    #[test]
    fn rf_examples() {
        let x = parse_newick("(((a,b),c),(d,e));").unwrap();
        assert_eq!(rf_distance(&x, &x).unwrap(), 0);
        let ta = parse_newick("((a,b),c,d);").unwrap();
        let tb = parse_newick("((c,d),a,b);").unwrap();
        assert_eq!(rf_distance(&ta, &tb).unwrap(), 1);
        assert_eq!(rf_distance_symmetric(&ta, &tb).unwrap(), 2);
        let ta = parse_newick("((a,b),c);").unwrap();
        let tb = parse_newick("(a,b,c);").unwrap();
        assert_eq!(rf_distance(&ta, &tb).unwrap(), 1);
        assert_eq!(rf_distance(&tb, &ta).unwrap(), 0);
    }

    #[test]
    fn rf_rejects_different_leaf_sets() {
        let ta = parse_newick("(a,b,c);").unwrap();
        let tb = parse_newick("(a,b,d);").unwrap();
        assert!(matches!(rf_distance(&ta, &tb), Err(TreeError::LeafSetMismatch(_))));
        let tc = parse_newick("(a,b);").unwrap();
        assert!(matches!(rf_distance_symmetric(&ta, &tc), Err(TreeError::LeafSetMismatch(_))));
    }

    #[test]
    fn rf_interval_matching_needs_exact_span() {
        // {b,c} spans ranks 1..2 of ta but ta has no such cluster.
        let ta = parse_newick("(((a,b),c),d);").unwrap();
        let tb = parse_newick("((a,(b,c)),d);").unwrap();
        assert_eq!(rf_distance(&ta, &tb).unwrap(), 1);
        assert_eq!(rf_distance(&tb, &ta).unwrap(), 1);
    }

    #[test]
    fn oracle_examples() {
        let star = parse_newick("(a,b,c,d);").unwrap();
        assert!(compatible_oracle(&cl(&star, &["a", "b"]), &star).unwrap());
        let t = parse_newick("((a,b),c,d);").unwrap();
        assert!(!compatible_oracle(&cl(&t, &["b", "c"]), &t).unwrap());
        assert!(compatible_oracle(&cl(&t, &["a", "b", "c", "d"]), &t).unwrap());
        assert!(compatible_oracle(&cl(&t, &["a", "b", "c"]), &t).unwrap());
        assert!(compatible_oracle(&cl(&t, &["c"]), &t).unwrap());
    }

    #[test]
    fn oracle_rejects_unknown_taxa() {
        let t = parse_newick("(a,b,c);").unwrap();
        let bogus = Cluster::new(vec![TaxonId::new(0), TaxonId::new(7)]).unwrap();
        assert!(matches!(compatible_oracle(&bogus, &t), Err(TreeError::UnknownTaxon(_))));
        assert!(matches!(
            Cluster::from_labels(&t, ["a", "q"]),
            Err(TreeError::UnknownTaxon(l)) if l == "q"
        ));
    }

    #[test]
    fn lca_examples() {
        let t = parse_newick("((a,b),c);").unwrap();
        let a = t.leaf("a").unwrap();
        assert_eq!(lca(&t, &cl(&t, &["a"])).unwrap(), a);
        assert_eq!(lca(&t, &cl(&t, &["a", "c"])).unwrap(), t.root());
        assert_eq!(lca(&t, &cl(&t, &["a", "b"])).unwrap(), t.parent(a).unwrap());
    }

    #[test]
    fn pairwise_matches_definition_on_examples() {
        let t = parse_newick("((a,b),c,d);").unwrap();
        let cs = clusters(&t);
        assert!(!compatible_pairwise(&cl(&t, &["b", "c"]), &cs));
        assert!(compatible_pairwise(&cl(&t, &["a", "b", "c"]), &cs));
        assert!(compatible_pairwise(&cl(&t, &["c", "d"]), &cs));
    }
}
