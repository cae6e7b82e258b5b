//! Refinement engines.
//!
//! Every engine returns a copy of `t` extended by each cluster of `source`
//! that is compatible with `t`. The clusters of one tree are pairwise
//! compatible, so the order in which they are tried cannot change the
//! outcome; all engines visit `source` in post-order anyway.

use std::fmt;
use std::str::FromStr;

use crate::cluster::{clusters, compatible_pairwise, contained_children, leaf_set, rf_distance, ClusterSet};
use crate::counters::CounterState;
use crate::error::Result;
use crate::tree::{NodeId, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EngineKind {
    /// Definition-based LCA test per cluster.
    Oracle,
    /// Fresh counter accumulation per cluster, quadratic worst case.
    Basic,
    /// Heavy-child traversal, `O(n log n)`.
    Fast,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Oracle, EngineKind::Basic, EngineKind::Fast];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Oracle => "oracle",
            EngineKind::Basic => "basic",
            EngineKind::Fast => "fast",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(EngineKind::Oracle),
            "basic" => Ok(EngineKind::Basic),
            "fast" => Ok(EngineKind::Fast),
            other => Err(format!("unknown engine `{other}` (expected fast, basic or oracle)")),
        }
    }
}

/// Outcome and instrumentation of one refinement run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementReport {
    pub engine: EngineKind,
    /// Nontrivial source clusters tested.
    pub attempted: usize,
    /// Tested clusters found compatible, including ones already present.
    pub accepted: usize,
    /// Clusters that created a new node.
    pub inserted: usize,
    /// `|C(source) \ C(t)|` before refining.
    pub rf_before: usize,
    /// `|C(source) \ C(t')|` after refining.
    pub rf_after: usize,
    pub leaf_updates: u64,
    pub loop_iterations: u64,
    pub refinement_touches: u64,
    pub max_touch_excess: u64,
    /// Most leaf updates spent on any single taxon.
    pub max_leaf_charge: u64,
}

impl RefinementReport {
    fn new(engine: EngineKind) -> Self {
        RefinementReport {
            engine,
            attempted: 0,
            accepted: 0,
            inserted: 0,
            rf_before: 0,
            rf_after: 0,
            leaf_updates: 0,
            loop_iterations: 0,
            refinement_touches: 0,
            max_touch_excess: 0,
            max_leaf_charge: 0,
        }
    }

    /// Upward steps never exceed twice the leaf updates.
    pub fn amortized_bound_holds(&self) -> bool {
        self.loop_iterations <= 2 * self.leaf_updates
    }

    /// `key=value` lines, one per field.
    pub fn to_key_values(&self) -> String {
        format!(
            "engine={}\nrf_before={}\nrf_after={}\nattempted={}\naccepted={}\ninserted={}\n\
             leaf_updates={}\nloop_iterations={}\nrefinement_touches={}\nmax_leaf_charge={}\n",
            self.engine,
            self.rf_before,
            self.rf_after,
            self.attempted,
            self.accepted,
            self.inserted,
            self.leaf_updates,
            self.loop_iterations,
            self.refinement_touches,
            self.max_leaf_charge,
        )
    }
}

/// `n * ceil(log2 n) + n`, the leaf-update budget of the fast engine.
pub fn fast_leaf_update_bound(n: usize) -> u64 {
    let n = n as u64;
    let log = if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() as u64 };
    n * log + n
}

/// Refines `t` with the clusters of `source` using `engine`.
pub fn refine(t: &Tree, source: &Tree, engine: EngineKind) -> Result<(Tree, RefinementReport)> {
    match engine {
        EngineKind::Oracle => refine_oracle(t, source),
        EngineKind::Basic => refine_basic(t, source),
        EngineKind::Fast => refine_fast(t, source),
    }
}

/// Source leaves laid out left to right, mapped to host leaves, with the
/// contiguous slice owned by every source node.
struct SourceLayout {
    host_leaves: Vec<NodeId>,
    taxa: Vec<usize>,
    span: Vec<(usize, usize)>,
}

impl SourceLayout {
    fn new(source: &Tree, host: &Tree) -> Self {
        let mut host_leaves = Vec::with_capacity(source.leaf_count());
        let mut taxa = Vec::with_capacity(source.leaf_count());
        let mut span = vec![(0, 0); source.node_count()];
        for v in source.post_order() {
            if let Some(t) = source.taxon(v) {
                span[v.index()] = (host_leaves.len(), host_leaves.len() + 1);
                // Equal leaf sets give equal taxon ids.
                host_leaves.push(host.leaf_by_taxon(t).expect("shared taxon"));
                taxa.push(t.index());
            } else {
                let first = source.children(v).next().expect("internal");
                let last = source.children(v).last().expect("internal");
                span[v.index()] = (span[first.index()].0, span[last.index()].1);
            }
        }
        SourceLayout {
            host_leaves,
            taxa,
            span,
        }
    }

    fn range(&self, u: NodeId) -> std::ops::Range<usize> {
        let (a, b) = self.span[u.index()];
        a..b
    }
}

fn prepare(t: &Tree, source: &Tree, engine: EngineKind) -> Result<RefinementReport> {
    t.check_same_leaf_set(source)?;
    let mut report = RefinementReport::new(engine);
    report.rf_before = rf_distance(source, t)?;
    Ok(report)
}

fn finish(
    mut host: Tree,
    source: &Tree,
    mut report: RefinementReport,
) -> Result<(Tree, RefinementReport)> {
    host.refresh_depths();
    report.rf_after = rf_distance(source, &host)?;
    Ok((host, report))
}

fn is_tested(source: &Tree, u: NodeId) -> bool {
    !source.is_leaf(u) && u != source.root()
}

/// Counter engine driver shared by the basic and fast engines.
struct CounterRun<'a> {
    source: &'a Tree,
    layout: SourceLayout,
    state: CounterState,
    charges: Vec<u64>,
    report: RefinementReport,
}

impl<'a> CounterRun<'a> {
    fn new(t: &Tree, source: &'a Tree, report: RefinementReport) -> Self {
        let layout = SourceLayout::new(source, t);
        CounterRun {
            source,
            layout,
            state: CounterState::new(t.clone()),
            charges: vec![0; source.leaf_count()],
            report,
        }
    }

    /// Adds the leaves of source node `u`; returns `z`.
    fn add_subtree(&mut self, u: NodeId) -> Result<NodeId> {
        let range = self.layout.range(u);
        for &t in &self.layout.taxa[range.clone()] {
            self.charges[t] += 1;
        }
        let z = self.state.accumulate(self.layout.host_leaves[range].iter().copied())?;
        Ok(z.expect("source subtrees are nonempty"))
    }

    /// Tests the cluster of `u` against the current counters and inserts it
    /// when compatible.
    fn test_and_apply(&mut self, u: NodeId, z: NodeId) -> Result<()> {
        if !is_tested(self.source, u) {
            return Ok(());
        }
        let size = self.source.size(u);
        self.report.attempted += 1;
        if self.state.is_compatible(size, z) {
            self.report.accepted += 1;
            self.state.apply_refinement(z, size)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<(Tree, RefinementReport)> {
        let mut report = self.report;
        let meter = self.state.meter().clone();
        report.inserted = meter.refinements as usize;
        report.leaf_updates = meter.leaf_updates;
        report.loop_iterations = meter.loop_iterations;
        report.refinement_touches = meter.refinement_touches;
        report.max_touch_excess = meter.max_touch_excess;
        report.max_leaf_charge = self.charges.iter().copied().max().unwrap_or(0);
        finish(self.state.into_host(), self.source, report)
    }
}

/// One clear-and-accumulate pass per nontrivial source cluster.
pub fn refine_basic(t: &Tree, source: &Tree) -> Result<(Tree, RefinementReport)> {
    let report = prepare(t, source, EngineKind::Basic)?;
    let mut run = CounterRun::new(t, source, report);
    for u in source.post_order() {
        if !is_tested(source, u) {
            continue;
        }
        run.state.clear();
        let z = run.add_subtree(u)?;
        run.test_and_apply(u, z)?;
    }
    run.finish()
}

struct SolveFrame {
    node: NodeId,
    /// Children by ascending size; the last one is the heavy child.
    kids: Vec<NodeId>,
    next: usize,
    z: Option<NodeId>,
}

/// Heavy-child traversal: light children are solved and discarded, the
/// heavy child is solved last and kept, then the light leaves are re-added.
/// Each leaf is re-added once per light subtree containing it, and a light
/// subtree holds at most half of its parent's leaves.
pub fn refine_fast(t: &Tree, source: &Tree) -> Result<(Tree, RefinementReport)> {
    let report = prepare(t, source, EngineKind::Fast)?;
    let mut run = CounterRun::new(t, source, report);
    run.state.clear();

    let frame = |node: NodeId| {
        let mut kids: Vec<NodeId> = source.children(node).collect();
        kids.sort_by_key(|&c| source.size(c));
        SolveFrame {
            node,
            kids,
            next: 0,
            z: None,
        }
    };

    if source.is_leaf(source.root()) {
        run.add_subtree(source.root())?;
        return run.finish();
    }

    let mut stack = vec![frame(source.root())];
    // z of the child that just finished, delivered to the frame on top.
    let mut finished: Option<NodeId> = None;
    while let Some(top) = stack.last_mut() {
        if let Some(z) = finished.take() {
            let idx = top.next - 1;
            if idx + 1 < top.kids.len() {
                run.state.clear();
            } else {
                top.z = Some(z);
            }
        }
        if top.next < top.kids.len() {
            let child = top.kids[top.next];
            top.next += 1;
            if source.is_leaf(child) {
                finished = Some(run.add_subtree(child)?);
            } else {
                stack.push(frame(child));
            }
            continue;
        }

        let top = stack.pop().expect("non-empty stack");
        if top.node == source.root() {
            // The root cluster is trivial; nothing reads the counters again.
            break;
        }
        let mut z = top.z.expect("heavy child solved");
        for &light in &top.kids[..top.kids.len() - 1] {
            let candidate = run.add_subtree(light)?;
            z = run.state.closer_to_root(z, candidate);
        }
        run.test_and_apply(top.node, z)?;
        finished = Some(z);
    }

    debug_assert!(
        run.charges.iter().all(|&c| c <= 1 + log2_floor(source.leaf_count())),
        "a leaf was charged more often than its light ancestors allow"
    );
    run.finish()
}

fn log2_floor(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as u64
    }
}

/// Tests each source cluster with the LCA definition and regroups the
/// LCA's contained children.
pub fn refine_oracle(t: &Tree, source: &Tree) -> Result<(Tree, RefinementReport)> {
    let mut report = prepare(t, source, EngineKind::Oracle)?;
    let mut host = t.clone();
    for u in source.post_order() {
        if !is_tested(source, u) {
            continue;
        }
        report.attempted += 1;
        let cluster = leaf_set(source, u);
        let Some((z, inside)) = contained_children(&cluster, &host)? else {
            continue;
        };
        report.accepted += 1;
        if inside.len() >= 2 && inside.len() < host.degree(z) {
            report.refinement_touches += inside.len() as u64 + 1;
            host.group_children(z, &inside)?;
            report.inserted += 1;
        }
    }
    finish(host, source, report)
}

/// Closed form every engine must reproduce:
/// `C(t) ∪ {A ∈ C(source) : A is disjoint from or nested with all of C(t)}`.
pub fn expected_clusters(t: &Tree, source: &Tree) -> Result<ClusterSet> {
    t.check_same_leaf_set(source)?;
    let mine = clusters(t);
    let extra: ClusterSet = clusters(source)
        .iter()
        .filter(|a| compatible_pairwise(a, &mine))
        .cloned()
        .collect();
    Ok(mine.union(&extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Cluster;
    use crate::error::TreeError;
    use crate::newick::{parse_newick, serialize_newick, serialize_newick_canonical};

    fn p(text: &str) -> Tree {
        parse_newick(text).unwrap()
    }

    fn cs(t: &Tree, groups: &[&[&str]]) -> ClusterSet {
        groups
            .iter()
            .map(|g| Cluster::from_labels(t, g.iter().copied()).unwrap())
            .collect()
    }

    fn all_engines(t: &Tree, source: &Tree) -> Vec<(Tree, RefinementReport)> {
        EngineKind::ALL
            .iter()
            .map(|&e| {
                let (out, report) = refine(t, source, e).unwrap();
                out.validate().unwrap();
                (out, report)
            })
            .collect()
    }

    #[test]
    fn star_picks_up_both_cherries() {
        let t = p("(a,b,c,d);");
        let source = p("((a,b),(c,d));");
        for (out, report) in all_engines(&t, &source) {
            assert_eq!(clusters(&out), cs(&out, &[&["a", "b"], &["c", "d"]]));
            assert_eq!(serialize_newick_canonical(&out), "((a,b),(c,d));");
            assert_eq!(report.rf_before, 2);
            assert_eq!(report.rf_after, 0);
            assert_eq!(report.inserted, 2);
        }
    }

    #[test]
    fn conflicting_source_leaves_t_alone() {
        let t = p("((a,b),c,d);");
        let source = p("((a,c),(b,d));");
        for (out, report) in all_engines(&t, &source) {
            assert_eq!(clusters(&out), clusters(&t));
            assert_eq!(report.attempted, 2);
            assert_eq!(report.accepted, 0);
        }
    }

    #[test]
    fn self_refinement_is_idempotent() {
        let t = p("(((a,b),c),(d,e),f);");
        for (out, report) in all_engines(&t, &t) {
            assert_eq!(serialize_newick(&out), serialize_newick(&t));
            assert_eq!(report.accepted, report.attempted);
            assert_eq!(report.inserted, 0);
            assert_eq!(report.rf_after, 0);
        }
    }

    #[test]
    fn basic_nests_caterpillar_clusters() {
        let t = p("(a,b,c,d);");
        let source = p("(((a,b),c),d);");
        let (out, _) = refine_basic(&t, &source).unwrap();
        assert_eq!(clusters(&out), cs(&out, &[&["a", "b"], &["a", "b", "c"]]));
    }

    #[test]
    fn star_source_attempts_nothing() {
        let t = p("((a,b),c,d);");
        for (out, report) in all_engines(&t, &p("(d,c,b,a);")) {
            assert_eq!(report.attempted, 0);
            assert_eq!(clusters(&out), clusters(&t));
        }
    }

    #[test]
    fn single_leaf() {
        let t = p("a;");
        for (out, report) in all_engines(&t, &t) {
            assert_eq!(serialize_newick(&out), "a;");
            assert_eq!(report.attempted, 0);
        }
    }

    #[test]
    fn fast_on_multifurcating_source() {
        let t = p("(a,b,c,d,e);");
        let source = p("(((a,b),(c,d)),e);");
        let want = cs(&t, &[&["a", "b"], &["c", "d"], &["a", "b", "c", "d"]]);
        let (out, _) = refine_fast(&t, &source).unwrap();
        assert_eq!(clusters(&out), want);
        let source = p("((a,b,c),(d,e),f,g,h);");
        let t = p("(a,b,c,d,e,f,g,h);");
        let (out, report) = refine_fast(&t, &source).unwrap();
        assert_eq!(clusters(&out), clusters(&source));
        assert!(report.leaf_updates <= fast_leaf_update_bound(8));
    }

    #[test]
    fn oracle_nests_existing_cluster() {
        let t = p("((a,b),c,d);");
        let source = p("((a,b,c),d);");
        let (out, _) = refine_oracle(&t, &source).unwrap();
        assert_eq!(serialize_newick(&out), "(((a,b),c),d);");
    }

    #[test]
    fn balanced_source_leaf_updates() {
        for k in 1..=8u32 {
            let n = 1usize << k;
            let mut text = String::new();
            fn build(lo: usize, hi: usize, out: &mut String) {
                if hi - lo == 1 {
                    out.push_str(&format!("t{lo}"));
                    return;
                }
                let mid = (lo + hi) / 2;
                out.push('(');
                build(lo, mid, out);
                out.push(',');
                build(mid, hi, out);
                out.push(')');
            }
            build(0, n, &mut text);
            text.push(';');
            let source = p(&text);
            let star = crate::tree::star_tree((0..n).map(|i| format!("t{i}"))).unwrap();
            let (_, report) = refine_fast(&star, &source).unwrap();
            assert!(report.leaf_updates <= (n as u64) * k as u64, "k={k}");
            // Every leaf pays once for itself and once per light edge below the root.
            assert_eq!(report.leaf_updates, n as u64 + (n as u64 / 2) * (k as u64 - 1));
        }
    }

    #[test]
    fn leaf_set_mismatch() {
        let t = p("(a,b,c);");
        let source = p("((a,b),d);");
        for e in EngineKind::ALL {
            assert!(matches!(refine(&t, &source, e), Err(TreeError::LeafSetMismatch(_))));
        }
    }

    #[test]
    fn input_is_not_mutated() {
        let t = p("(a,b,c,d);");
        let before = serialize_newick(&t);
        refine_fast(&t, &p("((a,b),(c,d));")).unwrap();
        assert_eq!(serialize_newick(&t), before);
    }

    #[test]
    fn bound_formula() {
        assert_eq!(fast_leaf_update_bound(1), 1);
        assert_eq!(fast_leaf_update_bound(2), 4);
        assert_eq!(fast_leaf_update_bound(5), 20);
        assert_eq!(fast_leaf_update_bound(1024), 1024 * 11);
    }

    #[test]
    fn engine_names_round_trip() {
        for e in EngineKind::ALL {
            assert_eq!(e.name().parse::<EngineKind>().unwrap(), e);
        }
        assert!("slow".parse::<EngineKind>().is_err());
    }

    #[test]
    fn deep_caterpillar_into_star() {
        use crate::gen::{generate, GenSpec, Shape};
        let n = 20_000;
        let source = generate(&GenSpec::new(n, 0, Shape::Caterpillar)).unwrap();
        let star = crate::tree::star_tree(source.taxon_labels().map(|l| l.to_string())).unwrap();
        let start = std::time::Instant::now();
        let (out, report) = refine_fast(&star, &source).unwrap();
        assert!(start.elapsed() < std::time::Duration::from_secs(10));
        assert_eq!(report.inserted, n - 2);
        assert_eq!(report.rf_after, 0);
        assert!(!out.has_stale_depths());
        let deepest = out.leaf("t1").unwrap();
        assert_eq!(out.depth(deepest), n);
    }
}
