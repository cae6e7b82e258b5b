//! Seeded random tree generation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TreeError};
use crate::tree::{NodeId, TaxonLabel, Tree, TreeBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Repeatedly split a uniformly chosen leaf.
    Yule,
    /// Uniform over labeled rooted binary trees (random edge insertion).
    Uniform,
    /// `(((t1,t2),t3),...)`.
    Caterpillar,
    /// Recursive halving of `t1..tN`.
    Balanced,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Yule, Shape::Uniform, Shape::Caterpillar, Shape::Balanced];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Yule => "yule",
            Shape::Uniform => "uniform",
            Shape::Caterpillar => "caterpillar",
            Shape::Balanced => "balanced",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| format!("unknown shape `{s}` (expected yule, uniform, caterpillar or balanced)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub leaves: usize,
    pub seed: u64,
    pub shape: Shape,
    /// Probability of contracting each internal non-root edge.
    pub contraction_prob: f64,
}

impl GenSpec {
    pub fn new(leaves: usize, seed: u64, shape: Shape) -> Self {
        GenSpec {
            leaves,
            seed,
            shape,
            contraction_prob: 0.0,
        }
    }

    pub fn with_contraction(mut self, prob: f64) -> Self {
        self.contraction_prob = prob;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.leaves == 0 {
            return Err(TreeError::InvalidSpec("at least one leaf is required".into()));
        }
        if !(0.0..=1.0).contains(&self.contraction_prob) {
            return Err(TreeError::InvalidSpec(format!(
                "contraction probability {} is outside [0, 1]",
                self.contraction_prob
            )));
        }
        Ok(())
    }
}

/// Generates the tree described by `spec`; labels are `t1..tN`.
pub fn generate(spec: &GenSpec) -> Result<Tree> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shuffle = spec.shape == Shape::Yule;
    generate_with(spec.leaves, spec.shape, spec.contraction_prob, shuffle, &mut rng)
}

/// Like [`generate`] but drawing from a caller-owned generator. With
/// `shuffle_labels`, labels are assigned to leaves by a random permutation,
/// which also randomizes the fixed caterpillar and balanced layouts.
pub fn generate_with<R: Rng>(
    leaves: usize,
    shape: Shape,
    contraction_prob: f64,
    shuffle_labels: bool,
    rng: &mut R,
) -> Result<Tree> {
    if leaves == 0 {
        return Err(TreeError::InvalidSpec("at least one leaf is required".into()));
    }
    let mut topo = match shape {
        Shape::Yule => Topology::yule(leaves, rng),
        Shape::Uniform => Topology::uniform(leaves, rng),
        Shape::Caterpillar => Topology::caterpillar(leaves),
        Shape::Balanced => Topology::balanced(leaves),
    };
    if shuffle_labels {
        topo.leaf_labels.shuffle(rng);
    }
    topo.build(contraction_prob, rng)
}

/// Plain parent/children arena used while shaping a tree.
struct Topology {
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    root: usize,
    /// Label index per node; meaningful for leaves only.
    leaf_of: Vec<usize>,
    leaf_labels: Vec<usize>,
}

impl Topology {
    fn with_root_leaf(leaves: usize) -> Self {
        Topology {
            children: vec![Vec::new()],
            parent: vec![None],
            root: 0,
            leaf_of: vec![0],
            leaf_labels: (0..leaves).collect(),
        }
    }

    fn push(&mut self, leaf: usize) -> usize {
        self.children.push(Vec::new());
        self.parent.push(None);
        self.leaf_of.push(leaf);
        self.children.len() - 1
    }

    fn yule<R: Rng>(leaves: usize, rng: &mut R) -> Self {
        let mut topo = Self::with_root_leaf(leaves);
        let mut tips = vec![0usize];
        for k in 1..leaves {
            let slot = rng.gen_range(0..tips.len());
            let split = tips[slot];
            let left = topo.push(topo.leaf_of[split]);
            let right = topo.push(k);
            topo.children[split] = vec![left, right];
            topo.parent[left] = Some(split);
            topo.parent[right] = Some(split);
            tips[slot] = left;
            tips.push(right);
        }
        topo
    }

    fn uniform<R: Rng>(leaves: usize, rng: &mut R) -> Self {
        let mut topo = Self::with_root_leaf(leaves);
        for k in 1..leaves {
            // Each existing node stands for the edge above it.
            let below = rng.gen_range(0..topo.children.len());
            let joint = topo.push(usize::MAX);
            let leaf = topo.push(k);
            match topo.parent[below] {
                Some(p) => {
                    let pos = topo.children[p].iter().position(|&c| c == below).expect("child");
                    topo.children[p][pos] = joint;
                    topo.parent[joint] = Some(p);
                }
                None => topo.root = joint,
            }
            let pair = if rng.gen_bool(0.5) { vec![below, leaf] } else { vec![leaf, below] };
            topo.children[joint] = pair;
            topo.parent[below] = Some(joint);
            topo.parent[leaf] = Some(joint);
        }
        topo
    }

    fn caterpillar(leaves: usize) -> Self {
        let mut topo = Self::with_root_leaf(leaves);
        for k in 1..leaves {
            let leaf = topo.push(k);
            let joint = topo.push(usize::MAX);
            topo.children[joint] = vec![topo.root, leaf];
            topo.parent[topo.root] = Some(joint);
            topo.parent[leaf] = Some(joint);
            topo.root = joint;
        }
        topo
    }

    fn balanced(leaves: usize) -> Self {
        let mut topo = Topology {
            children: Vec::new(),
            parent: Vec::new(),
            root: 0,
            leaf_of: Vec::new(),
            leaf_labels: (0..leaves).collect(),
        };
        // Ranges are split with the larger half on the left.
        let mut stack = vec![(0usize, leaves, None::<usize>)];
        while let Some((lo, hi, parent)) = stack.pop() {
            let id = topo.push(if hi - lo == 1 { lo } else { usize::MAX });
            topo.parent[id] = parent;
            match parent {
                Some(p) => topo.children[p].push(id),
                None => topo.root = id,
            }
            if hi - lo > 1 {
                let mid = lo + (hi - lo).div_ceil(2);
                stack.push((mid, hi, Some(id)));
                stack.push((lo, mid, Some(id)));
            }
        }
        topo
    }

    fn build<R: Rng>(&self, contraction_prob: f64, rng: &mut R) -> Result<Tree> {
        // Contraction coins are drawn in pre-order so results are seed-stable.
        let mut contract = vec![false; self.children.len()];
        if contraction_prob > 0.0 {
            let mut stack = vec![self.root];
            while let Some(v) = stack.pop() {
                if v != self.root && !self.children[v].is_empty() {
                    contract[v] = rng.gen_bool(contraction_prob);
                }
                stack.extend(self.children[v].iter().rev());
            }
        }

        let mut builder = TreeBuilder::new();
        // Nodes emitted by each finished topology node, for its parent.
        let mut emitted: Vec<Vec<NodeId>> = vec![Vec::new(); self.children.len()];
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if self.children[v].is_empty() {
                let label = TaxonLabel::new(format!("t{}", self.leaf_labels[self.leaf_of[v]] + 1))?;
                emitted[v] = vec![builder.add_leaf(label)?];
                continue;
            }
            if !expanded {
                stack.push((v, true));
                stack.extend(self.children[v].iter().rev().map(|&c| (c, false)));
                continue;
            }
            let mut kids = Vec::new();
            for &c in &self.children[v] {
                kids.append(&mut emitted[c]);
            }
            emitted[v] = if contract[v] { kids } else { vec![builder.add_internal(&kids)?] };
        }
        let root = emitted[self.root][0];
        builder.finish(root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::{serialize_newick, serialize_newick_canonical};

    fn gen(n: usize, seed: u64, shape: Shape, p: f64) -> Tree {
        generate(&GenSpec::new(n, seed, shape).with_contraction(p)).unwrap()
    }

    #[test]
    fn single_leaf() {
        for shape in Shape::ALL {
            assert_eq!(serialize_newick(&gen(1, 3, shape, 0.5)), "t1;");
        }
    }

    #[test]
    fn caterpillar_and_balanced_layouts() {
        assert_eq!(
            serialize_newick_canonical(&gen(4, 0, Shape::Caterpillar, 0.0)),
            "(((t1,t2),t3),t4);"
        );
        assert_eq!(
            serialize_newick(&gen(4, 0, Shape::Balanced, 0.0)),
            "((t1,t2),(t3,t4));"
        );
        assert_eq!(
            serialize_newick(&gen(5, 0, Shape::Balanced, 0.0)),
            "(((t1,t2),t3),(t4,t5));"
        );
    }

    #[test]
    fn deterministic_per_seed() {
        for shape in Shape::ALL {
            let a = serialize_newick(&gen(40, 11, shape, 0.3));
            let b = serialize_newick(&gen(40, 11, shape, 0.3));
            assert_eq!(a, b);
        }
        assert_ne!(
            serialize_newick(&gen(40, 11, Shape::Yule, 0.0)),
            serialize_newick(&gen(40, 12, Shape::Yule, 0.0))
        );
    }

    #[test]
    fn binary_without_contraction() {
        for shape in Shape::ALL {
            for seed in 0..5 {
                let t = gen(33, seed, shape, 0.0);
                t.validate().unwrap();
                assert_eq!(t.leaf_count(), 33);
                assert!(t.node_ids().all(|v| t.is_leaf(v) || t.degree(v) == 2));
            }
        }
    }

    #[test]
    fn full_contraction_gives_a_star() {
        let t = gen(20, 5, Shape::Yule, 1.0);
        t.validate().unwrap();
        assert_eq!(t.node_count(), 21);
    }

    #[test]
    fn partial_contraction_stays_valid() {
        for seed in 0..20 {
            let t = gen(50, seed, Shape::Uniform, 0.5);
            t.validate().unwrap();
            assert_eq!(t.leaf_count(), 50);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GenSpec::new(0, 1, Shape::Yule)).is_err());
        assert!(generate(&GenSpec::new(3, 1, Shape::Yule).with_contraction(1.5)).is_err());
        assert!(generate(&GenSpec::new(3, 1, Shape::Yule).with_contraction(f64::NAN)).is_err());
        assert!("bushy".parse::<Shape>().is_err());
    }
}
