//! Finite filtered probability spaces stored as scenario forests.
//!
//! Nodes are numbered in depth-first preorder, roots first-to-last. The
//! stage-t nodes are the atoms of F_t and the leaves are the atoms of F, so
//! every node owns a contiguous range of leaves.

mod calculus;
mod process;

pub use process::{AdaptedProcess, LeafProcess, RandomVariable, Trajectory};

use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree<F: Scalar = f64> {
    parent: Vec<Option<usize>>,
    stage: Vec<usize>,
    prob: Vec<F>,
    children: Vec<Vec<usize>>,
    horizon: usize,
    stage_nodes: Vec<Vec<usize>>,
    index_in_stage: Vec<usize>,
    leaves: Vec<usize>,
    leaf_range: Vec<Range<usize>>,
    // ancestors[leaf][t] = node at stage t on the path to `leaf`
    ancestors: Vec<Vec<usize>>,
}

impl<F: Scalar> ScenarioTree<F> {
    /// Builds a tree from parent links and unconditional node probabilities.
    ///
    /// Nodes must already be listed in depth-first preorder.
    pub fn new(parent: Vec<Option<usize>>, prob: Vec<F>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidTree("tree has no nodes".into()));
        }
        if prob.len() != n {
            return Err(Error::InvalidTree(format!(
                "{} probabilities for {} nodes",
                prob.len(),
                n
            )));
        }
        let mut children = vec![Vec::new(); n];
        let mut stage = vec![0usize; n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= i {
                    return Err(Error::InvalidTree(format!(
                        "node {i} has parent {p}; parents must precede children"
                    )));
                }
                children[p].push(i);
                stage[i] = stage[p] + 1;
            }
        }
        // Preorder check: a DFS visiting children in id order must reproduce 0..n.
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).rev().collect();
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(children[v].iter().rev().copied());
        }
        if order.iter().copied().ne(0..n) {
            return Err(Error::InvalidTree("nodes are not in depth-first preorder".into()));
        }

        let leaves: Vec<usize> = (0..n).filter(|&i| children[i].is_empty()).collect();
        let horizon = stage[leaves[0]];
        if let Some(&bad) = leaves.iter().find(|&&l| stage[l] != horizon) {
            return Err(Error::InvalidTree(format!(
                "leaf {bad} sits at stage {} but the horizon is {horizon}",
                stage[bad]
            )));
        }

        let tol = F::structural_tol();
        for (i, p) in prob.iter().enumerate() {
            if *p <= F::zero() {
                return Err(Error::InvalidTree(format!("node {i} has nonpositive probability")));
            }
            if !children[i].is_empty() {
                let total = children[i]
                    .iter()
                    .fold(F::zero(), |acc, &c| acc + prob[c].clone());
                if (total - p.clone()).abs() > tol {
                    return Err(Error::InvalidTree(format!(
                        "children of node {i} do not sum to its probability"
                    )));
                }
            }
        }
        let root_total = (0..n)
            .filter(|&i| parent[i].is_none())
            .fold(F::zero(), |acc, i| acc + prob[i].clone());
        if (root_total - F::one()).abs() > tol {
            return Err(Error::InvalidTree("stage-0 probabilities do not sum to 1".into()));
        }

        let mut stage_nodes = vec![Vec::new(); horizon + 1];
        let mut index_in_stage = vec![0; n];
        for i in 0..n {
            index_in_stage[i] = stage_nodes[stage[i]].len();
            stage_nodes[stage[i]].push(i);
        }

        let mut leaf_range = vec![0..0; n];
        for i in (0..n).rev() {
            leaf_range[i] = if children[i].is_empty() {
                let k = index_in_stage[i];
                k..k + 1
            } else {
                let first = leaf_range[children[i][0]].start;
                let last = leaf_range[*children[i].last().unwrap()].end;
                first..last
            };
        }

        let ancestors = leaves
            .iter()
            .map(|&leaf| {
                let mut path = vec![0; horizon + 1];
                let mut v = leaf;
                loop {
                    path[stage[v]] = v;
                    match parent[v] {
                        Some(p) => v = p,
                        None => break,
                    }
                }
                path
            })
            .collect();

        Ok(ScenarioTree {
            parent,
            stage,
            prob,
            children,
            horizon,
            stage_nodes,
            index_in_stage,
            leaves,
            leaf_range,
            ancestors,
        })
    }

    /// Single-root tree where every stage-t node has `branching[t]` equally likely children.
    pub fn uniform(branching: &[usize]) -> Self {
        let mut parent = vec![None];
        let mut prob = vec![F::one()];
        fn grow<F: Scalar>(
            node: usize,
            depth: usize,
            branching: &[usize],
            parent: &mut Vec<Option<usize>>,
            prob: &mut Vec<F>,
        ) {
            if depth == branching.len() {
                return;
            }
            let k = branching[depth];
            let p = prob[node].clone() / F::from_count(k);
            for _ in 0..k {
                let id = parent.len();
                parent.push(Some(node));
                prob.push(p.clone());
                grow(id, depth + 1, branching, parent, prob);
            }
        }
        assert!(branching.iter().all(|&b| b > 0), "branching factors must be positive");
        grow(0, 0, branching, &mut parent, &mut prob);
        ScenarioTree::new(parent, prob).expect("uniform tree is valid")
    }

    /// Tree with a single node: the deterministic case with horizon 0.
    pub fn deterministic() -> Self {
        ScenarioTree::uniform(&[])
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_stages(&self) -> usize {
        self.horizon + 1
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn stage(&self, node: usize) -> usize {
        self.stage[node]
    }

    pub fn prob(&self, node: usize) -> &F {
        &self.prob[node]
    }

    pub fn probs(&self) -> &[F] {
        &self.prob
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn nodes_at(&self, t: usize) -> &[usize] {
        &self.stage_nodes[t]
    }

    /// Position of `node` among the nodes of its stage.
    pub fn index_in_stage(&self, node: usize) -> usize {
        self.index_in_stage[node]
    }

    /// Leaf node ids, indexed by leaf number.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_prob(&self, leaf: usize) -> &F {
        &self.prob[self.leaves[leaf]]
    }

    /// Leaf numbers below `node`.
    pub fn leaf_range(&self, node: usize) -> Range<usize> {
        self.leaf_range[node].clone()
    }

    /// Node at stage `t` on the path to leaf number `leaf`.
    pub fn ancestor(&self, leaf: usize, t: usize) -> usize {
        self.ancestors[leaf][t]
    }

    /// Stage-`t` atom (as index within the stage) containing leaf number `leaf`.
    pub fn atom_of(&self, leaf: usize, t: usize) -> usize {
        self.index_in_stage[self.ancestors[leaf][t]]
    }

    pub(crate) fn check_stage(&self, t: usize) -> Result<()> {
        if t > self.horizon {
            Err(Error::StageOutOfRange { stage: t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    pub fn map_probs<G: Scalar>(&self, f: impl Fn(&F) -> G) -> ScenarioTree<G> {
        ScenarioTree {
            parent: self.parent.clone(),
            stage: self.stage.clone(),
            prob: self.prob.iter().map(f).collect(),
            children: self.children.clone(),
            horizon: self.horizon,
            stage_nodes: self.stage_nodes.clone(),
            index_in_stage: self.index_in_stage.clone(),
            leaves: self.leaves.clone(),
            leaf_range: self.leaf_range.clone(),
            ancestors: self.ancestors.clone(),
        }
    }

    pub fn to_f64(&self) -> ScenarioTree<f64> {
        self.map_probs(|p| p.to_float())
    }

    /// Prepends a single root with probability one above the current stage-0 nodes.
    pub fn with_trivial_root(&self) -> ScenarioTree<F> {
        let mut parent = Vec::with_capacity(self.num_nodes() + 1);
        parent.push(None);
        parent.extend(self.parent.iter().map(|p| Some(p.map_or(0, |q| q + 1))));
        let mut prob = vec![F::one()];
        prob.extend(self.prob.iter().cloned());
        let mut tree = ScenarioTree::new(parent, prob).expect("prepending a root keeps validity");
        // The root's probability is exactly the sum of the old roots up to rounding.
        tree.prob[0] = F::one();
        tree
    }
}
