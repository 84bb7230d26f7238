use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ScenarioTree;

fn shape(msg: String) -> Error {
    Error::Shape(msg)
}

/// An R^m-valued F-measurable random variable: one vector per leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable<F: Scalar = f64> {
    dim: usize,
    values: Vec<Vec<F>>,
}

impl<F: Scalar> RandomVariable<F> {
    pub fn new(tree: &ScenarioTree<F>, dim: usize, values: Vec<Vec<F>>) -> Result<Self> {
        if values.len() != tree.num_leaves() {
            return Err(shape(format!(
                "random variable has {} entries for {} leaves",
                values.len(),
                tree.num_leaves()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.len() != dim) {
            return Err(shape(format!("leaf value of length {} in dimension {dim}", v.len())));
        }
        Ok(RandomVariable { dim, values })
    }

    /// Scalar random variable from one number per leaf.
    pub fn scalar(tree: &ScenarioTree<F>, values: Vec<F>) -> Result<Self> {
        RandomVariable::new(tree, 1, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn zeros(tree: &ScenarioTree<F>, dim: usize) -> Self {
        RandomVariable { dim, values: vec![vec![F::zero(); dim]; tree.num_leaves()] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_leaves(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, leaf: usize) -> &[F] {
        &self.values[leaf]
    }

    pub fn values(&self) -> &[Vec<F>] {
        &self.values
    }

    /// First component at every leaf.
    pub fn scalars(&self) -> Vec<F> {
        self.values.iter().map(|v| v[0].clone()).collect()
    }

    pub fn map(&self, f: impl Fn(&F) -> F) -> Self {
        RandomVariable {
            dim: self.dim,
            values: self.values.iter().map(|v| v.iter().map(&f).collect()).collect(),
        }
    }
}

/// Node-indexed process: `values[t][k]` belongs to the k-th node of stage t.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess<F: Scalar = f64> {
    dims: Vec<usize>,
    values: Vec<Vec<Vec<F>>>,
}

impl<F: Scalar> AdaptedProcess<F> {
    pub fn new(tree: &ScenarioTree<F>, dims: Vec<usize>, values: Vec<Vec<Vec<F>>>) -> Result<Self> {
        if dims.len() != tree.num_stages() || values.len() != tree.num_stages() {
            return Err(shape(format!(
                "adapted process has {} stages, tree has {}",
                values.len(),
                tree.num_stages()
            )));
        }
        for (t, stage) in values.iter().enumerate() {
            if stage.len() != tree.nodes_at(t).len() {
                return Err(shape(format!(
                    "stage {t} has {} entries for {} nodes",
                    stage.len(),
                    tree.nodes_at(t).len()
                )));
            }
            if stage.iter().any(|v| v.len() != dims[t]) {
                return Err(shape(format!("stage {t} values do not have dimension {}", dims[t])));
            }
        }
        Ok(AdaptedProcess { dims, values })
    }

    pub fn zeros(tree: &ScenarioTree<F>, dims: Vec<usize>) -> Self {
        let values = (0..tree.num_stages())
            .map(|t| vec![vec![F::zero(); dims[t]]; tree.nodes_at(t).len()])
            .collect();
        AdaptedProcess { dims, values }
    }

    /// Scalar process from one number per node, indexed by node id.
    pub fn from_node_scalars(tree: &ScenarioTree<F>, by_node: &[F]) -> Result<Self> {
        if by_node.len() != tree.num_nodes() {
            return Err(shape(format!(
                "{} node values for {} nodes",
                by_node.len(),
                tree.num_nodes()
            )));
        }
        let values = (0..tree.num_stages())
            .map(|t| tree.nodes_at(t).iter().map(|&n| vec![by_node[n].clone()]).collect())
            .collect();
        Ok(AdaptedProcess { dims: vec![1; tree.num_stages()], values })
    }

    /// Process from one vector per node, indexed by node id.
    pub fn from_node_vectors(
        tree: &ScenarioTree<F>,
        dims: Vec<usize>,
        by_node: &[Vec<F>],
    ) -> Result<Self> {
        if by_node.len() != tree.num_nodes() {
            return Err(shape(format!(
                "{} node values for {} nodes",
                by_node.len(),
                tree.num_nodes()
            )));
        }
        let values = (0..tree.num_stages())
            .map(|t| tree.nodes_at(t).iter().map(|&n| by_node[n].clone()).collect())
            .collect();
        AdaptedProcess::new(tree, dims, values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn value(&self, t: usize, k: usize) -> &[F] {
        &self.values[t][k]
    }

    pub fn node_value(&self, tree: &ScenarioTree<F>, node: usize) -> &[F] {
        &self.values[tree.stage(node)][tree.index_in_stage(node)]
    }

    pub fn stage_values(&self, t: usize) -> &[Vec<F>] {
        &self.values[t]
    }

    pub fn values(&self) -> &[Vec<Vec<F>>] {
        &self.values
    }

    /// Concatenated trajectory (x_0, ..., x_T) along the path to `leaf`.
    pub fn path(&self, tree: &ScenarioTree<F>, leaf: usize) -> Vec<F> {
        (0..tree.num_stages())
            .flat_map(|t| self.values[t][tree.atom_of(leaf, t)].iter().cloned())
            .collect()
    }

    /// The same process viewed leafwise.
    pub fn to_leaf_process(&self, tree: &ScenarioTree<F>) -> LeafProcess<F> {
        let values = (0..tree.num_stages())
            .map(|t| {
                (0..tree.num_leaves())
                    .map(|l| self.values[t][tree.atom_of(l, t)].clone())
                    .collect()
            })
            .collect();
        LeafProcess { dims: self.dims.clone(), values }
    }

    /// Stage-t component as a random variable.
    pub fn stage_variable(&self, tree: &ScenarioTree<F>, t: usize) -> RandomVariable<F> {
        RandomVariable {
            dim: self.dims[t],
            values: (0..tree.num_leaves())
                .map(|l| self.values[t][tree.atom_of(l, t)].clone())
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&F) -> F) -> Self {
        AdaptedProcess {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|v| v.iter().map(&f).collect()).collect())
                .collect(),
        }
    }
}

/// Leaf-indexed process: `values[t][leaf]`. Holds non-adapted trajectories and shadow prices.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafProcess<F: Scalar = f64> {
    dims: Vec<usize>,
    values: Vec<Vec<Vec<F>>>,
}

impl<F: Scalar> LeafProcess<F> {
    pub fn new(tree: &ScenarioTree<F>, dims: Vec<usize>, values: Vec<Vec<Vec<F>>>) -> Result<Self> {
        if dims.len() != tree.num_stages() || values.len() != tree.num_stages() {
            return Err(shape(format!(
                "leaf process has {} stages, tree has {}",
                values.len(),
                tree.num_stages()
            )));
        }
        for (t, stage) in values.iter().enumerate() {
            if stage.len() != tree.num_leaves() {
                return Err(shape(format!(
                    "stage {t} has {} entries for {} leaves",
                    stage.len(),
                    tree.num_leaves()
                )));
            }
            if stage.iter().any(|v| v.len() != dims[t]) {
                return Err(shape(format!("stage {t} values do not have dimension {}", dims[t])));
            }
        }
        Ok(LeafProcess { dims, values })
    }

    pub fn zeros(tree: &ScenarioTree<F>, dims: Vec<usize>) -> Self {
        let values = dims
            .iter()
            .map(|&d| vec![vec![F::zero(); d]; tree.num_leaves()])
            .collect();
        LeafProcess { dims, values }
    }

    /// Builds a process from concatenated per-leaf trajectories.
    pub fn from_paths(tree: &ScenarioTree<F>, dims: Vec<usize>, paths: &[Vec<F>]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if paths.len() != tree.num_leaves() || paths.iter().any(|p| p.len() != total) {
            return Err(shape(format!("expected {} paths of length {total}", tree.num_leaves())));
        }
        let mut values = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &d in &dims {
            values.push(paths.iter().map(|p| p[offset..offset + d].to_vec()).collect());
            offset += d;
        }
        LeafProcess::new(tree, dims, values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn value(&self, t: usize, leaf: usize) -> &[F] {
        &self.values[t][leaf]
    }

    pub fn values(&self) -> &[Vec<Vec<F>>] {
        &self.values
    }

    pub fn path(&self, leaf: usize) -> Vec<F> {
        self.values.iter().flat_map(|s| s[leaf].iter().cloned()).collect()
    }

    pub fn stage_variable(&self, t: usize) -> RandomVariable<F> {
        RandomVariable { dim: self.dims[t], values: self.values[t].clone() }
    }

    pub fn map(&self, f: impl Fn(&F) -> F) -> Self {
        LeafProcess {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|v| v.iter().map(&f).collect()).collect())
                .collect(),
        }
    }

    /// Componentwise `self + factor * other`.
    pub fn axpy(&self, factor: F, other: &LeafProcess<F>) -> Result<Self> {
        if self.dims != other.dims {
            return Err(shape("leaf processes have different dimensions".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(u, v)| {
                        u.iter().zip(v).map(|(p, q)| p.clone() + factor.clone() * q.clone()).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(LeafProcess { dims: self.dims.clone(), values })
    }
}

/// Anything that has a value at every (stage, leaf): adapted or not.
pub trait Trajectory<F: Scalar> {
    fn dims(&self) -> &[usize];
    fn at_leaf(&self, tree: &ScenarioTree<F>, t: usize, leaf: usize) -> &[F];
}

impl<F: Scalar> Trajectory<F> for AdaptedProcess<F> {
    fn dims(&self) -> &[usize] {
        &self.dims
    }
    fn at_leaf(&self, tree: &ScenarioTree<F>, t: usize, leaf: usize) -> &[F] {
        &self.values[t][tree.atom_of(leaf, t)]
    }
}

impl<F: Scalar> Trajectory<F> for LeafProcess<F> {
    fn dims(&self) -> &[usize] {
        &self.dims
    }
    fn at_leaf(&self, _tree: &ScenarioTree<F>, t: usize, leaf: usize) -> &[F] {
        &self.values[t][leaf]
    }
}
