//! Problems of Lagrange: minimize E Σ K_t(x_t, Δx_t) over adapted x with x_{−1} = 0.

use serde::{Deserialize, Serialize};

use super::stopping::StoppingSpec;
use super::{check_node_count, exceeds, fenchel_gap};
use crate::convex::{domain_tol, ConvexFunction, Fallback};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeSpec {
    pub dim: usize,
    /// K_t per node, over (x_t, Δx_t) ∈ R^{2d}.
    pub costs: Vec<ConvexFunction>,
}

impl LagrangeSpec {
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        check_node_count(tree, &self.costs, "stage costs")?;
        for k in &self.costs {
            if k.dim() != 2 * self.dim {
                return Err(Error::Dimension { expected: 2 * self.dim, got: k.dim() });
            }
            k.validate()?;
        }
        Ok(())
    }

    fn cost(&self, tree: &ScenarioTree, leaf: usize, t: usize) -> &ConvexFunction {
        &self.costs[tree.ancestor(leaf, t)]
    }
}

/// f(x, u) = Σ K_t(x_t, Δx_t + u_t) with ū = 0.
pub fn build_lagrange(tree: &ScenarioTree, spec: &LagrangeSpec) -> Result<SPInstance> {
    spec.validate(tree)?;
    let d = spec.dim;
    let stages = tree.num_stages();
    let n = stages * d;
    let integrands = (0..tree.num_leaves())
        .map(|leaf| {
            let terms = (0..stages)
                .map(|t| {
                    let mut rows = vec![vec![0.0; 2 * n]; 2 * d];
                    for i in 0..d {
                        rows[i][t * d + i] = 1.0;
                        rows[d + i][t * d + i] = 1.0;
                        rows[d + i][n + t * d + i] = 1.0;
                        if t > 0 {
                            rows[d + i][(t - 1) * d + i] = -1.0;
                        }
                    }
                    ConvexFunction::affine_pre(rows, vec![0.0; 2 * d], spec.cost(tree, leaf, t).clone())
                })
                .collect();
            ConvexFunction::sum(terms)
        })
        .collect();
    let ubar = RandomVariable::zeros(tree, n);
    SPInstance::new(tree.clone(), vec![d; stages], integrands, ubar)
}

fn check_pair(inst: &SPInstance, spec: &LagrangeSpec) -> Result<()> {
    spec.validate(inst.tree())?;
    if inst.dims().iter().any(|&k| k != spec.dim) || inst.param_dim() != inst.path_dim() {
        return Err(Error::InvalidSpec("instance was not built from this Lagrange spec".into()));
    }
    Ok(())
}

fn check_multiplier(tree: &ScenarioTree, spec: &LagrangeSpec, y: &AdaptedProcess) -> Result<()> {
    if y.dims().len() != tree.num_stages() || y.dims().iter().any(|&k| k != spec.dim) {
        return Err(Error::Shape(format!("multiplier must have dimension {} at every stage", spec.dim)));
    }
    Ok(())
}

/// Δy_{t+1} = y_{t+1} − y_t per leaf, with y_{T+1} = 0.
fn increments(tree: &ScenarioTree, d: usize, y: &[Vec<f64>]) -> Result<LeafProcess> {
    let stages = tree.num_stages();
    let values = (0..stages)
        .map(|t| {
            (0..tree.num_leaves())
                .map(|l| {
                    (0..d)
                        .map(|i| {
                            let next = if t + 1 < stages { y[l][(t + 1) * d + i] } else { 0.0 };
                            next - y[l][t * d + i]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    LeafProcess::new(tree, vec![d; stages], values)
}

fn leaf_paths(tree: &ScenarioTree, y: &AdaptedProcess) -> Vec<Vec<f64>> {
    (0..tree.num_leaves()).map(|l| y.path(tree, l)).collect()
}

/// −E Σ K_t*(E_t Δy_{t+1}, y_t) for adapted y.
pub fn lagrange_reduced_dual_value(inst: &SPInstance, spec: &LagrangeSpec, y: &AdaptedProcess) -> Result<ExtReal> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    check_multiplier(tree, spec, y)?;
    let d = spec.dim;
    let dy = tree.adapted_projection(&increments(tree, d, &leaf_paths(tree, y))?)?;
    let mut total = ExtReal::ZERO;
    for t in 0..tree.num_stages() {
        for (k, &node) in tree.nodes_at(t).iter().enumerate() {
            let mut v = dy.value(t, k).to_vec();
            v.extend_from_slice(y.value(t, k));
            let c = spec.costs[node].conjugate_relaxed(&v, 0.0, Fallback::Allow)?.value;
            total = total + c.scale(*tree.prob(node));
        }
    }
    Ok(ExtReal::ZERO - total)
}

/// Full dual point for adapted y: p_t = E_t y_{t+1} − y_{t+1}.
pub fn lagrange_dual_from_reduced(inst: &SPInstance, spec: &LagrangeSpec, y: &AdaptedProcess) -> Result<DualPoint> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    check_multiplier(tree, spec, y)?;
    let paths = leaf_paths(tree, y);
    let p = tree.orthogonal_part(&increments(tree, spec.dim, &paths)?)?.map(|v| -v);
    Ok(DualPoint { p, y: RandomVariable::new(tree, inst.param_dim(), paths)? })
}

/// (p_t + Δy_{t+1}, y_t) ∈ ∂K_t(x_t, Δx_t) leafwise, as Fenchel residuals ≤ tol, plus E_t p_t = 0.
pub fn euler_lagrange_check(
    inst: &SPInstance,
    spec: &LagrangeSpec,
    x: &AdaptedProcess,
    d: &DualPoint,
    tol: f64,
) -> Result<bool> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    let dim = spec.dim;
    if x.dims() != inst.dims() || d.p.dims() != inst.dims() || d.y.dim() != inst.param_dim() {
        return Err(Error::Shape("pair does not match the instance".into()));
    }
    if !tree.in_orthogonal_complement(&d.p, &tol)? {
        return Ok(false);
    }
    let dy = increments(tree, dim, d.y.values())?;
    let eps = domain_tol(tol);
    for leaf in 0..tree.num_leaves() {
        let path = x.path(tree, leaf);
        for t in 0..tree.num_stages() {
            let xt = &path[t * dim..(t + 1) * dim];
            let mut point = xt.to_vec();
            point.extend((0..dim).map(|i| xt[i] - if t > 0 { path[(t - 1) * dim + i] } else { 0.0 }));
            let mut v: Vec<f64> = (0..dim).map(|i| d.p.value(t, leaf)[i] + dy.value(t, leaf)[i]).collect();
            v.extend_from_slice(&d.y.value(leaf)[t * dim..(t + 1) * dim]);
            if exceeds(fenchel_gap(spec.cost(tree, leaf, t), &point, &v, eps)?, tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// K_t(x, u) = −R_t u + δ(x ≤ 1) + δ(u ≥ 0): x_t is the mass stopped by time t.
pub fn stopping_as_lagrange(tree: &ScenarioTree, spec: &StoppingSpec) -> Result<LagrangeSpec> {
    check_node_count(tree, &spec.reward, "rewards")?;
    let costs = spec
        .reward
        .iter()
        .map(|&r| {
            ConvexFunction::sum(vec![
                ConvexFunction::affine(vec![0.0, -r], 0.0),
                ConvexFunction::polyhedron(2, vec![vec![1.0, 0.0], vec![0.0, -1.0]], vec![1.0, 0.0], vec![], vec![]),
            ])
        })
        .collect();
    Ok(LagrangeSpec { dim: 1, costs })
}
