//! Optimal stopping through its convex relaxation over randomized stopping times.

use serde::{Deserialize, Serialize};

use super::check_node_count;
use crate::convex::ConvexFunction;
use crate::error::{Error, Result};
use crate::problem::{DualPoint, SPInstance};
use crate::scalar::Scalar;
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSpec {
    /// R per node.
    pub reward: Vec<f64>,
}

impl StoppingSpec {
    pub fn reward_process(&self, tree: &ScenarioTree) -> Result<AdaptedProcess> {
        check_node_count(tree, &self.reward, "rewards")?;
        AdaptedProcess::from_node_scalars(tree, &self.reward)
    }
}

/// Minimizes E[−Σ R_t x_t] over adapted x ≥ 0 with Σ x_t + u ≤ 0 at ū = −1,
/// so the optimal value is −sup E R_τ.
pub fn build_stopping(tree: &ScenarioTree, spec: &StoppingSpec) -> Result<SPInstance> {
    let r = spec.reward_process(tree)?;
    let k = tree.num_stages();
    let mut ineq: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let mut row = vec![0.0; k + 1];
            row[t] = -1.0;
            row
        })
        .collect();
    ineq.push(vec![1.0; k + 1]);
    let feasible = ConvexFunction::polyhedron(k + 1, ineq, vec![0.0; k + 1], vec![], vec![]);
    let integrands = (0..tree.num_leaves())
        .map(|leaf| {
            let mut slope: Vec<f64> = r.path(tree, leaf).iter().map(|v| -v).collect();
            slope.push(0.0);
            ConvexFunction::sum(vec![ConvexFunction::affine(slope, 0.0), feasible.clone()])
        })
        .collect();
    let ubar = RandomVariable::scalar(tree, vec![-1.0; tree.num_leaves()])?;
    SPInstance::new(tree.clone(), vec![1; k], integrands, ubar)
}

/// S_T = max(R_T, 0), S_t = max(R_t, E_t S_{t+1}).
pub fn snell_envelope<F: Scalar>(tree: &ScenarioTree<F>, reward: &AdaptedProcess<F>) -> Result<AdaptedProcess<F>> {
    if reward.dims().iter().any(|&d| d != 1) {
        return Err(Error::Shape("the reward must be scalar".into()));
    }
    let max = |a: F, b: F| if b > a { b } else { a };
    let mut s = vec![F::zero(); tree.num_nodes()];
    // children follow their parent in preorder
    for node in (0..tree.num_nodes()).rev() {
        let r = reward.node_value(tree, node)[0].clone();
        let children = tree.children(node);
        let cont = if children.is_empty() {
            F::zero()
        } else {
            let acc = children.iter().fold(F::zero(), |acc, &c| acc + tree.prob(c).clone() * s[c].clone());
            acc / tree.prob(node).clone()
        };
        s[node] = max(r, cont);
    }
    AdaptedProcess::from_node_scalars(tree, &s)
}

/// A stopping time as node flags: τ is the stage of the first flagged node on
/// the path, or T + 1 when none is flagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingTime {
    stop: Vec<bool>,
}

impl StoppingTime {
    pub fn from_node_flags<F: Scalar>(tree: &ScenarioTree<F>, stop: Vec<bool>) -> Result<StoppingTime> {
        if stop.len() != tree.num_nodes() {
            return Err(Error::Shape(format!("{} flags for {} nodes", stop.len(), tree.num_nodes())));
        }
        Ok(StoppingTime { stop })
    }

    pub fn never<F: Scalar>(tree: &ScenarioTree<F>) -> StoppingTime {
        StoppingTime { stop: vec![false; tree.num_nodes()] }
    }

    pub fn constant<F: Scalar>(tree: &ScenarioTree<F>, t: usize) -> StoppingTime {
        StoppingTime { stop: (0..tree.num_nodes()).map(|n| tree.stage(n) == t).collect() }
    }

    /// From one value in {0, …, T + 1} per leaf; fails unless {τ ≤ t} ∈ F_t.
    pub fn from_leaf_times<F: Scalar>(tree: &ScenarioTree<F>, times: &[usize]) -> Result<StoppingTime> {
        if times.len() != tree.num_leaves() {
            return Err(Error::Shape(format!("{} times for {} leaves", times.len(), tree.num_leaves())));
        }
        if let Some(&bad) = times.iter().find(|&&t| t > tree.num_stages()) {
            return Err(Error::NonAdapted(format!("time {bad} exceeds T + 1")));
        }
        let mut stop = vec![false; tree.num_nodes()];
        for (node, flag) in stop.iter_mut().enumerate() {
            let t = tree.stage(node);
            let range = tree.leaf_range(node);
            let stopped = times[range.clone()].iter().filter(|&&s| s <= t).count();
            if stopped != 0 && stopped != range.len() {
                return Err(Error::NonAdapted(format!("{{τ ≤ {t}}} splits the atom of node {node}")));
            }
            *flag = times[range].iter().all(|&s| s == t);
        }
        Ok(StoppingTime { stop })
    }

    pub fn flags(&self) -> &[bool] {
        &self.stop
    }

    pub fn time<F: Scalar>(&self, tree: &ScenarioTree<F>, leaf: usize) -> usize {
        (0..tree.num_stages()).find(|&t| self.stop[tree.ancestor(leaf, t)]).unwrap_or(tree.num_stages())
    }

    /// x_t = 1 at t = τ and 0 elsewhere.
    pub fn indicator<F: Scalar>(&self, tree: &ScenarioTree<F>) -> AdaptedProcess<F> {
        let by_node: Vec<F> = (0..tree.num_nodes())
            .map(|n| {
                let first = self.stop[n]
                    && std::iter::successors(tree.parent(n), |&a| tree.parent(a)).all(|a| !self.stop[a]);
                if first {
                    F::one()
                } else {
                    F::zero()
                }
            })
            .collect();
        AdaptedProcess::from_node_scalars(tree, &by_node).expect("one value per node")
    }

    /// E R_τ with R_{T+1} = 0.
    pub fn expected_reward<F: Scalar>(&self, tree: &ScenarioTree<F>, reward: &AdaptedProcess<F>) -> F {
        (0..tree.num_leaves()).fold(F::zero(), |acc, leaf| {
            let t = self.time(tree, leaf);
            if t < tree.num_stages() {
                acc + tree.leaf_prob(leaf).clone() * reward.value(t, tree.atom_of(leaf, t))[0].clone()
            } else {
                acc
            }
        })
    }
}

/// Dual point from the Snell envelope S = M − A: y = M_T and p_t = y − M_t.
pub fn stopping_dual_from_snell(tree: &ScenarioTree, reward: &AdaptedProcess) -> Result<DualPoint> {
    let s = snell_envelope(tree, reward)?;
    let (m, _) = tree.doob_decomposition(&s)?;
    let last = tree.horizon();
    let y: Vec<f64> = (0..tree.num_leaves()).map(|l| m.value(last, tree.atom_of(l, last))[0]).collect();
    let values = (0..tree.num_stages())
        .map(|t| (0..tree.num_leaves()).map(|l| vec![y[l] - m.value(t, tree.atom_of(l, t))[0]]).collect())
        .collect();
    Ok(DualPoint {
        p: LeafProcess::new(tree, vec![1; tree.num_stages()], values)?,
        y: RandomVariable::scalar(tree, y)?,
    })
}

/// Checks E_t p_t = 0, y ≥ 0, p_t + R_t ≤ y for all t, p_τ + R_τ = y where
/// τ ≤ T, and y = 0 where the rule never stops.
pub fn stopping_certificate_check(
    tree: &ScenarioTree,
    reward: &AdaptedProcess,
    tau: &StoppingTime,
    d: &DualPoint,
    tol: f64,
) -> Result<bool> {
    if tau.flags().len() != tree.num_nodes() {
        return Err(Error::NonAdapted("stopping time belongs to another tree".into()));
    }
    if d.p.dims().iter().any(|&k| k != 1) || d.y.dim() != 1 {
        return Err(Error::Shape("stopping duals are scalar".into()));
    }
    if !tree.in_orthogonal_complement(&d.p, &tol)? {
        return Ok(false);
    }
    for leaf in 0..tree.num_leaves() {
        let y = d.y.value(leaf)[0];
        if y < -tol {
            return Ok(false);
        }
        let slack = |t: usize| d.p.value(t, leaf)[0] + reward.value(t, tree.atom_of(leaf, t))[0] - y;
        if (0..tree.num_stages()).any(|t| slack(t) > tol) {
            return Ok(false);
        }
        let tl = tau.time(tree, leaf);
        let tight = if tl < tree.num_stages() { slack(tl).abs() } else { y.abs() };
        if tight > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
