//! Stochastic optimal control: ΔX_t = A_t X_{t−1} + B_t U_{t−1} + W_t with stage costs L_t(X_t, U_t).

use serde::{Deserialize, Serialize};

use super::{check_node_count, embed, exceeds, fenchel_gap};
use crate::convex::{domain_tol, ConvexFunction, Fallback, Rows};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub state_dim: usize,
    pub control_dim: usize,
    /// A_t per node (N × N). Root entries are ignored and may be empty.
    pub a: Vec<Rows>,
    /// B_t per node (N × M). Root entries are ignored and may be empty.
    pub b: Vec<Rows>,
    /// W_t per node. Root entries are ignored and may be empty.
    pub w: Vec<Vec<f64>>,
    /// L_t per node, over (X_t, U_t).
    pub costs: Vec<ConvexFunction>,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

fn check_matrix(m: &Rows, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape(format!("{what} must be {rows} × {cols}")));
    }
    Ok(())
}

impl ControlSpec {
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        let (n, m) = (self.state_dim, self.control_dim);
        check_node_count(tree, &self.a, "A matrices")?;
        check_node_count(tree, &self.b, "B matrices")?;
        check_node_count(tree, &self.w, "noise vectors")?;
        check_node_count(tree, &self.costs, "stage costs")?;
        for node in 0..tree.num_nodes() {
            let root = tree.stage(node) == 0;
            let skip = |len: usize| root && len == 0;
            if !skip(self.a[node].len()) {
                check_matrix(&self.a[node], n, n, "A")?;
            }
            if !skip(self.b[node].len()) {
                check_matrix(&self.b[node], n, m, "B")?;
            }
            if !skip(self.w[node].len()) && self.w[node].len() != n {
                return Err(Error::Dimension { expected: n, got: self.w[node].len() });
            }
            if self.costs[node].dim() != n + m {
                return Err(Error::Dimension { expected: n + m, got: self.costs[node].dim() });
            }
            self.costs[node].validate()?;
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != n {
                return Err(Error::Dimension { expected: n, got: x0.len() });
            }
        }
        Ok(())
    }

    /// L_t at a node, with the pin X_0 = x̄ folded in at the root.
    fn stage_cost(&self, tree: &ScenarioTree, node: usize) -> ConvexFunction {
        let cost = self.costs[node].clone();
        match &self.initial_state {
            Some(x0) if tree.stage(node) == 0 => {
                let (n, m) = (self.state_dim, self.control_dim);
                let pin = ConvexFunction::polyhedron(n + m, vec![], vec![], super::selector(0, n, n + m), x0.clone());
                ConvexFunction::sum(vec![cost, pin])
            }
            _ => cost,
        }
    }
}

fn noise_path(tree: &ScenarioTree, spec: &ControlSpec, leaf: usize) -> Vec<f64> {
    (1..tree.num_stages()).flat_map(|t| spec.w[tree.ancestor(leaf, t)].iter().copied()).collect()
}

/// x_t = (X_t, U_t); u_t enters the system equation at t = 1, …, T and ū = W.
pub fn build_control(tree: &ScenarioTree, spec: &ControlSpec) -> Result<SPInstance> {
    spec.validate(tree)?;
    let (n, m) = (spec.state_dim, spec.control_dim);
    let stages = tree.num_stages();
    let path = stages * (n + m);
    let total = path + (stages - 1) * n;
    let integrands = (0..tree.num_leaves())
        .map(|leaf| {
            let mut terms: Vec<ConvexFunction> =
                (0..stages).map(|t| embed(&spec.stage_cost(tree, tree.ancestor(leaf, t)), t * (n + m), total)).collect();
            let mut eq = Vec::new();
            for t in 1..stages {
                let node = tree.ancestor(leaf, t);
                let (prev, cur) = ((t - 1) * (n + m), t * (n + m));
                for i in 0..n {
                    let mut row = vec![0.0; total];
                    row[cur + i] = 1.0;
                    row[prev + i] -= 1.0;
                    for j in 0..n {
                        row[prev + j] -= spec.a[node][i][j];
                    }
                    for k in 0..m {
                        row[prev + n + k] -= spec.b[node][i][k];
                    }
                    row[path + (t - 1) * n + i] = -1.0;
                    eq.push(row);
                }
            }
            if !eq.is_empty() {
                let rhs = vec![0.0; eq.len()];
                terms.push(ConvexFunction::polyhedron(total, vec![], vec![], eq, rhs));
            }
            ConvexFunction::sum(terms)
        })
        .collect();
    let ubar = (0..tree.num_leaves()).map(|l| noise_path(tree, spec, l)).collect();
    let ubar = RandomVariable::new(tree, (stages - 1) * n, ubar)?;
    SPInstance::new(tree.clone(), vec![n + m; stages], integrands, ubar)
}

fn check_pair(inst: &SPInstance, spec: &ControlSpec) -> Result<()> {
    spec.validate(inst.tree())?;
    let k = spec.state_dim + spec.control_dim;
    if inst.dims().iter().any(|&d| d != k) || inst.param_dim() != (inst.tree().num_stages() - 1) * spec.state_dim {
        return Err(Error::InvalidSpec("instance was not built from this control spec".into()));
    }
    Ok(())
}

/// v_t = (Δy_{t+1} + A*_{t+1} y_{t+1}, B*_{t+1} y_{t+1}) per leaf, with y_0 = 0 and y_{T+1} = 0.
/// `y[leaf]` stacks y_1, …, y_T.
fn costate_drive(tree: &ScenarioTree, spec: &ControlSpec, y: &[Vec<f64>]) -> Result<LeafProcess> {
    let (n, m) = (spec.state_dim, spec.control_dim);
    let stages = tree.num_stages();
    let at = |l: usize, t: usize, i: usize| if t == 0 || t >= stages { 0.0 } else { y[l][(t - 1) * n + i] };
    let values = (0..stages)
        .map(|t| {
            (0..tree.num_leaves())
                .map(|l| {
                    let mut v = vec![0.0; n + m];
                    for i in 0..n {
                        v[i] = at(l, t + 1, i) - at(l, t, i);
                    }
                    if t + 1 < stages {
                        let node = tree.ancestor(l, t + 1);
                        for i in 0..n {
                            let yi = at(l, t + 1, i);
                            for j in 0..n {
                                v[j] += spec.a[node][i][j] * yi;
                            }
                            for k in 0..m {
                                v[n + k] += spec.b[node][i][k] * yi;
                            }
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    LeafProcess::new(tree, vec![n + m; stages], values)
}

fn reduced_paths(tree: &ScenarioTree, spec: &ControlSpec, y: &AdaptedProcess) -> Result<Vec<Vec<f64>>> {
    let n = spec.state_dim;
    let ok = y.dims().len() == tree.num_stages() && y.dims()[0] == 0 && y.dims()[1..].iter().all(|&d| d == n);
    if !ok {
        return Err(Error::Shape(format!("multiplier must have dimensions [0, {n}, …, {n}]")));
    }
    Ok((0..tree.num_leaves()).map(|l| y.path(tree, l)).collect())
}

/// E Σ W_t·y_t − E Σ L_t*(−E_t v_t) for adapted y; stage 0 of y is empty.
pub fn control_reduced_dual_value(inst: &SPInstance, spec: &ControlSpec, y: &AdaptedProcess) -> Result<ExtReal> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    let paths = reduced_paths(tree, spec, y)?;
    let ev = tree.adapted_projection(&costate_drive(tree, spec, &paths)?)?;
    let mut total = ExtReal::ZERO;
    for (leaf, path) in paths.iter().enumerate() {
        let w: f64 = inst.ubar().value(leaf).iter().zip(path).map(|(a, b)| a * b).sum();
        total = total + ExtReal::Finite(tree.leaf_prob(leaf) * w);
    }
    for t in 0..tree.num_stages() {
        for (k, &node) in tree.nodes_at(t).iter().enumerate() {
            let v: Vec<f64> = ev.value(t, k).iter().map(|x| -x).collect();
            let c = spec.stage_cost(tree, node).conjugate_relaxed(&v, 0.0, Fallback::Allow)?.value;
            total = total - c.scale(*tree.prob(node));
        }
    }
    Ok(total)
}

/// Full dual point for adapted y: p_t = v_t − E_t v_t.
pub fn control_dual_from_reduced(inst: &SPInstance, spec: &ControlSpec, y: &AdaptedProcess) -> Result<DualPoint> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    let paths = reduced_paths(tree, spec, y)?;
    let p = tree.orthogonal_part(&costate_drive(tree, spec, &paths)?)?;
    Ok(DualPoint { p, y: RandomVariable::new(tree, inst.param_dim(), paths)? })
}

/// p_t − v_t ∈ ∂L_t(X_t, U_t) leafwise, E_t p_t = 0 and the system equations, all within tol.
pub fn control_maximum_principle_check(
    inst: &SPInstance,
    spec: &ControlSpec,
    x: &AdaptedProcess,
    d: &DualPoint,
    tol: f64,
) -> Result<bool> {
    check_pair(inst, spec)?;
    let tree = inst.tree();
    if x.dims() != inst.dims() || d.p.dims() != inst.dims() || d.y.dim() != inst.param_dim() {
        return Err(Error::Shape("pair does not match the instance".into()));
    }
    if !tree.in_orthogonal_complement(&d.p, &tol)? {
        return Ok(false);
    }
    let (n, m) = (spec.state_dim, spec.control_dim);
    for leaf in 0..tree.num_leaves() {
        let path = x.path(tree, leaf);
        let w = inst.ubar().value(leaf);
        for t in 1..tree.num_stages() {
            let node = tree.ancestor(leaf, t);
            let (prev, cur) = (&path[(t - 1) * (n + m)..t * (n + m)], &path[t * (n + m)..(t + 1) * (n + m)]);
            for i in 0..n {
                let drift: f64 = (0..n).map(|j| spec.a[node][i][j] * prev[j]).sum::<f64>()
                    + (0..m).map(|k| spec.b[node][i][k] * prev[n + k]).sum::<f64>();
                if (cur[i] - prev[i] - drift - w[(t - 1) * n + i]).abs() > tol {
                    return Ok(false);
                }
            }
        }
    }
    let v = costate_drive(tree, spec, d.y.values())?;
    let eps = domain_tol(tol);
    for leaf in 0..tree.num_leaves() {
        let path = x.path(tree, leaf);
        for t in 0..tree.num_stages() {
            let g: Vec<f64> = d.p.value(t, leaf).iter().zip(v.value(t, leaf)).map(|(p, v)| p - v).collect();
            let cost = spec.stage_cost(tree, tree.ancestor(leaf, t));
            if exceeds(fenchel_gap(&cost, &path[t * (n + m)..(t + 1) * (n + m)], &g, eps)?, tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
