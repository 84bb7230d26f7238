//! Convex programs f₀(x) subject to f_j(x) ≤ 0 (j < l) and f_j(x) = 0 (j ≥ l).

use serde::{Deserialize, Serialize};

use super::{check_leaf_count, embed, exceeds, fenchel_gap};
use crate::convex::{domain_tol, ConvexFunction};
use crate::error::{Error, Result};
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{AdaptedProcess, RandomVariable, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathProgSpec {
    pub dims: Vec<usize>,
    /// f₀ per leaf, over the x-path.
    pub objective: Vec<ConvexFunction>,
    /// f_1, …, f_m per leaf, over the x-path. Empty means no constraints.
    #[serde(default)]
    pub constraints: Vec<Vec<ConvexFunction>>,
    #[serde(default)]
    pub num_inequalities: usize,
}

impl MathProgSpec {
    pub fn num_constraints(&self) -> usize {
        self.constraints.first().map_or(0, Vec::len)
    }

    fn constraints_at(&self, leaf: usize) -> &[ConvexFunction] {
        self.constraints.get(leaf).map_or(&[], Vec::as_slice)
    }

    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        check_leaf_count(tree, &self.objective, "objectives")?;
        if !self.constraints.is_empty() {
            check_leaf_count(tree, &self.constraints, "constraint lists")?;
        }
        let m = self.num_constraints();
        if self.num_inequalities > m {
            return Err(Error::InvalidSpec(format!("{} inequalities among {m} constraints", self.num_inequalities)));
        }
        let n: usize = self.dims.iter().sum();
        for leaf in 0..tree.num_leaves() {
            let cons = self.constraints_at(leaf);
            if cons.len() != m {
                return Err(Error::Shape(format!("leaf {leaf} has {} constraints, expected {m}", cons.len())));
            }
            if self.objective[leaf].dim() != n {
                return Err(Error::Dimension { expected: n, got: self.objective[leaf].dim() });
            }
            for (j, c) in cons.iter().enumerate() {
                if c.dim() != n {
                    return Err(Error::Dimension { expected: n, got: c.dim() });
                }
                if j >= self.num_inequalities && c.as_affine().is_none() {
                    return Err(Error::InvalidSpec(format!("equality constraint {j} is not affine")));
                }
            }
        }
        Ok(())
    }
}

/// f(x, u) = f₀(x) + δ_K(H(x) + u) with K = R_−^l × {0}^{m−l} and ū = 0.
pub fn build_mathprog(tree: &ScenarioTree, spec: &MathProgSpec) -> Result<SPInstance> {
    spec.validate(tree)?;
    let n: usize = spec.dims.iter().sum();
    let m = spec.num_constraints();
    let l = spec.num_inequalities;
    let integrands = (0..tree.num_leaves())
        .map(|leaf| {
            let mut terms = vec![embed(&spec.objective[leaf], 0, n + m)];
            let (mut ineq, mut ineq_rhs, mut eq, mut eq_rhs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (j, c) in spec.constraints_at(leaf).iter().enumerate() {
                let mut unit = vec![0.0; n + m];
                unit[n + j] = 1.0;
                match c.as_affine() {
                    Some((slope, constant)) => {
                        let mut row = slope;
                        row.extend_from_slice(&unit[n..]);
                        if j < l {
                            ineq.push(row);
                            ineq_rhs.push(-constant);
                        } else {
                            eq.push(row);
                            eq_rhs.push(-constant);
                        }
                    }
                    None => terms.push(ConvexFunction::sublevel(ConvexFunction::sum(vec![
                        embed(c, 0, n + m),
                        ConvexFunction::affine(unit, 0.0),
                    ]))),
                }
            }
            if !ineq.is_empty() || !eq.is_empty() {
                terms.push(ConvexFunction::polyhedron(n + m, ineq, ineq_rhs, eq, eq_rhs));
            }
            if terms.len() == 1 {
                terms.pop().expect("one term")
            } else {
                ConvexFunction::sum(terms)
            }
        })
        .collect();
    SPInstance::new(tree.clone(), spec.dims.clone(), integrands, RandomVariable::zeros(tree, m))
}

/// Checks p ∈ ∂[f₀ + y·H](x), H(x) ∈ K, y ∈ K* = R_+^l × R^{m−l} and
/// y·H(x) = 0 at every leaf, together with E_t p_t = 0.
pub fn mathprog_kkt_check(
    inst: &SPInstance,
    spec: &MathProgSpec,
    x: &AdaptedProcess,
    d: &DualPoint,
    tol: f64,
) -> Result<bool> {
    spec.validate(inst.tree())?;
    if !inst.tree().in_orthogonal_complement(&d.p, &tol)? {
        return Ok(false);
    }
    let l = spec.num_inequalities;
    let eps = domain_tol(tol);
    for leaf in 0..inst.tree().num_leaves() {
        let z = inst.path(x, leaf);
        let y = d.y.value(leaf);
        let cons = spec.constraints_at(leaf);
        let mut complementarity = 0.0;
        let mut terms = vec![spec.objective[leaf].clone()];
        for (j, c) in cons.iter().enumerate() {
            let Some(h) = c.eval_tol(&z, eps).finite() else { return Ok(false) };
            if j < l {
                if y[j] < -tol || h > tol {
                    return Ok(false);
                }
            } else if h.abs() > tol {
                return Ok(false);
            }
            complementarity += y[j] * h;
            match c.as_affine() {
                Some((slope, constant)) => terms.push(ConvexFunction::affine(
                    slope.iter().map(|s| s * y[j]).collect(),
                    constant * y[j],
                )),
                None if y[j] > 0.0 => terms.push(ConvexFunction::scaled(y[j], c.clone())),
                None => {}
            }
        }
        if complementarity.abs() > tol {
            return Ok(false);
        }
        let g = ConvexFunction::sum(terms);
        if exceeds(fenchel_gap(&g, &z, &d.p.path(leaf), eps)?, tol) {
            return Ok(false);
        }
    }
    Ok(true)
}
