//! Interior-point backend on the scenario-copy formulation.
//!
//! Every leaf gets copies z of its x-path and u of the parameter, tied to
//! the node variables and to ū by equality rows. The multipliers of those
//! rows are −prob·(p, y) at the optimum, and summing the z-stationarity
//! over a node makes E_t p_t vanish.

use super::{leaf_paths_from_duals, BackendResult, Outcome, SolveOptions};
use crate::conic::{Model, Status};
use crate::error::Result;
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{LeafProcess, RandomVariable};

pub(crate) fn solve(inst: &SPInstance, opts: &SolveOptions) -> Result<Outcome> {
    let tree = inst.tree();
    let mut m = Model::new();
    let node_vars = inst.add_node_vars(&mut m);
    let mut x_rows = Vec::with_capacity(tree.num_leaves());
    let mut u_rows = Vec::with_capacity(tree.num_leaves());
    for leaf in 0..tree.num_leaves() {
        let path = inst.path_exprs(&node_vars, leaf);
        let z = m.add_vars(path.len());
        let u = m.add_vars(inst.param_dim());
        x_rows.push(z.iter().zip(&path).map(|(a, b)| m.eq(a.clone() - b.clone())).collect::<Vec<_>>());
        u_rows.push(
            u.iter().zip(inst.ubar().value(leaf)).map(|(a, b)| m.eq(a.clone() + (-b))).collect::<Vec<_>>(),
        );
        let mut arg = z;
        arg.extend(u);
        inst.integrand(leaf).lower_objective(&mut m, &arg, *tree.leaf_prob(leaf));
    }
    let sol = m.solve(&opts.conic_tolerances())?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Ok(Outcome::Infeasible),
        Status::Unbounded => return Ok(Outcome::Unbounded(inst.adapted_from_solution(&node_vars, &sol.x))),
    }
    let x = inst.adapted_from_solution(&node_vars, &sol.x);
    let g = LeafProcess::from_paths(tree, inst.dims().to_vec(), &leaf_paths_from_duals(inst, &x_rows, &sol.eq_duals))?;
    let y = RandomVariable::new(tree, inst.param_dim(), leaf_paths_from_duals(inst, &u_rows, &sol.eq_duals))?;
    let p = tree.orthogonal_part(&g)?;
    Ok(Outcome::Solved(BackendResult { x, d: DualPoint { p, y } }))
}
