//! Douglas–Rachford splitting between the scenariowise proximal maps of
//! f(·, ū) and the adapted projection.
//!
//! In the probability-weighted inner product the projection onto adapted
//! processes is ap, and the prox of Σ prob·f_leaf is leafwise. At a fixed
//! point x = ap(z) and (x − z)/γ is a subgradient orthogonal to adapted
//! processes, which is the shadow price p.

use super::{BackendResult, Outcome, SolveOptions};
use crate::conic::{Lin, Model, Tolerances};
use crate::convex::ConvexFunction;
use crate::error::{Error, Result};
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{LeafProcess, RandomVariable};

const STEP: f64 = 1.0;

fn restricted(inst: &SPInstance, leaf: usize) -> ConvexFunction {
    let f = inst.integrand(leaf).clone();
    let n = inst.path_dim();
    let m = inst.param_dim();
    if m == 0 {
        return f;
    }
    let matrix = (0..n + m).map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    let mut offset = vec![0.0; n];
    offset.extend_from_slice(inst.ubar().value(leaf));
    ConvexFunction::affine_pre(matrix, offset, f)
}

pub(crate) fn solve(inst: &SPInstance, opts: &SolveOptions) -> Result<Outcome> {
    let tree = inst.tree();
    let dims = inst.dims().to_vec();
    let leaves = tree.num_leaves();
    let fs: Vec<ConvexFunction> = (0..leaves).map(|l| restricted(inst, l)).collect();
    let stop = (0.1 * opts.tol_feas).max(1e-12);

    let mut z: Vec<Vec<f64>> = vec![vec![0.0; inst.path_dim()]; leaves];
    for iter in 0..opts.max_iter {
        let x = tree.adapted_projection(&LeafProcess::from_paths(tree, dims.clone(), &z)?)?;
        let mut change = 0.0f64;
        let mut w_all = Vec::with_capacity(leaves);
        for leaf in 0..leaves {
            let xl = x.path(tree, leaf);
            let reflected: Vec<f64> = xl.iter().zip(&z[leaf]).map(|(a, b)| 2.0 * a - b).collect();
            let w = fs[leaf].prox(&reflected, STEP)?;
            for k in 0..w.len() {
                let delta = w[k] - xl[k];
                change = change.max(delta.abs());
                z[leaf][k] += delta;
            }
            w_all.push((xl, reflected, w));
        }
        if change <= stop && iter > 0 {
            let g: Vec<Vec<f64>> = w_all
                .iter()
                .map(|(_, r, w)| r.iter().zip(w).map(|(a, b)| (a - b) / STEP).collect())
                .collect();
            let p = tree.orthogonal_part(&LeafProcess::from_paths(tree, dims.clone(), &g)?)?;
            let y = recover_y(inst, &x, &p)?;
            return Ok(Outcome::Solved(BackendResult { x, d: DualPoint { p, y } }));
        }
    }
    Err(Error::MaxIter)
}

/// y minimizing f*(p, y) − ū·y at each leaf, given p.
fn recover_y(inst: &SPInstance, x: &crate::tree::AdaptedProcess, p: &LeafProcess) -> Result<RandomVariable> {
    let tree = inst.tree();
    let n = inst.path_dim();
    let k = inst.param_dim();
    let mut values = Vec::with_capacity(tree.num_leaves());
    for leaf in 0..tree.num_leaves() {
        if k == 0 {
            values.push(Vec::new());
            continue;
        }
        // conjugate of f(· + x, · + ū) is f*(p, y) − x·p − ū·y
        let mut m = Model::new();
        let vars = m.add_vars(n + k);
        let shift: Vec<f64> = x.path(tree, leaf).into_iter().chain(inst.ubar().value(leaf).iter().copied()).collect();
        let arg: Vec<Lin> = vars.iter().zip(&shift).map(|(v, s)| v.clone() + *s).collect();
        inst.integrand(leaf).lower_objective(&mut m, &arg, 1.0);
        let exposed: Vec<usize> = (0..n + k).collect();
        match m.partial_conjugate_infimum(&exposed, &p.path(leaf), &Tolerances::default())? {
            Some((_, y)) => values.push(y),
            None => return Err(Error::Numerical(format!("no multiplier makes the conjugate finite at leaf {leaf}"))),
        }
    }
    RandomVariable::new(tree, k, values)
}
