//! Builders, reduced duals and optimality checks for the application classes.

pub mod control;
pub mod hedging;
pub mod lagrange;
pub mod mathprog;
pub mod stopping;

use crate::convex::{ConvexFunction, Fallback, Rows};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::problem::dot;
use crate::tree::ScenarioTree;

pub use control::{
    build_control, control_dual_from_reduced, control_maximum_principle_check, control_reduced_dual_value,
    ControlSpec,
};
pub use hedging::{
    build_hedging, calibration_check, hedging_dual_from_reduced, hedging_optimality_residual,
    hedging_reduced_dual_value, no_arbitrage_check, HedgingSpec, NoArbitrageReport,
};
pub use lagrange::{
    build_lagrange, euler_lagrange_check, lagrange_dual_from_reduced, lagrange_reduced_dual_value,
    stopping_as_lagrange, LagrangeSpec,
};
pub use mathprog::{build_mathprog, mathprog_kkt_check, MathProgSpec};
pub use stopping::{
    build_stopping, snell_envelope, stopping_certificate_check, stopping_dual_from_snell, StoppingSpec,
    StoppingTime,
};

/// Rows picking coordinates `start..start + k` out of `total`.
pub(crate) fn selector(start: usize, k: usize, total: usize) -> Rows {
    (0..k)
        .map(|r| {
            let mut row = vec![0.0; total];
            row[start + r] = 1.0;
            row
        })
        .collect()
}

/// g(z) = f(z[start..start + f.dim()]) on R^total.
pub(crate) fn embed(f: &ConvexFunction, start: usize, total: usize) -> ConvexFunction {
    let k = f.dim();
    if start == 0 && k == total {
        return f.clone();
    }
    ConvexFunction::affine_pre(selector(start, k, total), vec![0.0; k], f.clone())
}

/// f(x) + f*(v) − x·v with both sides relaxed by `eps`.
pub(crate) fn fenchel_gap(f: &ConvexFunction, x: &[f64], v: &[f64], eps: f64) -> Result<ExtReal> {
    let fx = f.eval_tol(x, eps);
    let fc = f.conjugate_relaxed(v, eps, Fallback::Allow)?.value;
    Ok(fx + fc - dot(x, v))
}

pub(crate) fn check_node_count<T>(tree: &ScenarioTree, items: &[T], what: &str) -> Result<()> {
    if items.len() != tree.num_nodes() {
        return Err(Error::Shape(format!("{} {what} for {} nodes", items.len(), tree.num_nodes())));
    }
    Ok(())
}

pub(crate) fn check_leaf_count<T>(tree: &ScenarioTree, items: &[T], what: &str) -> Result<()> {
    if items.len() != tree.num_leaves() {
        return Err(Error::Shape(format!("{} {what} for {} leaves", items.len(), tree.num_leaves())));
    }
    Ok(())
}

pub(crate) fn exceeds(r: ExtReal, tol: f64) -> bool {
    r.finite().is_none_or(|r| r > tol)
}
