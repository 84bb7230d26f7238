//! Semi-static hedging: dynamic trading in liquid assets plus a static position bought at time zero.
//!
//! The instance lives on the input tree with a trivial root prepended. Stage 0 holds
//! the static portfolio x̄, stage t + 1 the holdings x_t chosen at original stage t,
//! and the last stage is empty.

use serde::{Deserialize, Serialize};

use super::{check_leaf_count, check_node_count, embed, exceeds, fenchel_gap};
use crate::conic::{Lin, Model, Status, Tolerances};
use crate::convex::{domain_tol, ConvexFunction, Fallback, ScalarLoss};
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::problem::{dot, DualPoint, SPInstance};
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree};

/// Conditional means of yΔs that count as zero when no trading constraint is present.
const MARTINGALE_TOL: f64 = 1e-10;
const NA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgingSpec {
    /// s_t per node, dimension J.
    pub prices: Vec<Vec<f64>>,
    /// c per leaf.
    pub claim: Vec<f64>,
    /// c̄ per leaf, dimension J̄. Empty means no static assets.
    #[serde(default)]
    pub static_payoffs: Vec<Vec<f64>>,
    /// S₀ on R^J̄, the cost of the static position.
    #[serde(default)]
    pub static_cost: Option<ConvexFunction>,
    pub loss: ScalarLoss,
    /// D_t per node as polyhedral indicators on R^J. Leaves are ignored since D_T = {0}.
    #[serde(default)]
    pub constraints: Option<Vec<ConvexFunction>>,
}

impl HedgingSpec {
    pub fn num_assets(&self) -> usize {
        self.prices.first().map_or(0, Vec::len)
    }

    pub fn num_static(&self) -> usize {
        self.static_payoffs.first().map_or(0, Vec::len)
    }

    fn static_payoff(&self, leaf: usize) -> &[f64] {
        self.static_payoffs.get(leaf).map_or(&[], Vec::as_slice)
    }

    pub fn static_cost_fn(&self) -> ConvexFunction {
        self.static_cost.clone().unwrap_or_else(|| ConvexFunction::zero(self.num_static()))
    }

    fn constraint(&self, node: usize) -> Option<&ConvexFunction> {
        self.constraints.as_ref().map(|c| &c[node])
    }

    pub fn price_process(&self, tree: &ScenarioTree) -> Result<AdaptedProcess> {
        check_node_count(tree, &self.prices, "price vectors")?;
        AdaptedProcess::from_node_vectors(tree, vec![self.num_assets(); tree.num_stages()], &self.prices)
    }

    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        let j = self.num_assets();
        self.price_process(tree)?;
        check_leaf_count(tree, &self.claim, "claims")?;
        let jbar = self.num_static();
        if !self.static_payoffs.is_empty() {
            check_leaf_count(tree, &self.static_payoffs, "static payoffs")?;
            if let Some(bad) = self.static_payoffs.iter().find(|c| c.len() != jbar) {
                return Err(Error::Dimension { expected: jbar, got: bad.len() });
            }
        }
        self.loss.validate()?;
        if self.loss.is_constant() {
            return Err(Error::InvalidSpec("the loss must be nonconstant".into()));
        }
        let s0 = self.static_cost_fn();
        if s0.dim() != jbar {
            return Err(Error::Dimension { expected: jbar, got: s0.dim() });
        }
        s0.validate()?;
        if s0.eval(&vec![0.0; jbar]) != ExtReal::ZERO {
            return Err(Error::InvalidSpec("the static cost must vanish at zero".into()));
        }
        if s0.as_affine().is_none() && !self.loss.is_nondecreasing() {
            return Err(Error::InvalidSpec("a nonlinear static cost needs a nondecreasing loss".into()));
        }
        if let Some(cons) = &self.constraints {
            check_node_count(tree, cons, "trading constraints")?;
            for (node, d) in cons.iter().enumerate() {
                if tree.stage(node) == tree.horizon() {
                    continue;
                }
                if !matches!(d, ConvexFunction::IndicatorPolyhedron { .. }) {
                    return Err(Error::InvalidSpec(format!("constraint at node {node} is not a polyhedron")));
                }
                if d.dim() != j {
                    return Err(Error::Dimension { expected: j, got: d.dim() });
                }
                if !d.in_domain(&vec![0.0; j], 0.0) {
                    return Err(Error::InvalidSpec(format!("constraint at node {node} excludes zero")));
                }
            }
        }
        Ok(())
    }

    fn check_tree(&self, inst: &SPInstance) -> Result<ScenarioTree> {
        let tree = inst.tree();
        if tree.num_nodes() < 2 || tree.nodes_at(0).len() != 1 || inst.param_dim() != 1 {
            return Err(Error::InvalidSpec("instance was not built by build_hedging".into()));
        }
        let parents: Vec<Option<usize>> =
            tree.parents()[1..].iter().map(|p| p.and_then(|q| q.checked_sub(1))).collect();
        let original = ScenarioTree::new(parents, tree.probs()[1..].to_vec())?;
        self.validate(&original)?;
        let mut dims = vec![self.num_static()];
        dims.extend((0..original.horizon()).map(|_| self.num_assets()));
        dims.push(0);
        if inst.dims() != dims {
            return Err(Error::InvalidSpec("instance dimensions do not match the hedging spec".into()));
        }
        Ok(original)
    }
}

/// Δs_{t+1} at the stage-t ancestor of every leaf, t = 0, …, T − 1.
fn increments(tree: &ScenarioTree, s: &AdaptedProcess) -> Vec<Vec<Vec<f64>>> {
    (0..tree.horizon())
        .map(|t| {
            (0..tree.num_leaves())
                .map(|l| {
                    let (a, b) = (s.value(t, tree.atom_of(l, t)), s.value(t + 1, tree.atom_of(l, t + 1)));
                    b.iter().zip(a).map(|(b, a)| b - a).collect()
                })
                .collect()
        })
        .collect()
}

/// f(x̄, x, u) = V(u − Σ x_t·Δs_{t+1} − c̄·x̄ + S₀(x̄)) + Σ δ_{D_t}(x_t) with ū = c.
pub fn build_hedging(tree: &ScenarioTree, spec: &HedgingSpec) -> Result<SPInstance> {
    spec.validate(tree)?;
    let (j, jbar) = (spec.num_assets(), spec.num_static());
    let horizon = tree.horizon();
    let n = jbar + horizon * j;
    let ds = increments(tree, &spec.price_process(tree)?);
    let s0 = spec.static_cost_fn();
    let integrands = (0..tree.num_leaves())
        .map(|leaf| {
            let mut slope = vec![0.0; n + 1];
            for (k, c) in spec.static_payoff(leaf).iter().enumerate() {
                slope[k] = -c;
            }
            for t in 0..horizon {
                for (i, d) in ds[t][leaf].iter().enumerate() {
                    slope[jbar + t * j + i] = -d;
                }
            }
            slope[n] = 1.0;
            let loss = match s0.as_affine() {
                Some((a, _)) => {
                    for (k, a) in a.iter().enumerate() {
                        slope[k] += a;
                    }
                    ConvexFunction::affine_pre(vec![slope], vec![0.0], spec.loss.into())
                }
                None => ConvexFunction::nondecreasing_pre(
                    spec.loss,
                    ConvexFunction::sum(vec![ConvexFunction::affine(slope, 0.0), embed(&s0, 0, n + 1)]),
                ),
            };
            let mut terms = vec![loss];
            for t in 0..horizon {
                if let Some(d) = spec.constraint(tree.ancestor(leaf, t)) {
                    terms.push(embed(d, jbar + t * j, n + 1));
                }
            }
            if terms.len() == 1 {
                terms.pop().expect("one term")
            } else {
                ConvexFunction::sum(terms)
            }
        })
        .collect();
    let inner = tree.with_trivial_root();
    let mut dims = vec![jbar];
    dims.extend((0..horizon).map(|_| j));
    dims.push(0);
    let ubar = RandomVariable::scalar(&inner, spec.claim.clone())?;
    SPInstance::new(inner, dims, integrands, ubar)
}

/// σ_D(v), or δ_{0}(v) up to `MARTINGALE_TOL` when trading is unconstrained.
fn support(d: Option<&ConvexFunction>, v: &[f64]) -> Result<ExtReal> {
    match d {
        Some(d) => Ok(d.conjugate_relaxed(v, 0.0, Fallback::Forbid)?.value),
        None if v.iter().all(|x| x.abs() <= MARTINGALE_TOL) => Ok(ExtReal::ZERO),
        None => Ok(ExtReal::PosInf),
    }
}

/// (λS₀)*(v) and the per-unit price v̄ with p̄ = y(v̄ − c̄), when finite.
fn static_part(spec: &HedgingSpec, lambda: f64, v: &[f64], any_negative: bool) -> Result<(ExtReal, Vec<f64>)> {
    let s0 = spec.static_cost_fn();
    if v.is_empty() {
        return Ok((ExtReal::ZERO, vec![]));
    }
    if let Some((a, _)) = s0.as_affine() {
        let scale = 1.0 + lambda.abs();
        let ok = a.iter().zip(v).all(|(a, v)| (lambda * a - v).abs() <= MARTINGALE_TOL * scale);
        return Ok((if ok { ExtReal::ZERO } else { ExtReal::PosInf }, a));
    }
    if any_negative {
        return Ok((ExtReal::PosInf, vec![]));
    }
    if lambda > 0.0 {
        let unit: Vec<f64> = v.iter().map(|v| v / lambda).collect();
        let c = s0.conjugate_relaxed(&unit, 0.0, Fallback::Forbid)?.value;
        return Ok((c.scale(lambda), unit));
    }
    // S₀ is finite everywhere, so 0·S₀ has conjugate δ_{0}
    let zero = v.iter().all(|x| x.abs() <= MARTINGALE_TOL);
    Ok((if zero { ExtReal::ZERO } else { ExtReal::PosInf }, vec![0.0; v.len()]))
}

fn check_y(tree: &ScenarioTree, y: &RandomVariable) -> Result<()> {
    if y.dim() != 1 || y.num_leaves() != tree.num_leaves() {
        return Err(Error::Shape("the hedging multiplier is one scalar per leaf".into()));
    }
    Ok(())
}

/// E[cy − V*(y)] − Σ_t E σ_{D_t}(E_t[yΔs_{t+1}]) − (E[y]S₀)*(E[yc̄]).
pub fn hedging_reduced_dual_value(inst: &SPInstance, spec: &HedgingSpec, y: &RandomVariable) -> Result<ExtReal> {
    let tree = spec.check_tree(inst)?;
    check_y(&tree, y)?;
    let ys = y.scalars();
    let mut total = ExtReal::ZERO;
    for (leaf, &yl) in ys.iter().enumerate() {
        let w = *tree.leaf_prob(leaf);
        total = total + ExtReal::Finite(w * spec.claim[leaf] * yl) - spec.loss.conjugate(yl).scale(w);
    }
    let ds = increments(&tree, &spec.price_process(&tree)?);
    for (t, ds_t) in ds.iter().enumerate() {
        let ydelta: Vec<Vec<f64>> = ds_t.iter().zip(&ys).map(|(d, y)| d.iter().map(|d| d * y).collect()).collect();
        let means = tree.atom_means(&ydelta, t)?;
        for (k, &node) in tree.nodes_at(t).iter().enumerate() {
            total = total - support(spec.constraint(node), &means[k])?.scale(*tree.prob(node));
        }
    }
    let (lambda, v) = static_moments(&tree, spec, &ys);
    let (s, _) = static_part(spec, lambda, &v, ys.iter().any(|&y| y < -MARTINGALE_TOL))?;
    Ok(total - s)
}

fn static_moments(tree: &ScenarioTree, spec: &HedgingSpec, ys: &[f64]) -> (f64, Vec<f64>) {
    let mut lambda = 0.0;
    let mut v = vec![0.0; spec.num_static()];
    for (leaf, &y) in ys.iter().enumerate() {
        let w = *tree.leaf_prob(leaf);
        lambda += w * y;
        for (vk, c) in v.iter_mut().zip(spec.static_payoff(leaf)) {
            *vk += w * y * c;
        }
    }
    (lambda, v)
}

/// Full dual point: p_t = E_t[yΔs_{t+1}] − yΔs_{t+1} and p̄ = y(v̄ − c̄).
pub fn hedging_dual_from_reduced(inst: &SPInstance, spec: &HedgingSpec, y: &RandomVariable) -> Result<DualPoint> {
    let tree = spec.check_tree(inst)?;
    check_y(&tree, y)?;
    let ys = y.scalars();
    let (lambda, v) = static_moments(&tree, spec, &ys);
    let (_, unit) = static_part(spec, lambda, &v, ys.iter().any(|&y| y < -MARTINGALE_TOL))?;
    let unit = if unit.len() == v.len() { unit } else { vec![0.0; v.len()] };
    let ds = increments(&tree, &spec.price_process(&tree)?);
    let mut values = Vec::with_capacity(inst.dims().len());
    values.push(
        (0..tree.num_leaves())
            .map(|l| unit.iter().zip(spec.static_payoff(l)).map(|(u, c)| ys[l] * (u - c)).collect())
            .collect(),
    );
    for ds_t in &ds {
        values.push(ds_t.iter().zip(&ys).map(|(d, y)| d.iter().map(|d| -d * y).collect()).collect());
    }
    values.push(vec![vec![]; tree.num_leaves()]);
    let raw = LeafProcess::new(inst.tree(), inst.dims().to_vec(), values)?;
    // the static block is already centred; the trading blocks become E_t[yΔs] − yΔs
    let mut p = inst.tree().orthogonal_part(&raw)?;
    if !v.is_empty() {
        let mut all = p.values().to_vec();
        all[0] = raw.values()[0].clone();
        p = LeafProcess::new(inst.tree(), inst.dims().to_vec(), all)?;
    }
    Ok(DualPoint { p, y: y.clone() })
}

/// Largest violation of the scenariowise optimality conditions: Fenchel gaps of
/// y ∈ ∂V(z), p_t + yΔs_{t+1} ∈ N_{D_t}(x_t) and p̄ + yc̄ ∈ ∂(yS₀)(x̄), together
/// with ‖E_t p_t‖.
pub fn hedging_optimality_residual(
    inst: &SPInstance,
    spec: &HedgingSpec,
    x: &AdaptedProcess,
    d: &DualPoint,
    tol: f64,
) -> Result<ExtReal> {
    let tree = spec.check_tree(inst)?;
    if x.dims() != inst.dims() || d.p.dims() != inst.dims() {
        return Err(Error::Shape("pair does not match the instance".into()));
    }
    check_y(&tree, &d.y)?;
    let (j, jbar) = (spec.num_assets(), spec.num_static());
    let eps = domain_tol(tol);
    let ds = increments(&tree, &spec.price_process(&tree)?);
    let s0 = spec.static_cost_fn();
    let orth = inst.tree().orthogonality_residuals(&d.p)?.into_iter().fold(0.0, f64::max);
    let mut worst = ExtReal::Finite(orth);
    for leaf in 0..tree.num_leaves() {
        let path = inst.path(x, leaf);
        let y = d.y.value(leaf)[0];
        let xbar = &path[..jbar];
        let mut z = spec.claim[leaf] - dot(spec.static_payoff(leaf), xbar);
        if jbar > 0 {
            z = z + s0.eval_tol(xbar, eps).finite().unwrap_or(f64::INFINITY);
        }
        for t in 0..tree.horizon() {
            z -= dot(&path[jbar + t * j..jbar + (t + 1) * j], &ds[t][leaf]);
        }
        let v_gap = spec.loss.eval_tol(z, eps) + spec.loss.conjugate_relaxed(y, eps) - z * y;
        worst = worst.max(v_gap);
        for t in 0..tree.horizon() {
            let xt = &path[jbar + t * j..jbar + (t + 1) * j];
            let v: Vec<f64> = d.p.value(t + 1, leaf).iter().zip(&ds[t][leaf]).map(|(p, s)| p + y * s).collect();
            let gap = match spec.constraint(tree.ancestor(leaf, t)) {
                Some(dt) => fenchel_gap(dt, xt, &v, eps)?,
                None => ExtReal::Finite(v.iter().fold(0.0, |m, x| m.max(x.abs()))),
            };
            worst = worst.max(gap);
        }
        if jbar > 0 {
            let v: Vec<f64> = d.p.value(0, leaf).iter().zip(spec.static_payoff(leaf)).map(|(p, c)| p + y * c).collect();
            let gap = if y.abs() <= eps {
                ExtReal::Finite(v.iter().fold(0.0, |m, x| m.max(x.abs())))
            } else if y > 0.0 || s0.as_affine().is_some() {
                fenchel_gap(&ConvexFunction::scaled(y, s0.clone()), xbar, &v, eps)?
            } else {
                ExtReal::PosInf
            };
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoArbitrageReport {
    pub holds: bool,
    /// Expected gain of the best strategy in the unit box.
    pub max_gain: f64,
    /// An arbitrage strategy (stages 0, …, T − 1 trade; the last stage is empty).
    pub witness: Option<AdaptedProcess>,
}

/// Maximizes E Σ x_t·Δs_{t+1} over adapted x with ‖x‖_∞ ≤ 1 and nonnegative gains in every scenario.
pub fn no_arbitrage_check(tree: &ScenarioTree, s: &AdaptedProcess) -> Result<NoArbitrageReport> {
    if s.dims().len() != tree.num_stages() || s.dims().windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Shape("prices must have the same dimension at every stage".into()));
    }
    let j = s.dims()[0];
    let horizon = tree.horizon();
    let ds = increments(tree, s);
    let mut m = Model::new();
    let vars: Vec<Vec<Lin>> =
        (0..tree.num_nodes()).map(|n| m.add_vars(if tree.stage(n) < horizon { j } else { 0 })).collect();
    for v in vars.iter().flatten() {
        m.le(v.clone() + -1.0);
        m.le(-v.clone() + -1.0);
    }
    for leaf in 0..tree.num_leaves() {
        let mut gain = Lin::zero();
        for t in 0..horizon {
            for (v, d) in vars[tree.ancestor(leaf, t)].iter().zip(&ds[t][leaf]) {
                gain.add_scaled(v, *d);
            }
        }
        m.add_linear(&gain, -tree.leaf_prob(leaf));
        m.le(-gain);
    }
    let sol = m.solve(&Tolerances::default())?;
    if sol.status != Status::Optimal {
        return Err(Error::Numerical("the arbitrage LP is bounded and feasible".into()));
    }
    let max_gain = -sol.objective;
    let scale = 1.0 + ds.iter().flatten().flatten().fold(0.0_f64, |m, d| m.max(d.abs()));
    let holds = max_gain <= NA_TOL * scale;
    let witness = if holds {
        None
    } else {
        let values: Vec<Vec<f64>> = vars.iter().map(|v| v.iter().map(|e| e.eval(&sol.x)).collect()).collect();
        let mut dims = vec![j; horizon];
        dims.push(0);
        Some(AdaptedProcess::from_node_vectors(tree, dims, &values)?)
    };
    Ok(NoArbitrageReport { holds, max_gain, witness })
}

/// Whether the measure dQ = y dP / E[y] prices the static assets inside dom S₀*.
/// With E[y] = 0 and y ≥ 0, y vanishes and so must E[yc̄].
pub fn calibration_check(
    tree: &ScenarioTree,
    y: &RandomVariable,
    cbar: &RandomVariable,
    s0: &ConvexFunction,
    tol: f64,
) -> Result<bool> {
    check_y(tree, y)?;
    if cbar.num_leaves() != tree.num_leaves() || cbar.dim() != s0.dim() {
        return Err(Error::Shape("static payoffs do not match the cost function".into()));
    }
    let ys = y.scalars();
    if ys.iter().any(|&v| v < -tol) {
        return Err(Error::InvalidSpec("calibration needs a nonnegative density".into()));
    }
    let mut lambda = 0.0;
    let mut v = vec![0.0; cbar.dim()];
    for (leaf, &yl) in ys.iter().enumerate() {
        let w = *tree.leaf_prob(leaf);
        lambda += w * yl;
        for (vk, c) in v.iter_mut().zip(cbar.value(leaf)) {
            *vk += w * yl * c;
        }
    }
    if lambda <= tol {
        return Ok(v.iter().all(|x| x.abs() <= tol));
    }
    let price: Vec<f64> = v.iter().map(|x| x / lambda).collect();
    Ok(!exceeds(s0.conjugate_relaxed(&price, tol, Fallback::Allow)?.value, f64::MAX))
}
