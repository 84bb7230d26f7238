use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochdual::apps::{
    control_dual_from_reduced, hedging_dual_from_reduced, hedging_reduced_dual_value, lagrange_dual_from_reduced,
    snell_envelope,
};
use stochdual::{fixtures, AdaptedProcess, DualPoint, LeafProcess, RandomVariable, SPInstance, ScenarioTree};
use stochdual_cli::{ProblemFile, Spec};

use crate::common;
use crate::util::{ensure, load, Ctx, Outcome};

const PAIRS: usize = 1000;
const EVAL_TOL: f64 = 1e-12;

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    let mut empty = Vec::new();
    for (name, _) in common::bundled() {
        let file = load(name)?;
        let inst = file.build().ctx(name)?;
        for i in 0..PAIRS {
            let Some(d) = sample_dual(name, &file, &inst, &mut rng)? else {
                empty.push(name);
                break;
            };
            let x = sample_primal(name, &file, &inst, &mut rng)?;
            let e = inst.evaluate_pair(&x, &d, EVAL_TOL).ctx(name)?;
            ensure!(e.primal_feasible, "{name}: sampled primal point {i} is infeasible ({:?})", e.primal);
            ensure!(e.dual_feasible, "{name}: sampled dual point {i} is infeasible ({:?})", e.dual);
            ensure!(e.max_orth_residual() <= EVAL_TOL, "{name}: E_t p_t = {:e}", e.max_orth_residual());
            let (Some(p), Some(q)) = (e.primal.finite(), e.dual.finite()) else {
                return Err(format!("{name}: pair {i} has values {:?} and {:?}", e.primal, e.dual));
            };
            ensure!(p - q >= -1e-9, "{name}: pair {i} violates weak duality, primal {p} < dual {q}");
            worst = worst.min(p - q);
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!(
        "{pairs} pairs, min primal − dual {worst:.3e}, {secs:.2}s; no dual-feasible point exists for {}",
        empty.join(", ")
    ))
}

fn uniform_nodes<R: Rng>(inst: &SPInstance, rng: &mut R, lo: f64, hi: f64) -> Result<AdaptedProcess, String> {
    let tree = inst.tree();
    let by_node: Vec<Vec<f64>> = (0..tree.num_nodes())
        .map(|n| (0..inst.dims()[tree.stage(n)]).map(|_| rng.gen_range(lo..hi)).collect())
        .collect();
    AdaptedProcess::from_node_vectors(tree, inst.dims().to_vec(), &by_node).ctx("primal sample")
}

fn sample_primal<R: Rng>(name: &str, file: &ProblemFile, inst: &SPInstance, rng: &mut R) -> Result<AdaptedProcess, String> {
    let tree = inst.tree();
    let n = tree.num_nodes();
    let by_node: Vec<Vec<f64>> = match &file.spec {
        Spec::Hedging(_) | Spec::Generic(_) => return uniform_nodes(inst, rng, -3.0, 3.0),
        Spec::Mathprog(_) if name == "lp.json" => return uniform_nodes(inst, rng, 2.0, 5.0),
        Spec::Mathprog(_) => return uniform_nodes(inst, rng, -2.0, 2.0),
        Spec::Stopping(_) => {
            // stop a random fraction of the mass still running
            let mut used = vec![0.0; n];
            let mut x = vec![vec![0.0]; n];
            for node in 0..n {
                let before = tree.parent(node).map_or(0.0, |p| used[p]);
                let stop = rng.gen_range(0.0..1.0) * (1.0 - before);
                x[node] = vec![stop];
                used[node] = before + stop;
            }
            x
        }
        Spec::Control(spec) => {
            let mut x: Vec<Vec<f64>> = vec![Vec::new(); n];
            for node in 0..n {
                let u = rng.gen_range(-2.0..2.0);
                let state = match tree.parent(node) {
                    None => spec.initial_state.as_ref().map_or_else(|| rng.gen_range(-2.0..2.0), |s| s[0]),
                    Some(p) => {
                        let (xp, up) = (x[p][0], x[p][1]);
                        xp + spec.a[node][0][0] * xp + spec.b[node][0][0] * up + spec.w[node][0]
                    }
                };
                x[node] = vec![state, u];
            }
            x
        }
        Spec::Lagrange(_) => {
            // nondecreasing mass stopped so far, at most 1
            let mut x = vec![vec![0.0]; n];
            for node in 0..n {
                let before = tree.parent(node).map_or(0.0, |p| x[p][0]);
                x[node] = vec![before + rng.gen_range(0.0..1.0) * (1.0 - before)];
            }
            x
        }
    };
    AdaptedProcess::from_node_vectors(tree, inst.dims().to_vec(), &by_node).ctx(name)
}

fn scalar_rv(tree: &ScenarioTree, v: Vec<f64>) -> Result<RandomVariable, String> {
    RandomVariable::scalar(tree, v).ctx("random variable")
}

/// y and p_t = y − E_t y, which satisfies p_t + R_t ≤ y whenever E_t y dominates R_t.
fn stopping_dual<R: Rng>(tree: &ScenarioTree, reward: &[f64], rng: &mut R) -> Result<(Vec<f64>, AdaptedProcess), String> {
    let r = AdaptedProcess::from_node_scalars(tree, reward).ctx("reward")?;
    let s = snell_envelope(tree, &r).ctx("snell")?;
    let (m, _) = tree.doob_decomposition(&s).ctx("doob")?;
    let last = tree.horizon();
    let y = (0..tree.num_leaves()).map(|l| m.value(last, tree.atom_of(l, last))[0] + rng.gen_range(0.01..1.0)).collect();
    Ok((y, s))
}

fn sample_dual<R: Rng>(
    name: &str,
    file: &ProblemFile,
    inst: &SPInstance,
    rng: &mut R,
) -> Result<Option<DualPoint>, String> {
    let tree = inst.tree();
    let d = match &file.spec {
        Spec::Hedging(spec) => {
            // on the one-period binomial market the martingale densities are a·(1, −Δs₁/Δs₂)
            let up = spec.prices[1][0] - spec.prices[0][0];
            let down = spec.prices[2][0] - spec.prices[0][0];
            let ratio = -up / down;
            let a = match name {
                "hedging.json" => rng.gen_range(-2.0..2.0),
                "hedging_static.json" => rng.gen_range(0.0..2.0),
                // V is nondecreasing, so y ≥ 0, and the ratio is negative
                "arbitrage_shortfall.json" => 0.0,
                _ => {
                    // V(z) = −z needs y ≡ −1, which is no martingale density
                    for _ in 0..20 {
                        let a = rng.gen_range(-3.0..3.0);
                        let y = scalar_rv(tree, vec![a, a * ratio])?;
                        let v = hedging_reduced_dual_value(inst, spec, &y).ctx(name)?;
                        ensure!(v.finite().is_none(), "{name}: a = {a} gives a finite dual value {v:?}");
                    }
                    return Ok(None);
                }
            };
            hedging_dual_from_reduced(inst, spec, &scalar_rv(tree, vec![a, a * ratio])?).ctx(name)?
        }
        Spec::Mathprog(_) if name == "lp.json" => {
            let t = rng.gen_range(0.0..2.0);
            let p = vec![vec![vec![1.0 - t], vec![t - 1.0]], vec![vec![], vec![]]];
            DualPoint {
                p: LeafProcess::new(tree, vec![1, 0], p).ctx(name)?,
                y: scalar_rv(tree, vec![t, 2.0 - t])?,
            }
        }
        Spec::Mathprog(_) => DualPoint {
            p: LeafProcess::new(tree, vec![1], vec![vec![vec![0.0]]]).ctx(name)?,
            y: scalar_rv(tree, vec![rng.gen_range(0.05..3.0)])?,
        },
        Spec::Stopping(spec) => {
            let (y, _) = stopping_dual(tree, &spec.reward, rng)?;
            let raw = (0..tree.num_stages()).map(|_| y.iter().map(|&v| vec![v]).collect()).collect();
            let raw = LeafProcess::new(tree, vec![1; tree.num_stages()], raw).ctx(name)?;
            DualPoint { p: tree.orthogonal_part(&raw).ctx(name)?, y: scalar_rv(tree, y)? }
        }
        Spec::Control(spec) => {
            ensure!(tree.num_nodes() == 3, "{name}: expected the binomial tree");
            let by_node = if spec.initial_state.is_some() {
                vec![vec![], vec![rng.gen_range(-3.0..3.0)], vec![rng.gen_range(-3.0..3.0)]]
            } else {
                // a free initial state forces E y₁ = 0
                let a = rng.gen_range(-3.0..3.0);
                vec![vec![], vec![a], vec![-a]]
            };
            let y = AdaptedProcess::from_node_vectors(tree, vec![0, 1], &by_node).ctx(name)?;
            control_dual_from_reduced(inst, spec, &y).ctx(name)?
        }
        Spec::Lagrange(spec) => {
            // y = −(S + Z) with S the Snell envelope and Z ≥ 0 pathwise nonincreasing
            let reward = fixtures::stopping().1.reward;
            let (_, s) = stopping_dual(tree, &reward, rng)?;
            let mut z = vec![0.0; tree.num_nodes()];
            let mut by_node = vec![vec![0.0]; tree.num_nodes()];
            for node in 0..tree.num_nodes() {
                let cap = tree.parent(node).map_or(1.0, |p| z[p]);
                z[node] = cap * rng.gen_range(0.0..1.0);
                by_node[node] = vec![-(s.node_value(tree, node)[0] + z[node])];
            }
            let y = AdaptedProcess::from_node_vectors(tree, vec![1; tree.num_stages()], &by_node).ctx(name)?;
            lagrange_dual_from_reduced(inst, spec, &y).ctx(name)?
        }
        Spec::Generic(_) => {
            let a = rng.gen_range(-3.0..3.0);
            DualPoint {
                p: LeafProcess::new(tree, vec![1, 0], vec![vec![vec![-a], vec![a]], vec![vec![], vec![]]]).ctx(name)?,
                y: scalar_rv(tree, vec![a, -a])?,
            }
        }
    };
    Ok(Some(d))
}
