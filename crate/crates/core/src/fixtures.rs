//! Small reference problems and seeded random generators for tests and demos.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::apps::{ControlSpec, HedgingSpec, LagrangeSpec, MathProgSpec, StoppingSpec};
use crate::convex::{ConvexFunction, ScalarLoss};
use crate::scalar::Scalar;
use crate::tree::ScenarioTree;

/// One root and two equally likely children.
pub fn binomial() -> ScenarioTree {
    ScenarioTree::new(vec![None, Some(0), Some(0)], vec![1.0, 0.5, 0.5]).expect("valid tree")
}

fn market(down: f64, loss: ScalarLoss) -> HedgingSpec {
    HedgingSpec {
        prices: vec![vec![0.0], vec![1.0], vec![down]],
        claim: vec![1.0, 0.0],
        static_payoffs: vec![],
        static_cost: None,
        loss,
        constraints: None,
    }
}

/// Δs = (1, −0.5), c = (1, 0), V = ½z². Optimum x₀ = 0.8 with value 0.05.
pub fn hedging() -> (ScenarioTree, HedgingSpec) {
    (binomial(), market(-0.5, ScalarLoss::square()))
}

/// Δs = (1, 0.5) with the decreasing loss V(z) = −z: the primal is unbounded.
pub fn arbitrage() -> (ScenarioTree, HedgingSpec) {
    (binomial(), market(0.5, ScalarLoss::linear(-1.0, f64::NEG_INFINITY, f64::INFINITY)))
}

/// Δs = (1, 0.5) with V = ½(z⁺)², bounded below: zero gap, but no-arbitrage fails.
pub fn arbitrage_bounded() -> (ScenarioTree, HedgingSpec) {
    (binomial(), market(0.5, ScalarLoss::shortfall_square()))
}

/// Hedging with one static asset c̄ = (1, 0.3) traded at bid 0.4 and ask 0.6.
pub fn hedging_static() -> (ScenarioTree, HedgingSpec) {
    let mut spec = market(-0.5, ScalarLoss::shortfall_square());
    spec.static_payoffs = vec![vec![1.0], vec![0.3]];
    spec.static_cost = Some(ConvexFunction::support_box(vec![0.4], vec![0.6]));
    (binomial(), spec)
}

/// minimize E x₀ subject to x₀ ≥ b with b = (1, 2). Optimum 2.
pub fn lp() -> (ScenarioTree, MathProgSpec) {
    let spec = MathProgSpec {
        dims: vec![1, 0],
        objective: vec![ConvexFunction::affine(vec![1.0], 0.0); 2],
        constraints: vec![
            vec![ConvexFunction::affine(vec![-1.0], 1.0)],
            vec![ConvexFunction::affine(vec![-1.0], 2.0)],
        ],
        num_inequalities: 1,
    };
    (binomial(), spec)
}

/// minimize −x subject to ½x² ≤ 2. Optimum −2 with multiplier 0.5.
pub fn nonlinear_program() -> (ScenarioTree, MathProgSpec) {
    let spec = MathProgSpec {
        dims: vec![1],
        objective: vec![ConvexFunction::affine(vec![-1.0], 0.0)],
        constraints: vec![vec![ConvexFunction::quadratic(vec![vec![1.0]], vec![0.0], -2.0)]],
        num_inequalities: 1,
    };
    (ScenarioTree::deterministic(), spec)
}

/// R₀ = 1, R₁ = (0, 3). The Snell envelope is S₀ = 1.5.
pub fn stopping() -> (ScenarioTree, StoppingSpec) {
    (binomial(), StoppingSpec { reward: vec![1.0, 0.0, 3.0] })
}

/// N = M = 1, A = 0, B = 1, W₁ = (1, −1), L₀ = ½U², L₁ = ½X². Optimum 0.5.
pub fn lqr(pin: Option<f64>) -> (ScenarioTree, ControlSpec) {
    let half_u = ConvexFunction::quadratic(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0);
    let half_x = ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 0.0], 0.0);
    let spec = ControlSpec {
        state_dim: 1,
        control_dim: 1,
        a: vec![vec![], vec![vec![0.0]], vec![vec![0.0]]],
        b: vec![vec![], vec![vec![1.0]], vec![vec![1.0]]],
        w: vec![vec![], vec![1.0], vec![-1.0]],
        costs: vec![half_u, half_x.clone(), half_x],
        initial_state: pin.map(|x| vec![x]),
    };
    (binomial(), spec)
}

/// The stopping fixture written as a problem of Lagrange.
pub fn lagrange_stopping() -> (ScenarioTree, LagrangeSpec) {
    let (tree, spec) = stopping();
    let lag = crate::apps::stopping_as_lagrange(&tree, &spec).expect("valid rewards");
    (tree, lag)
}

/// A tree with `stages` stages whose nodes have 1 to `max_branch` children,
/// with conditional probabilities drawn as ratios of small integers.
pub fn random_tree<R: Rng>(rng: &mut R, stages: usize, max_branch: usize) -> ScenarioTree<BigRational> {
    assert!(stages >= 1 && max_branch >= 1);
    let mut parent = vec![None];
    let mut prob = vec![BigRational::from_integer(BigInt::from(1))];
    grow(rng, 0, 1, stages, max_branch, &mut parent, &mut prob);
    ScenarioTree::new(parent, prob).expect("generated tree is valid")
}

fn grow<R: Rng>(
    rng: &mut R,
    node: usize,
    depth: usize,
    stages: usize,
    max_branch: usize,
    parent: &mut Vec<Option<usize>>,
    prob: &mut Vec<BigRational>,
) {
    if depth == stages {
        return;
    }
    let k = rng.gen_range(1..=max_branch);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    for w in weights {
        let p = prob[node].clone() * BigRational::new(BigInt::from(w), BigInt::from(total));
        let child = parent.len();
        parent.push(Some(node));
        prob.push(p);
        grow(rng, child, depth + 1, stages, max_branch, parent, prob);
    }
}

/// Integer rewards in [−2, 5] per node.
pub fn random_rewards<R: Rng, F: Scalar>(rng: &mut R, tree: &ScenarioTree<F>) -> Vec<i64> {
    (0..tree.num_nodes()).map(|_| rng.gen_range(-2..=5)).collect()
}

/// min E c·x subject to A x ≥ b per leaf, with box bounds keeping it bounded.
/// At most `max_vars` decision variables across all nodes.
pub fn random_lp<R: Rng>(rng: &mut R, max_vars: usize) -> (ScenarioTree, MathProgSpec) {
    loop {
        let stages = rng.gen_range(1..=3);
        let tree = random_tree(rng, stages, 2).to_f64();
        let dims: Vec<usize> = (0..stages).map(|_| rng.gen_range(1..=2)).collect();
        let nvars: usize = (0..tree.num_nodes()).map(|n| dims[tree.stage(n)]).sum();
        if nvars > max_vars {
            continue;
        }
        let n: usize = dims.iter().sum();
        let rows = rng.gen_range(1..=3);
        let mut objective = Vec::new();
        let mut constraints = Vec::new();
        for _ in 0..tree.num_leaves() {
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
            objective.push(ConvexFunction::affine(c, 0.0));
            let mut cons = Vec::new();
            // b − A x ≤ 0
            for _ in 0..rows {
                let a: Vec<f64> = (0..n).map(|_| -(rng.gen_range(-2..=3) as f64)).collect();
                cons.push(ConvexFunction::affine(a, rng.gen_range(-3..=3) as f64));
            }
            // |x_i| ≤ 4
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[i] = sign;
                    cons.push(ConvexFunction::affine(e, -4.0));
                }
            }
            constraints.push(cons);
        }
        let num_inequalities = rows + 2 * n;
        return (tree, MathProgSpec { dims, objective, constraints, num_inequalities });
    }
}

/// A one-asset price process with integer increments in [−2, 2].
pub fn random_market<R: Rng>(rng: &mut R, stages: usize, max_branch: usize) -> (ScenarioTree, Vec<Vec<f64>>) {
    let tree = random_tree(rng, stages, max_branch).to_f64();
    let mut prices = vec![vec![0.0]; tree.num_nodes()];
    for node in 0..tree.num_nodes() {
        if let Some(parent) = tree.parent(node) {
            prices[node] = vec![prices[parent][0] + rng.gen_range(-2..=2) as f64];
        }
    }
    (tree, prices)
}

/// An LQR problem with N = M = 1 on a random tree: costs ½(qX² + rU²) and noise in [−1, 1].
pub fn random_lqr<R: Rng>(rng: &mut R, stages: usize, max_branch: usize) -> (ScenarioTree, ControlSpec) {
    let tree = random_tree(rng, stages, max_branch).to_f64();
    let n = tree.num_nodes();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for node in 0..n {
        let root = tree.stage(node) == 0;
        a.push(if root { vec![] } else { vec![vec![rng.gen_range(-0.5..0.5)]] });
        b.push(if root { vec![] } else { vec![vec![rng.gen_range(0.5..1.5)]] });
        w.push(if root { vec![] } else { vec![rng.gen_range(-1.0..1.0)] });
        let (q, r) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        costs.push(ConvexFunction::quadratic(vec![vec![q, 0.0], vec![0.0, r]], vec![0.0, 0.0], 0.0));
    }
    let spec = ControlSpec { state_dim: 1, control_dim: 1, a, b, w, costs, initial_state: Some(vec![1.0]) };
    (tree, spec)
}
