use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochdual::apps::{
    build_stopping, snell_envelope, stopping_certificate_check, stopping_dual_from_snell, StoppingSpec, StoppingTime,
};
use stochdual::certify::{verify, Verdict};
use stochdual::solve::{solve_primal, Backend, SolveOptions};
use stochdual::{fixtures, AdaptedProcess, ScenarioTree};
use stochdual_cli::commands::{solve_problem, Options, DEFAULT_TOL};
use stochdual_cli::{ProblemFile, Spec};

use crate::util::{ensure, finite, Ctx, Outcome};

const INSTANCES: usize = 30;
/// Trees with more stopping times than this are redrawn.
const MAX_RULES: f64 = 2e5;
const TOL: f64 = 1e-6;

/// Number of stopping times on the subtree at `node`, never stopping included.
fn count_rules(tree: &ScenarioTree<BigRational>, node: usize) -> f64 {
    let children = tree.children(node);
    let cont: f64 = if children.is_empty() { 1.0 } else { children.iter().map(|&c| count_rules(tree, c)).product() };
    1.0 + cont
}

/// Every value of E[R_τ 1{τ ≤ T} | node]·P(node) over stopping times of the subtree.
fn rule_values(tree: &ScenarioTree<BigRational>, reward: &[i64], node: usize) -> Vec<BigRational> {
    let stop = tree.prob(node).clone() * BigRational::from_integer(BigInt::from(reward[node]));
    let children = tree.children(node);
    let mut cont = vec![BigRational::zero()];
    for &c in children {
        let sub = rule_values(tree, reward, c);
        cont = cont.iter().flat_map(|a| sub.iter().map(move |b| a + b)).collect();
        cont.sort();
        cont.dedup();
    }
    cont.push(stop);
    cont
}

fn brute_force(tree: &ScenarioTree<BigRational>, reward: &[i64]) -> BigRational {
    rule_values(tree, reward, 0).into_iter().max().expect("at least one rule")
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut done, mut redrawn, mut deepest, mut most_nodes) = (0, 0, 0, 0);
    while done < INSTANCES {
        let stages = rng.gen_range(1..=4);
        let exact = fixtures::random_tree(&mut rng, stages, 3);
        let reward = fixtures::random_rewards(&mut rng, &exact);
        if count_rules(&exact, 0) > MAX_RULES {
            redrawn += 1;
            continue;
        }
        let label = format!("instance {done}");
        let best = brute_force(&exact, &reward);

        // exact Snell envelope on the rational tree
        let r_exact: Vec<BigRational> = reward.iter().map(|&r| BigRational::from_integer(BigInt::from(r))).collect();
        let s_exact = snell_envelope(&exact, &AdaptedProcess::from_node_scalars(&exact, &r_exact).ctx(&label)?).ctx(&label)?;
        ensure!(s_exact.value(0, 0)[0] == best, "{label}: Snell value {} but brute force {best}", s_exact.value(0, 0)[0]);

        // the command line in rational mode reports the same number
        let spec = StoppingSpec { reward: reward.iter().map(|&r| r as f64).collect() };
        let file = ProblemFile::rational(&exact, Spec::Stopping(spec.clone()));
        let opts = Options { tol: DEFAULT_TOL, backend: Backend::Auto, exact: true };
        let (cert, _) = solve_problem(&file, &opts).map_err(|e| format!("{label}: {e:?}"))?;
        let reported = cert.exact.as_ref().and_then(|e| e.value.clone());
        ensure!(reported == Some(best.to_string()), "{label}: exact value {reported:?}, brute force {best}");

        // the float solver attains −max E R_τ
        let tree = exact.to_f64();
        let inst = build_stopping(&tree, &spec).ctx(&label)?;
        let (_, value) = solve_primal(&inst, &SolveOptions::default()).ctx(&label)?;
        let target = best.to_f64().unwrap_or(f64::NAN);
        ensure!((finite(value, &label)? + target).abs() <= TOL, "{label}: solver {value:?}, brute force −{target}");

        // the Snell dual certifies the first time R meets S
        let r = AdaptedProcess::from_node_scalars(&tree, &spec.reward).ctx(&label)?;
        let s = snell_envelope(&tree, &r).ctx(&label)?;
        let flags = (0..tree.num_nodes())
            .map(|n| r.node_value(&tree, n)[0] >= s.node_value(&tree, n)[0])
            .collect();
        let tau = StoppingTime::from_node_flags(&tree, flags).ctx(&label)?;
        let d = stopping_dual_from_snell(&tree, &r).ctx(&label)?;
        ensure!(stopping_certificate_check(&tree, &r, &tau, &d, TOL).ctx(&label)?, "{label}: complementarity fails");
        let x = tau.indicator(&tree);
        let report = verify(&inst, &x, &d, TOL).ctx(&label)?;
        ensure!(report.verdict == Verdict::OptimalPair, "{label}: verdict {}", report.verdict);
        let gap = finite(report.gap, &label)?;
        ensure!(gap.abs() <= TOL, "{label}: gap {gap:e}");
        ensure!((finite(report.primal, &label)? + target).abs() <= TOL, "{label}: E R_τ* differs from the optimum");

        deepest = deepest.max(stages);
        most_nodes = most_nodes.max(tree.num_nodes());
        done += 1;
    }
    Ok(format!(
        "{done} trees up to {deepest} stages and {most_nodes} nodes ({redrawn} redrawn above {MAX_RULES:e} stopping times), {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}
