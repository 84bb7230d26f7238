use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochdual::apps::{
    build_control, build_hedging, calibration_check, control_maximum_principle_check, control_reduced_dual_value,
    no_arbitrage_check, ControlSpec, HedgingSpec,
};
use stochdual::certify::{verify, Verdict};
use stochdual::solve::{solve, Backend, CertificateStatus, SolveOptions};
use stochdual::{fixtures, AdaptedProcess, ConvexFunction, RandomVariable, ScalarLoss, ScenarioTree};
use stochdual_cli::commands::{solve_problem, Options, DEFAULT_TOL};
use stochdual_cli::Spec;

use crate::util::{ensure, finite, load, solve_dense, Ctx, Outcome};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn hedging() -> Outcome {
    const TOL: f64 = 1e-7;
    let file = load("hedging.json")?;
    let Spec::Hedging(spec) = &file.spec else { return Err("hedging.json holds another kind".into()) };
    let opts = Options { tol: DEFAULT_TOL, backend: Backend::Auto, exact: false };
    let (cert, code) = solve_problem(&file, &opts).map_err(|e| format!("{e:?}"))?;
    ensure!(code == 0 && cert.status == CertificateStatus::Optimal, "status {} (exit {code})", cert.status);

    // the instance prepends a trivial root, so the trading stage is 1
    let x0 = cert.x[1][0];
    let (primal, gap) = (finite(cert.primal, "primal")?, finite(cert.gap, "gap")?);
    let y = [cert.y[0][0], cert.y[1][0]];
    let p = [cert.p[1][0][0], cert.p[1][1][0]];
    ensure!(close(x0, 0.8, TOL), "x₀ = {x0}");
    ensure!(close(primal, 0.05, TOL), "optimal value {primal}");
    ensure!(close(y[0], 0.2, TOL) && close(y[1], 0.4, TOL), "y = {y:?}");
    ensure!(close(p[0], -0.2, TOL) && close(p[1], 0.2, TOL), "p₀ = {p:?}");
    ensure!(gap.abs() <= 1e-8, "gap {gap:e}");

    let inst = file.build().ctx("build")?;
    let (x, d) = cert.pair(&inst).ctx("certificate")?;
    let report = verify(&inst, &x, &d, 1e-8).ctx("verify")?;
    ensure!(report.verdict == Verdict::OptimalPair, "verdict {}", report.verdict);

    let tree = file.scenario_tree().ctx("tree")?;
    let density = RandomVariable::scalar(&tree, y.to_vec()).ctx("y")?;
    let no_static = RandomVariable::new(&tree, 0, vec![vec![]; tree.num_leaves()]).ctx("c̄")?;
    ensure!(
        calibration_check(&tree, &density, &no_static, &ConvexFunction::zero(0), 1e-8).ctx("calibration")?,
        "calibration fails"
    );
    let prices = AdaptedProcess::from_node_vectors(&tree, vec![1; tree.num_stages()], &spec.prices).ctx("prices")?;
    let na = no_arbitrage_check(&tree, &prices).ctx("no-arbitrage")?;
    ensure!(na.holds, "no-arbitrage fails with gain {}", na.max_gain);
    Ok(format!("x₀ = {x0:.9}, value {primal:.9}, y = ({:.9}, {:.9}), p₀ = ({:.9}, {:.9}), gap {gap:.1e}", y[0], y[1], p[0], p[1]))
}

/// Maximizes a smooth concave function by Newton steps with difference quotients.
fn newton_max(n: usize, f: impl Fn(&[f64]) -> Result<f64, String>) -> Result<(Vec<f64>, f64), String> {
    let h = 1e-3;
    let mut z = vec![0.0; n];
    for _ in 0..4 {
        let at = |dz: &[(usize, f64)]| {
            let mut w = z.clone();
            for &(i, s) in dz {
                w[i] += s;
            }
            f(&w)
        };
        let f0 = at(&[])?;
        let mut g = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            let (fp, fm) = (at(&[(i, h)])?, at(&[(i, -h)])?);
            g[i] = (fp - fm) / (2.0 * h);
            hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                    + at(&[(i, -h), (j, -h)])?)
                    / (4.0 * h * h);
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        let step = solve_dense(hess, g.iter().map(|v| -v).collect()).ok_or("singular Hessian")?;
        for (zi, s) in z.iter_mut().zip(step) {
            *zi += s;
        }
    }
    let best = f(&z)?;
    Ok((z, best))
}

fn control_case(label: &str, tree: &ScenarioTree, spec: &ControlSpec, free_binomial: bool) -> Result<(f64, f64), String> {
    const TOL: f64 = 1e-6;
    let inst = build_control(tree, spec).ctx(label)?;
    let later: Vec<usize> = (0..tree.num_nodes()).filter(|&n| tree.stage(n) > 0).collect();
    let multiplier = |z: &[f64]| -> Result<AdaptedProcess, String> {
        let mut by_node = vec![vec![]; tree.num_nodes()];
        if free_binomial {
            // a free initial state forces E y₁ = 0 on the two-leaf tree
            by_node[1] = vec![z[0]];
            by_node[2] = vec![-z[0]];
        } else {
            for (k, &n) in later.iter().enumerate() {
                by_node[n] = vec![z[k]];
            }
        }
        let mut dims = vec![spec.state_dim; tree.num_stages()];
        dims[0] = 0;
        AdaptedProcess::from_node_vectors(tree, dims, &by_node).ctx(label)
    };
    let reduced = |z: &[f64]| -> Result<f64, String> {
        finite(control_reduced_dual_value(&inst, spec, &multiplier(z)?).ctx(label)?, label)
    };
    let (_, best) = newton_max(if free_binomial { 1 } else { later.len() }, reduced)?;

    let cert = solve(&inst, &SolveOptions::default()).ctx(label)?;
    ensure!(cert.status == CertificateStatus::Optimal, "{label}: status {}", cert.status);
    let (primal, dual) = (finite(cert.primal, label)?, finite(cert.dual, label)?);
    ensure!(close(best, dual, TOL), "{label}: reduced dual {best}, full dual {dual}");
    ensure!(close(best, primal, TOL), "{label}: reduced dual {best}, primal {primal}");
    ensure!(
        control_maximum_principle_check(&inst, spec, &cert.x, &cert.d, TOL).ctx(label)?,
        "{label}: maximum principle fails"
    );
    Ok((best, (best - dual).abs()))
}

pub fn control() -> Outcome {
    let mut worst: f64 = 0.0;
    let (tree, spec) = fixtures::lqr(None);
    let (free, e) = control_case("free initial state", &tree, &spec, true)?;
    worst = worst.max(e);
    let (tree, spec) = fixtures::lqr(Some(0.0));
    let (pinned, e) = control_case("pinned initial state", &tree, &spec, false)?;
    worst = worst.max(e);
    ensure!(close(free, 0.5, 1e-6) && close(pinned, 0.5, 1e-6), "fixture optimum {free}, {pinned}, expected 0.5");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random = 5;
    for k in 0..random {
        let stages = rng.gen_range(2..=3);
        let (tree, spec) = fixtures::random_lqr(&mut rng, stages, 2);
        let (_, e) = control_case(&format!("random LQR {k}"), &tree, &spec, false)?;
        worst = worst.max(e);
    }
    Ok(format!("2 fixtures and {random} random LQR problems, reduced vs full dual within {worst:.1e}"))
}

pub fn linearity_vs_arbitrage() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut free, mut arbitrage) = (0, 0);
    let mut k = 0;
    // random markets mostly admit arbitrage, so keep drawing until both kinds are well represented
    while free + arbitrage < 20 || free.min(arbitrage) < 8 {
        k += 1;
        ensure!(k <= 2000, "{free} arbitrage-free and {arbitrage} arbitrage markets after {k} draws");
        let stages = rng.gen_range(2..=3);
        let (tree, prices) = fixtures::random_market(&mut rng, stages, 3);
        let claim = (0..tree.num_leaves()).map(|_| rng.gen_range(-2..=2) as f64).collect();
        let spec = HedgingSpec {
            prices: prices.clone(),
            claim,
            static_payoffs: vec![],
            static_cost: None,
            loss: ScalarLoss::shortfall_square(),
            constraints: None,
        };
        let label = format!("market {k}");
        let inst = build_hedging(&tree, &spec).ctx(&label)?;
        let linear = inst.check_linearity_condition().ctx(&label)?.is_linear;
        let s = AdaptedProcess::from_node_vectors(&tree, vec![1; tree.num_stages()], &prices).ctx(&label)?;
        let na = no_arbitrage_check(&tree, &s).ctx(&label)?.holds;
        ensure!(linear == na, "{label}: linearity {linear} but no-arbitrage {na}");
        if na {
            free += 1;
        } else {
            arbitrage += 1;
        }
    }
    Ok(format!(
        "{k} markets agree ({free} arbitrage-free, {arbitrage} with arbitrage), {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}
