use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochdual::apps::{build_mathprog, mathprog_kkt_check, MathProgSpec};
use stochdual::solve::{solve, CertificateStatus, SolveOptions};
use stochdual::{fixtures, ScenarioTree};

use crate::util::{ensure, finite, solve_dense, Ctx, Outcome};

const INSTANCES: usize = 20;
const MAX_VARS: usize = 8;
const TOL: f64 = 1e-8;

/// The LP over node variables: min c·x subject to rows a·x ≤ b.
struct Lp {
    c: Vec<f64>,
    rows: Vec<(Vec<f64>, f64)>,
}

fn node_offsets(tree: &ScenarioTree, dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(tree.num_nodes());
    let mut next = 0;
    for n in 0..tree.num_nodes() {
        off.push(next);
        next += dims[tree.stage(n)];
    }
    off
}

/// Column of each path coordinate of a leaf.
fn path_columns(tree: &ScenarioTree, dims: &[usize], off: &[usize], leaf: usize) -> Vec<usize> {
    (0..tree.num_stages()).flat_map(|t| (0..dims[t]).map(move |i| off[tree.ancestor(leaf, t)] + i)).collect()
}

fn extensive_form(tree: &ScenarioTree, spec: &MathProgSpec) -> Lp {
    let off = node_offsets(tree, &spec.dims);
    let nvars = (0..tree.num_nodes()).map(|n| spec.dims[tree.stage(n)]).sum();
    let mut c = vec![0.0; nvars];
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for leaf in 0..tree.num_leaves() {
        let cols = path_columns(tree, &spec.dims, &off, leaf);
        let (obj, _) = spec.objective[leaf].as_affine().expect("affine objective");
        for (k, &col) in cols.iter().enumerate() {
            c[col] += tree.leaf_prob(leaf) * obj[k];
        }
        for g in &spec.constraints[leaf] {
            let (a, beta) = g.as_affine().expect("affine constraint");
            let mut row = vec![0.0; nvars];
            for (k, &col) in cols.iter().enumerate() {
                row[col] += a[k];
            }
            let row = (row, -beta);
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
    Lp { c, rows }
}

/// Best vertex, or None when no basis is feasible.
fn enumerate_vertices(lp: &Lp) -> Option<f64> {
    let n = lp.c.len();
    let m = lp.rows.len();
    if n > m {
        return None;
    }
    let mut pick: Vec<usize> = (0..n).collect();
    let mut best: Option<f64> = None;
    loop {
        let a = pick.iter().map(|&i| lp.rows[i].0.clone()).collect();
        let b = pick.iter().map(|&i| lp.rows[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            let feasible = lp.rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= b + 1e-9);
            if feasible {
                let val: f64 = lp.c.iter().zip(&x).map(|(u, v)| u * v).sum();
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
        // next n-subset in lexicographic order
        let Some(i) = (0..n).rev().find(|&i| pick[i] < m - n + i) else { break };
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
    best
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut done, mut infeasible, mut largest, mut attempts) = (0, 0, 0, 0);
    while done < INSTANCES {
        attempts += 1;
        ensure!(attempts < 500, "only {done} feasible programs in {attempts} draws");
        let (tree, spec) = fixtures::random_lp(&mut rng, MAX_VARS);
        let label = format!("program {attempts}");
        let inst = build_mathprog(&tree, &spec).ctx(&label)?;
        let lp = extensive_form(&tree, &spec);
        let cert = solve(&inst, &SolveOptions::default()).ctx(&label)?;
        let Some(opt) = enumerate_vertices(&lp) else {
            ensure!(cert.status == CertificateStatus::PrimalInfeasible, "{label}: no vertex but status {}", cert.status);
            infeasible += 1;
            continue;
        };
        ensure!(cert.status == CertificateStatus::Optimal, "{label}: optimum {opt} but status {} (primal {:?}, dual {:?}, gap {:?}, orth {:?}, fenchel {:?})", cert.status, cert.primal, cert.dual, cert.gap, cert.orth_residuals, cert.per_leaf_fenchel_residual);
        let (primal, dual) = (finite(cert.primal, &label)?, finite(cert.dual, &label)?);
        ensure!((primal - opt).abs() <= TOL, "{label}: primal {primal}, vertices {opt}");
        ensure!((dual - opt).abs() <= TOL, "{label}: dual {dual}, vertices {opt}");

        // c + A*y = p and y ≥ 0 in every scenario
        for leaf in 0..tree.num_leaves() {
            let (c, _) = spec.objective[leaf].as_affine().expect("affine objective");
            let p = cert.d.p.path(leaf);
            let y = cert.d.y.value(leaf);
            for (k, (ck, pk)) in c.iter().zip(&p).enumerate() {
                let ay: f64 = spec.constraints[leaf].iter().zip(y).map(|(g, yj)| g.as_affine().unwrap().0[k] * yj).sum();
                ensure!((ck + ay - pk).abs() <= TOL, "{label}: leaf {leaf} stationarity off by {:e}", ck + ay - pk);
            }
            ensure!(y.iter().all(|&v| v >= -TOL), "{label}: leaf {leaf} has a negative multiplier {y:?}");
        }
        ensure!(mathprog_kkt_check(&inst, &spec, &cert.x, &cert.d, TOL).ctx(&label)?, "{label}: KKT check fails");
        largest = largest.max(lp.c.len());
        done += 1;
    }
    Ok(format!(
        "{done} programs with up to {largest} variables agree with vertex enumeration ({infeasible} infeasible draws also agree), {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}
