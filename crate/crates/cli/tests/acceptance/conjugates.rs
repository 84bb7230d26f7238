use std::time::Instant;

use stochdual::convex::{conjugate_numeric_oracle, grid_maximum};
use stochdual::{ConvexFunction, ExtReal, LossKind, ScalarLoss};

use crate::util::{ensure, Ctx, Outcome};

const TOL: f64 = 5e-3;

struct Case {
    name: &'static str,
    f: ConvexFunction,
    /// box for the primal grid search
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
    finite: Vec<Vec<f64>>,
    infinite: Vec<Vec<f64>>,
    /// biconjugate points, and a parametrization of a box covering ∂f there
    xs: Vec<Vec<f64>>,
    t_lo: Vec<f64>,
    t_hi: Vec<f64>,
    param: fn(&[f64]) -> Vec<f64>,
}

fn identity(t: &[f64]) -> Vec<f64> {
    t.to_vec()
}

fn square_grid(lo: f64, hi: f64, k: usize) -> Vec<Vec<f64>> {
    let at = |i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    (0..k).flat_map(|i| (0..k).map(move |j| vec![at(i), at(j)])).collect()
}

fn points(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

#[allow(clippy::too_many_arguments)]
fn case(
    name: &'static str,
    f: ConvexFunction,
    x_box: (f64, f64),
    finite: Vec<Vec<f64>>,
    infinite: Vec<Vec<f64>>,
    xs: Vec<Vec<f64>>,
    t_box: (Vec<f64>, Vec<f64>),
    param: fn(&[f64]) -> Vec<f64>,
) -> Case {
    let n = f.dim();
    Case { name, f, x_lo: vec![x_box.0; n], x_hi: vec![x_box.1; n], finite, infinite, xs, t_lo: t_box.0, t_hi: t_box.1, param }
}

fn catalogue() -> Vec<Case> {
    let loss = |l: ScalarLoss| ConvexFunction::from(l);
    let sym = |r: f64, n: usize| (vec![-r; n], vec![r; n]);
    vec![
        case(
            "affine",
            ConvexFunction::affine(vec![1.0, -0.5], 0.3),
            (-6.0, 6.0),
            vec![vec![1.0, -0.5]],
            vec![vec![1.5, -0.5], vec![0.0, 0.0]],
            vec![vec![0.5, 1.0], vec![-1.0, 2.0]],
            (vec![], vec![]),
            |_| vec![1.0, -0.5],
        ),
        case(
            "quadratic",
            ConvexFunction::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.1, -0.2], 0.3),
            (-6.0, 6.0),
            square_grid(-2.0, 2.0, 5),
            vec![],
            vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-0.5, 0.7]],
            sym(4.0, 2),
            identity,
        ),
        case(
            "singular quadratic",
            ConvexFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 1.0], 0.0),
            (-6.0, 6.0),
            vec![vec![-1.5, 1.0], vec![0.0, 1.0], vec![0.7, 1.0], vec![2.0, 1.0]],
            vec![vec![0.0, 0.0], vec![1.0, 2.0]],
            vec![vec![0.3, 2.0], vec![-1.0, -1.0]],
            sym(4.0, 1),
            |t| vec![t[0], 1.0],
        ),
        case(
            "polyhedron",
            ConvexFunction::polyhedron(
                2,
                vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
                vec![0.0, 0.0, 1.0],
                vec![],
                vec![],
            ),
            (-0.5, 1.5),
            square_grid(-2.0, 2.0, 5),
            vec![],
            vec![vec![0.2, 0.3], vec![0.5, 0.1]],
            sym(3.0, 2),
            identity,
        ),
        case(
            "polyhedron with equalities",
            ConvexFunction::polyhedron(
                2,
                vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
                vec![1.0, 1.0],
                vec![vec![1.0, -1.0]],
                vec![0.0],
            ),
            (-1.5, 1.5),
            square_grid(-2.0, 2.0, 5),
            vec![],
            vec![vec![0.3, 0.3], vec![-0.8, -0.8]],
            sym(3.0, 2),
            identity,
        ),
        case(
            "max_affine",
            ConvexFunction::max_affine(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]], vec![0.0, 0.5, -0.2]),
            (-6.0, 6.0),
            vec![vec![0.3, 0.1], vec![-0.4, -0.4], vec![0.3, -0.2], vec![0.0, 0.0]],
            vec![vec![1.0, 1.0], vec![-2.0, 0.0]],
            vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![0.1, -0.4]],
            sym(1.2, 2),
            identity,
        ),
        case(
            "support_box",
            ConvexFunction::support_box(vec![-1.0, 0.0], vec![1.0, 2.0]),
            (-5.0, 5.0),
            vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![-0.9, 1.9]],
            vec![vec![1.5, 1.0], vec![0.0, -0.6]],
            vec![vec![0.5, -1.0], vec![-2.0, 3.0]],
            (vec![-1.0, 0.0], vec![1.0, 2.0]),
            identity,
        ),
        case(
            "square loss",
            loss(ScalarLoss::square()),
            (-6.0, 6.0),
            points(&[-2.0, -0.5, 0.0, 1.0, 2.5]),
            vec![],
            points(&[-1.0, 0.5, 2.0]),
            sym(5.0, 1),
            identity,
        ),
        case(
            "scaled shifted square loss",
            loss(ScalarLoss::new(LossKind::Square, 2.0, 0.5)),
            (-6.0, 6.0),
            points(&[-2.0, 0.0, 1.5]),
            vec![],
            points(&[-1.0, 1.0]),
            sym(8.0, 1),
            identity,
        ),
        case(
            "shortfall square loss",
            loss(ScalarLoss::shortfall_square()),
            (-6.0, 6.0),
            points(&[0.0, 0.5, 2.0]),
            points(&[-0.5, -1.0]),
            points(&[-1.0, 0.5, 2.0]),
            (vec![-1.0], vec![4.0]),
            identity,
        ),
        case(
            "exponential loss",
            loss(ScalarLoss::exponential()),
            (-10.0, 5.0),
            points(&[0.2, 1.0, 3.0]),
            points(&[-0.5]),
            points(&[-1.0, 0.0, 1.0]),
            (vec![0.0], vec![5.0]),
            identity,
        ),
        case(
            "hinge loss",
            loss(ScalarLoss::hinge()),
            (-6.0, 6.0),
            points(&[0.0, 0.3, 1.0]),
            points(&[1.5, -0.5]),
            points(&[-1.0, 0.5, 2.0]),
            (vec![-0.5], vec![1.5]),
            identity,
        ),
        case(
            "linear loss on an interval",
            loss(ScalarLoss::linear(2.0, -1.0, 3.0)),
            (-5.0, 5.0),
            points(&[-1.0, 2.0, 4.0]),
            vec![],
            points(&[0.0, 2.0]),
            (vec![-10.0], vec![14.0]),
            identity,
        ),
        case(
            "sum",
            ConvexFunction::sum(vec![ConvexFunction::half_norm_squared(2), ConvexFunction::nonnegative_orthant(2)]),
            (-1.0, 6.0),
            square_grid(-2.0, 2.0, 5),
            vec![],
            vec![vec![0.5, 1.0], vec![2.0, 0.3]],
            sym(4.0, 2),
            identity,
        ),
        case(
            "affine_pre",
            ConvexFunction::affine_pre(vec![vec![1.0, 2.0]], vec![-1.0], loss(ScalarLoss::square())),
            (-6.0, 6.0),
            vec![vec![-1.0, -2.0], vec![0.5, 1.0], vec![1.5, 3.0]],
            vec![vec![1.0, 0.0]],
            vec![vec![1.0, 1.0], vec![0.0, -1.0]],
            sym(6.0, 1),
            |t| vec![t[0], 2.0 * t[0]],
        ),
        case(
            "separable",
            ConvexFunction::separable(vec![loss(ScalarLoss::square()), loss(ScalarLoss::hinge())]),
            (-6.0, 6.0),
            [-1.0, 0.0, 2.0].iter().flat_map(|&a| [0.0, 0.5, 1.0].map(|b| vec![a, b])).collect(),
            vec![vec![0.0, 2.0]],
            vec![vec![1.0, -1.0], vec![-0.5, 2.0]],
            (vec![-4.0, -0.5], vec![4.0, 1.5]),
            identity,
        ),
        case(
            "scaled",
            ConvexFunction::scaled(2.0, ConvexFunction::max_affine(vec![vec![1.0], vec![-1.0]], vec![0.0, 1.0])),
            (-6.0, 6.0),
            points(&[-1.5, 0.0, 1.0, 2.0]),
            points(&[3.0]),
            points(&[0.0, 0.5, 2.0]),
            (vec![-2.5], vec![2.5]),
            identity,
        ),
        case(
            "nondecreasing_pre",
            ConvexFunction::nondecreasing_pre(
                ScalarLoss::hinge(),
                ConvexFunction::quadratic(vec![vec![1.0]], vec![0.0], -1.0),
            ),
            (-8.0, 8.0),
            points(&[-2.0, -0.5, 0.0, 1.0, 3.0]),
            vec![],
            points(&[0.0, 1.0, 2.0]),
            sym(4.0, 1),
            identity,
        ),
        case(
            "nondecreasing_pre, exponential outer",
            ConvexFunction::nondecreasing_pre(ScalarLoss::exponential(), ConvexFunction::affine(vec![1.0], -1.0)),
            (-10.0, 5.0),
            points(&[0.5, 2.0]),
            points(&[-1.0]),
            points(&[0.0, 1.0]),
            (vec![0.0], vec![4.0]),
            identity,
        ),
        case(
            "sublevel",
            ConvexFunction::sublevel(ConvexFunction::quadratic(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![0.0, 0.0],
                -1.0,
            )),
            (-2.0, 2.0),
            square_grid(-2.0, 2.0, 5),
            vec![],
            vec![vec![0.3, 0.4], vec![-1.0, 0.2]],
            sym(3.0, 2),
            identity,
        ),
    ]
}

/// Coarse-to-fine grid search for a concave objective: 21 points per axis,
/// halving the box around the incumbent. One-dimensional boxes are scanned.
fn zoom_maximum(lo: &[f64], hi: &[f64], obj: impl Fn(&[f64]) -> Option<f64>) -> ExtReal {
    if lo.len() < 2 {
        return grid_maximum(lo, hi, 2e-3, obj);
    }
    const K: usize = 21;
    let (mut l, mut h) = (lo.to_vec(), hi.to_vec());
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        for i in 0..K {
            for j in 0..K {
                let t = [l[0] + (h[0] - l[0]) * i as f64 / (K - 1) as f64, l[1] + (h[1] - l[1]) * j as f64 / (K - 1) as f64];
                if let Some(v) = obj(&t) {
                    if best.as_ref().map_or(true, |(b, _)| v > *b) {
                        best = Some((v, t.to_vec()));
                    }
                }
            }
        }
        let Some((_, centre)) = &best else { return ExtReal::NegInf };
        if (0..2).all(|i| (h[i] - l[i]) / (K - 1) as f64 <= 1e-4) {
            break;
        }
        for i in 0..2 {
            let half = 0.25 * (h[i] - l[i]);
            l[i] = (centre[i] - half).max(lo[i]);
            h[i] = (centre[i] + half).min(hi[i]);
        }
    }
    best.map_or(ExtReal::NegInf, |(b, _)| ExtReal::Finite(b))
}

fn oracle(c: &Case, v: &[f64], grow: f64) -> ExtReal {
    let lo: Vec<f64> = c.x_lo.iter().map(|x| x * grow).collect();
    let hi: Vec<f64> = c.x_hi.iter().map(|x| x * grow).collect();
    let res = if v.len() == 1 { 1e-3 } else { 1e-4 };
    conjugate_numeric_oracle(&c.f, v, &lo, &hi, res)
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut routes = std::collections::BTreeMap::new();
    for c in catalogue() {
        let name = c.name;
        for v in &c.finite {
            let conj = c.f.conjugate(v).ctx(name)?;
            *routes.entry(format!("{:?}", conj.exactness)).or_insert(0) += 1;
            let Some(value) = conj.value.finite() else {
                return Err(format!("{name}: f*({v:?}) = {:?}, expected finite", conj.value));
            };
            let Some(brute) = oracle(&c, v, 1.0).finite() else {
                return Err(format!("{name}: oracle at {v:?} found no point of dom f"));
            };
            ensure!((value - brute).abs() <= TOL, "{name}: f*({v:?}) = {value}, oracle {brute}");
            worst = worst.max((value - brute).abs());
            checks += 1;
        }
        for v in &c.infinite {
            let conj = c.f.conjugate(v).ctx(name)?;
            ensure!(conj.value == ExtReal::PosInf, "{name}: f*({v:?}) = {:?}, expected +∞", conj.value);
            // the grid supremum keeps growing with the box
            let (small, large) = (oracle(&c, v, 1.0).to_f64(), oracle(&c, v, 4.0).to_f64());
            ensure!(large - small >= 1.0, "{name}: oracle at {v:?} does not diverge ({small} → {large})");
            checks += 1;
        }
        for x in &c.xs {
            let fx = c.f.eval(x).finite().ok_or_else(|| format!("{name}: {x:?} outside dom f"))?;
            let bi = zoom_maximum(&c.t_lo, &c.t_hi, |t| {
                let v = (c.param)(t);
                let conj = c.f.conjugate(&v).ok()?.value.finite()?;
                Some(v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - conj)
            });
            let Some(bi) = bi.finite() else {
                return Err(format!("{name}: f**({x:?}) = {bi:?}"));
            };
            ensure!((bi - fx).abs() <= TOL, "{name}: f**({x:?}) = {bi}, f = {fx}");
            worst = worst.max((bi - fx).abs());
            checks += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!(
        "{} variants, {checks} checks, max deviation {worst:.2e}, routes {routes:?}, {secs:.2}s",
        catalogue().len()
    ))
}
