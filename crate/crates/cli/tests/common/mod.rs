#![allow(dead_code)]

use std::path::PathBuf;
use std::str::FromStr;

use num_rational::BigRational;
use stochdual::apps::StoppingSpec;
use stochdual::fixtures;
use stochdual::{ConvexFunction, ScenarioTree};
use stochdual_cli::format::GenericSpec;
use stochdual_cli::{ProblemFile, Spec};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

fn rational_stopping() -> ProblemFile {
    let q = |s: &str| BigRational::from_str(s).unwrap();
    // three equally likely branches, then a fair coin in each
    let parents = vec![None, Some(0), Some(1), Some(1), Some(0), Some(4), Some(4), Some(0), Some(7), Some(7)];
    let probs = ["1", "1/3", "1/6", "1/6", "1/3", "1/6", "1/6", "1/3", "1/6", "1/6"].map(q).to_vec();
    let tree = ScenarioTree::new(parents, probs).unwrap();
    let reward = vec![1.0, 2.0, 0.0, 4.0, 0.0, 3.0, -1.0, 1.0, 1.0, 5.0];
    ProblemFile::rational(&tree, Spec::Stopping(StoppingSpec { reward }))
}

fn generic() -> ProblemFile {
    // ½(x₀ − u)² with ū = (1, 3): x₀ = 2, value 0.5
    let f = ConvexFunction::quadratic(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.0, 0.0], 0.0);
    let spec = GenericSpec { dims: vec![1, 0], integrands: vec![f.clone(), f], ubar: vec![vec![1.0], vec![3.0]] };
    ProblemFile::float(&fixtures::binomial(), Spec::Generic(spec))
}

/// Every bundled problem file with the problem it must contain.
pub fn bundled() -> Vec<(&'static str, ProblemFile)> {
    let hedging = |(t, s)| ProblemFile::float(&t, Spec::Hedging(s));
    let mathprog = |(t, s)| ProblemFile::float(&t, Spec::Mathprog(s));
    let (st, ss) = fixtures::stopping();
    let (lt, ls) = fixtures::lagrange_stopping();
    let control = |(t, s)| ProblemFile::float(&t, Spec::Control(s));
    vec![
        ("hedging.json", hedging(fixtures::hedging())),
        ("hedging_static.json", hedging(fixtures::hedging_static())),
        ("arbitrage.json", hedging(fixtures::arbitrage())),
        ("arbitrage_shortfall.json", hedging(fixtures::arbitrage_bounded())),
        ("lp.json", mathprog(fixtures::lp())),
        ("nonlinear.json", mathprog(fixtures::nonlinear_program())),
        ("stopping.json", ProblemFile::float(&st, Spec::Stopping(ss))),
        ("stopping_rational.json", rational_stopping()),
        ("lqr.json", control(fixtures::lqr(None))),
        ("lqr_pinned.json", control(fixtures::lqr(Some(0.0)))),
        ("lagrange_stopping.json", ProblemFile::float(&lt, Spec::Lagrange(ls))),
        ("generic.json", generic()),
    ]
}

/// Bundled problems whose optimum is finite and attained.
pub fn solvable() -> Vec<(&'static str, ProblemFile)> {
    bundled().into_iter().filter(|(name, _)| *name != "arbitrage.json").collect()
}

/// The hedging file with the second child's probability changed to 0.4.
pub fn malformed_text() -> String {
    let mut v: serde_json::Value = serde_json::from_str(&fixtures_bundled_text("hedging.json")).unwrap();
    v["tree"]["probs"][2] = serde_json::json!(0.4);
    let mut text = serde_json::to_string_pretty(&v).unwrap();
    text.push('\n');
    text
}

pub fn fixtures_bundled_text(name: &str) -> String {
    bundled().into_iter().find(|(n, _)| *n == name).unwrap().1.canonical()
}
