//! On-disk problem and certificate files.
//!
//! Both are JSON with keys in struct order. Serializing a parsed file gives
//! the canonical text, and the problem hash is the SHA-256 of that text.

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stochdual::apps::{
    build_control, build_hedging, build_lagrange, build_mathprog, build_stopping, ControlSpec, HedgingSpec,
    LagrangeSpec, MathProgSpec, StoppingSpec,
};
use stochdual::solve::{Backend, CertificateStatus};
use stochdual::{ConvexFunction, DualPoint, ExtReal, Scalar, ScenarioTree, SPInstance};
use stochdual::{AdaptedProcess, LeafProcess, RandomVariable};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMode {
    Float,
    Rational,
}

/// A probability: a number in float mode, a string like "1/3" in rational mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Float(f64),
    Exact(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    pub nodes: usize,
    pub parents: Vec<Option<usize>>,
    pub stages: Vec<usize>,
    /// Unconditional node probabilities.
    pub probs: Vec<Prob>,
}

/// An instance given directly by its integrands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericSpec {
    pub dims: Vec<usize>,
    /// f(·, ·, leaf) over (x-path, u).
    pub integrands: Vec<ConvexFunction>,
    /// ū per leaf.
    pub ubar: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spec {
    Generic(GenericSpec),
    Mathprog(MathProgSpec),
    Stopping(StoppingSpec),
    Control(ControlSpec),
    Lagrange(LagrangeSpec),
    Hedging(HedgingSpec),
}

impl Spec {
    pub fn kind(&self) -> &'static str {
        match self {
            Spec::Generic(_) => "generic",
            Spec::Mathprog(_) => "mathprog",
            Spec::Stopping(_) => "stopping",
            Spec::Control(_) => "control",
            Spec::Lagrange(_) => "lagrange",
            Spec::Hedging(_) => "hedging",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format_version: u32,
    pub numeric_mode: NumericMode,
    pub tree: TreeSection,
    pub spec: Spec,
}

fn tree_section<F: Scalar>(tree: &ScenarioTree<F>, prob: impl Fn(&F) -> Prob) -> TreeSection {
    TreeSection {
        nodes: tree.num_nodes(),
        parents: tree.parents().to_vec(),
        stages: (0..tree.num_nodes()).map(|n| tree.stage(n)).collect(),
        probs: tree.probs().iter().map(prob).collect(),
    }
}

impl ProblemFile {
    pub fn float(tree: &ScenarioTree, spec: Spec) -> ProblemFile {
        ProblemFile {
            format_version: FORMAT_VERSION,
            numeric_mode: NumericMode::Float,
            tree: tree_section(tree, |p| Prob::Float(*p)),
            spec,
        }
    }

    pub fn rational(tree: &ScenarioTree<BigRational>, spec: Spec) -> ProblemFile {
        ProblemFile {
            format_version: FORMAT_VERSION,
            numeric_mode: NumericMode::Rational,
            tree: tree_section(tree, |p| Prob::Exact(p.to_string())),
            spec,
        }
    }

    pub fn parse(text: &str) -> Result<ProblemFile, CliError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| CliError::parse(format!("problem file: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::parse(format!(
                "unsupported problem format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        file.check_tree()?;
        Ok(file)
    }

    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files always serialize");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn check_tree(&self) -> Result<(), CliError> {
        let t = &self.tree;
        if t.parents.len() != t.nodes || t.stages.len() != t.nodes || t.probs.len() != t.nodes {
            return Err(CliError::parse(format!(
                "tree lists {} nodes but has {} parents, {} stages and {} probabilities",
                t.nodes,
                t.parents.len(),
                t.stages.len(),
                t.probs.len()
            )));
        }
        let tree = match self.numeric_mode {
            NumericMode::Float => self.float_tree()?,
            NumericMode::Rational => self.exact_tree()?.to_f64(),
        };
        for (node, &stage) in t.stages.iter().enumerate() {
            if tree.stage(node) != stage {
                return Err(CliError::parse(format!(
                    "node {node} is listed at stage {stage} but its depth is {}",
                    tree.stage(node)
                )));
            }
        }
        Ok(())
    }

    fn float_tree(&self) -> Result<ScenarioTree, CliError> {
        let probs = self
            .tree
            .probs
            .iter()
            .map(|p| match p {
                Prob::Float(x) => Ok(*x),
                Prob::Exact(s) => Err(CliError::parse(format!("probability {s:?} is a string in float mode"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScenarioTree::new(self.tree.parents.clone(), probs)?)
    }

    /// The tree in exact arithmetic. Float probabilities are taken at their
    /// exact binary value, so they must sum exactly.
    pub fn exact_tree(&self) -> Result<ScenarioTree<BigRational>, CliError> {
        let probs = self
            .tree
            .probs
            .iter()
            .map(|p| match (p, self.numeric_mode) {
                (Prob::Exact(s), NumericMode::Rational) => BigRational::from_str(s.trim())
                    .map_err(|_| CliError::parse(format!("cannot read probability {s:?} as a fraction"))),
                (Prob::Float(x), NumericMode::Float) if x.is_finite() => Ok(<BigRational as Scalar>::from_float(*x)),
                (p, mode) => Err(CliError::parse(format!("probability {p:?} does not fit numeric mode {mode:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScenarioTree::new(self.tree.parents.clone(), probs)?)
    }

    pub fn scenario_tree(&self) -> Result<ScenarioTree, CliError> {
        match self.numeric_mode {
            NumericMode::Float => self.float_tree(),
            NumericMode::Rational => Ok(self.exact_tree()?.to_f64()),
        }
    }

    pub fn build(&self) -> Result<SPInstance, CliError> {
        let tree = self.scenario_tree()?;
        let inst = match &self.spec {
            Spec::Generic(g) => {
                let m = g.ubar.first().map_or(0, Vec::len);
                let ubar = RandomVariable::new(&tree, m, g.ubar.clone())?;
                SPInstance::new(tree, g.dims.clone(), g.integrands.clone(), ubar)?
            }
            Spec::Mathprog(s) => build_mathprog(&tree, s)?,
            Spec::Stopping(s) => build_stopping(&tree, s)?,
            Spec::Control(s) => build_control(&tree, s)?,
            Spec::Lagrange(s) => build_lagrange(&tree, s)?,
            Spec::Hedging(s) => build_hedging(&tree, s)?,
        };
        Ok(inst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    /// Absolute tolerance for the gap and the certificate checks.
    pub tol: f64,
    /// Feasibility tolerance used by the solver.
    pub tol_feas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Residuals {
    /// f(x, ū) + f*(p, y) − x·p − ū·y per leaf.
    pub fenchel: Vec<ExtReal>,
    /// max |E_t p_t| per stage.
    pub orth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSection {
    /// Optimal value in rational arithmetic, when a closed form exists.
    pub value: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format_version: u32,
    pub tool_version: String,
    pub problem_hash: String,
    pub status: CertificateStatus,
    pub backend: Backend,
    pub tolerances: ToleranceSection,
    pub primal: ExtReal,
    pub dual: ExtReal,
    pub gap: ExtReal,
    pub stage_dims: Vec<usize>,
    /// x per node of the instance tree.
    pub x: Vec<Vec<f64>>,
    /// p[t][leaf]
    pub p: Vec<Vec<Vec<f64>>>,
    /// y per leaf.
    pub y: Vec<Vec<f64>>,
    pub residuals: Residuals,
    pub exact: Option<ExactSection>,
}

impl CertificateFile {
    pub fn parse(text: &str) -> Result<CertificateFile, CliError> {
        let file: CertificateFile =
            serde_json::from_str(text).map_err(|e| CliError::parse(format!("certificate file: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::parse(format!(
                "unsupported certificate format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificates always serialize");
        s.push('\n');
        s
    }

    pub fn node_x(x: &AdaptedProcess, tree: &ScenarioTree) -> Vec<Vec<f64>> {
        (0..tree.num_nodes()).map(|n| x.node_value(tree, n).to_vec()).collect()
    }

    /// Rebuilds (x, p, y) on the instance tree.
    pub fn pair(&self, inst: &SPInstance) -> stochdual::Result<(AdaptedProcess, DualPoint)> {
        let tree = inst.tree();
        if self.stage_dims != inst.dims() {
            return Err(stochdual::Error::Shape(format!(
                "certificate stage dimensions {:?} differ from the problem's {:?}",
                self.stage_dims,
                inst.dims()
            )));
        }
        if self.x.len() != tree.num_nodes() {
            return Err(stochdual::Error::Shape(format!(
                "certificate has x for {} nodes, the problem has {}",
                self.x.len(),
                tree.num_nodes()
            )));
        }
        let x = AdaptedProcess::from_node_vectors(tree, inst.dims().to_vec(), &self.x)?;
        let p = LeafProcess::new(tree, inst.dims().to_vec(), self.p.clone())?;
        let y = RandomVariable::new(tree, inst.param_dim(), self.y.clone())?;
        Ok((x, DualPoint { p, y }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stochdual::fixtures;

    fn hedging_file() -> ProblemFile {
        let (tree, spec) = fixtures::hedging();
        ProblemFile::float(&tree, Spec::Hedging(spec))
    }

    #[test]
    fn canonical_text_round_trips() {
        let file = hedging_file();
        let text = file.canonical();
        let again = ProblemFile::parse(&text).unwrap();
        assert_eq!(again, file);
        assert_eq!(again.canonical(), text);
        assert_eq!(again.hash(), file.hash());
        assert_eq!(file.hash().len(), 64);
    }

    #[test]
    fn key_order_is_fixed() {
        let text = hedging_file().canonical();
        let pos = |k: &str| text.find(k).unwrap();
        assert!(pos("format_version") < pos("numeric_mode"));
        assert!(pos("numeric_mode") < pos("\"tree\""));
        assert!(pos("\"tree\"") < pos("\"spec\""));
        assert!(text.contains("\"kind\": \"hedging\""));
    }

    #[test]
    fn rational_probabilities() {
        let tree = ScenarioTree::<BigRational>::new(
            vec![None, Some(0), Some(0), Some(0)],
            ["1", "1/3", "1/3", "1/3"].iter().map(|s| BigRational::from_str(s).unwrap()).collect(),
        )
        .unwrap();
        let file = ProblemFile::rational(&tree, Spec::Stopping(StoppingSpec { reward: vec![0.0, 1.0, 2.0, 3.0] }));
        let parsed = ProblemFile::parse(&file.canonical()).unwrap();
        assert_eq!(parsed.exact_tree().unwrap(), tree);
        assert!(parsed.build().is_ok());

        let mut bad = file.clone();
        bad.tree.probs[3] = Prob::Exact("1/4".into());
        assert_eq!(ProblemFile::parse(&bad.canonical()).unwrap_err().code, 64);
        let mut mixed = file;
        mixed.tree.probs[3] = Prob::Float(1.0 / 3.0);
        assert_eq!(ProblemFile::parse(&mixed.canonical()).unwrap_err().code, 64);
    }

    #[test]
    fn malformed_trees_are_parse_errors() {
        let mut file = hedging_file();
        file.tree.probs[2] = Prob::Float(0.4);
        assert_eq!(ProblemFile::parse(&file.canonical()).unwrap_err().code, 64);

        let mut file = hedging_file();
        file.tree.stages[2] = 2;
        assert_eq!(ProblemFile::parse(&file.canonical()).unwrap_err().code, 64);

        let mut file = hedging_file();
        file.format_version = 7;
        assert_eq!(ProblemFile::parse(&file.canonical()).unwrap_err().code, 64);

        assert_eq!(ProblemFile::parse("{").unwrap_err().code, 64);
        let extra = hedging_file().canonical().replacen('{', "{\"extra\": 1,", 1);
        assert_eq!(ProblemFile::parse(&extra).unwrap_err().code, 64);
    }

    #[test]
    fn exact_float_trees_need_exact_sums() {
        let tree = ScenarioTree::new(vec![None, Some(0), Some(0), Some(0)], vec![1.0, 0.1, 0.2, 0.7]).unwrap();
        let file = ProblemFile::float(&tree, Spec::Stopping(StoppingSpec { reward: vec![0.0; 4] }));
        assert!(file.build().is_ok());
        // 0.1 + 0.2 + 0.7 is not 1 in binary
        assert_eq!(file.exact_tree().unwrap_err().code, 64);
    }
}
