//! Desk-scale solution of the primal and dual problems with checked gaps.

mod ipm;
mod splitting;

use serde::{Deserialize, Serialize};

use crate::conic::{Model, Status, Tolerances};
use crate::error::{Error, Result};
use crate::extreal::{ExtReal, NegInf, PosInf};
use crate::problem::{DualPoint, SPInstance};
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Auto,
    QpInteriorPoint,
    ProximalGradient,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Backend> {
        match s {
            "auto" => Ok(Backend::Auto),
            "qp-interior-point" => Ok(Backend::QpInteriorPoint),
            "proximal-gradient" => Ok(Backend::ProximalGradient),
            other => Err(Error::InvalidSpec(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub backend: Backend,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { backend: Backend::Auto, tol_gap: 1e-8, tol_feas: 1e-9, max_iter: 10_000, seed: 0 }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0) {
            return Err(Error::InvalidSpec("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn conic_tolerances(&self) -> Tolerances {
        Tolerances {
            max_iter: self.max_iter.min(u32::MAX as usize) as u32,
            ..Tolerances::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateStatus {
    Optimal,
    GapAboveTol,
    PrimalInfeasible,
    DualInfeasible,
    Unbounded,
}

impl std::fmt::Display for CertificateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertificateStatus::Optimal => "optimal",
            CertificateStatus::GapAboveTol => "gap-above-tol",
            CertificateStatus::PrimalInfeasible => "primal-infeasible",
            CertificateStatus::DualInfeasible => "dual-infeasible",
            CertificateStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// The primal solution, or an improving ray when unbounded.
    pub x: AdaptedProcess,
    pub d: DualPoint,
    pub primal: ExtReal,
    pub dual: ExtReal,
    pub gap: ExtReal,
    pub per_leaf_fenchel_residual: Vec<ExtReal>,
    pub orth_residuals: Vec<f64>,
    pub status: CertificateStatus,
    pub backend: Backend,
}

/// Raw backend output before certification.
pub(crate) struct BackendResult {
    pub x: AdaptedProcess,
    pub d: DualPoint,
}

pub(crate) enum Outcome {
    Solved(BackendResult),
    Infeasible,
    Unbounded(AdaptedProcess),
}

fn resolve_backend(inst: &SPInstance, backend: Backend) -> Backend {
    match backend {
        Backend::Auto => {
            let _ = inst;
            Backend::QpInteriorPoint
        }
        b => b,
    }
}

fn run_backend(inst: &SPInstance, opts: &SolveOptions, backend: Backend) -> Result<Outcome> {
    match backend {
        Backend::ProximalGradient => splitting::solve(inst, opts),
        _ => ipm::solve(inst, opts),
    }
}

/// Minimizes E f(x, ū) over adapted x.
pub fn solve_primal(inst: &SPInstance, opts: &SolveOptions) -> Result<(AdaptedProcess, ExtReal)> {
    opts.validate()?;
    match run_backend(inst, opts, resolve_backend(inst, opts.backend))? {
        Outcome::Solved(r) => {
            let value = inst.primal_objective_tol(&r.x, crate::convex::domain_tol(opts.tol_feas))?;
            Ok((r.x, value))
        }
        Outcome::Infeasible => Err(Error::Infeasible),
        Outcome::Unbounded(_) => Err(Error::Unbounded),
    }
}

/// Builds (p, y) from a multiplier y by picking g ∈ ∂_x l(x, y) at every
/// leaf and setting p = g − ap(g).
///
/// The subgradients are the multipliers of the nonanticipativity rows in
/// min l(x', y) + ‖x' − x‖²/2 over adapted x'. When x minimizes l(·, y)
/// over adapted processes the proximal term is inactive and the selection
/// is consistent across leaves.
pub fn recover_dual(inst: &SPInstance, x: &AdaptedProcess, y: &RandomVariable) -> Result<DualPoint> {
    if x.dims() != inst.dims() {
        return Err(Error::Shape("x does not match the stage dimensions".into()));
    }
    if y.dim() != inst.param_dim() || y.num_leaves() != inst.tree().num_leaves() {
        return Err(Error::Dimension { expected: inst.param_dim(), got: y.dim() });
    }
    let tree = inst.tree();
    let mut m = Model::new();
    let node_vars = inst.add_node_vars(&mut m);
    for (node, vars) in node_vars.iter().enumerate() {
        let target = x.node_value(tree, node);
        for (v, t) in vars.iter().zip(target) {
            m.add_square(&(v.clone() + (-t)), 1.0);
        }
    }
    let mut rows = Vec::with_capacity(tree.num_leaves());
    for leaf in 0..tree.num_leaves() {
        let prob = *tree.leaf_prob(leaf);
        let path = inst.path_exprs(&node_vars, leaf);
        let z = m.add_vars(path.len());
        let u = m.add_vars(inst.param_dim());
        let ids: Vec<usize> = z.iter().zip(&path).map(|(a, b)| m.eq(a.clone() - b.clone())).collect();
        rows.push(ids);
        let mut arg = z.clone();
        arg.extend(u.iter().cloned());
        inst.integrand(leaf).lower_objective(&mut m, &arg, prob);
        for (ui, yi) in u.iter().zip(y.value(leaf)) {
            m.add_linear(ui, -prob * yi);
        }
    }
    let sol = m.solve(&Tolerances::default())?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(Error::Infeasible),
        Status::Unbounded => {
            return Err(Error::Numerical("the Lagrangian is unbounded below at this multiplier".into()))
        }
    }
    let paths = leaf_paths_from_duals(inst, &rows, &sol.eq_duals);
    let g = LeafProcess::from_paths(tree, inst.dims().to_vec(), &paths)?;
    Ok(DualPoint { p: tree.orthogonal_part(&g)?, y: y.clone() })
}

/// Solves the primal, recovers a dual point and certifies the pair.
pub fn solve(inst: &SPInstance, opts: &SolveOptions) -> Result<Certificate> {
    opts.validate()?;
    let backend = resolve_backend(inst, opts.backend);
    let tree = inst.tree();
    let zero_x = AdaptedProcess::zeros(tree, inst.dims().to_vec());
    let result = match run_backend(inst, opts, backend)? {
        Outcome::Solved(r) => r,
        Outcome::Infeasible => {
            return Ok(Certificate {
                x: zero_x,
                d: DualPoint::zeros(inst),
                primal: PosInf,
                dual: PosInf,
                gap: ExtReal::ZERO,
                per_leaf_fenchel_residual: vec![PosInf; tree.num_leaves()],
                orth_residuals: vec![0.0; tree.num_stages()],
                status: CertificateStatus::PrimalInfeasible,
                backend,
            })
        }
        Outcome::Unbounded(ray) => {
            return Ok(Certificate {
                x: ray,
                d: DualPoint::zeros(inst),
                primal: NegInf,
                dual: NegInf,
                gap: ExtReal::ZERO,
                per_leaf_fenchel_residual: vec![PosInf; tree.num_leaves()],
                orth_residuals: vec![0.0; tree.num_stages()],
                status: CertificateStatus::Unbounded,
                backend,
            })
        }
    };
    let mut cert = certify(inst, result.x, result.d, opts, backend)?;
    if cert.status != CertificateStatus::Optimal {
        // A second, proximal pass often cleans up multipliers of degenerate programs.
        if let Ok(d) = recover_dual(inst, &cert.x, &cert.d.y) {
            let retry = certify(inst, cert.x.clone(), d, opts, backend)?;
            if retry.gap.to_f64().abs() < cert.gap.to_f64().abs() || retry.status == CertificateStatus::Optimal {
                cert = retry;
            }
        }
    }
    Ok(cert)
}

fn certify(
    inst: &SPInstance,
    x: AdaptedProcess,
    d: DualPoint,
    opts: &SolveOptions,
    backend: Backend,
) -> Result<Certificate> {
    let e = inst.evaluate_pair(&x, &d, opts.tol_feas)?;
    let status = if !e.primal_feasible {
        CertificateStatus::PrimalInfeasible
    } else if !e.dual_feasible {
        CertificateStatus::DualInfeasible
    } else if e.gap.finite().is_some_and(|g| g.abs() <= opts.tol_gap) {
        CertificateStatus::Optimal
    } else {
        CertificateStatus::GapAboveTol
    };
    Ok(Certificate {
        x,
        d,
        primal: e.primal,
        dual: e.dual,
        gap: e.gap,
        per_leaf_fenchel_residual: e.fenchel_residuals,
        orth_residuals: e.orth_residuals,
        status,
        backend,
    })
}

/// Nonanticipativity multipliers → scenariowise subgradients.
pub(crate) fn leaf_paths_from_duals(inst: &SPInstance, rows: &[Vec<usize>], duals: &[f64]) -> Vec<Vec<f64>> {
    rows.iter()
        .enumerate()
        .map(|(leaf, ids)| {
            let prob = *inst.tree().leaf_prob(leaf);
            ids.iter().map(|&r| -duals[r] / prob).collect()
        })
        .collect()
}
