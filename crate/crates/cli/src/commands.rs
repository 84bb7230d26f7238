//! The four subcommands, as functions from parsed files to text and exit codes.

use std::fmt::Write as _;

use num_rational::BigRational;

use stochdual::apps::snell_envelope;
use stochdual::certify::{gap_report, verify, Verdict};
use stochdual::solve::{solve, Backend, CertificateStatus, SolveOptions};
use stochdual::{AdaptedProcess, ConvexFunction, ExtReal, Scalar, SPInstance};

use crate::error::{code, CliError};
use crate::format::{CertificateFile, ExactSection, ProblemFile, Residuals, Spec, ToleranceSection, FORMAT_VERSION};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub tol: f64,
    pub backend: Backend,
    pub exact: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { tol: DEFAULT_TOL, backend: Backend::Auto, exact: false }
    }
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(CliError::parse(format!("tolerance must be positive and finite, got {tol}")))
    }
}

fn solve_options(opts: &Options) -> SolveOptions {
    SolveOptions { backend: opts.backend, tol_gap: opts.tol, tol_feas: opts.tol.min(1e-9), ..SolveOptions::default() }
}

/// Plain decimals for ordinary magnitudes, scientific notation for tiny or huge ones.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e9) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn ext(x: ExtReal) -> String {
    x.finite().map_or_else(|| x.to_string(), num)
}

pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_process(x: &AdaptedProcess, inst: &SPInstance) -> String {
    let tree = inst.tree();
    let parts: Vec<String> = (0..tree.num_nodes())
        .filter(|&n| !x.node_value(tree, n).is_empty())
        .map(|n| format!("node {n}: {}", fmt_vec(x.node_value(tree, n))))
        .collect();
    if parts.is_empty() {
        "(no decisions)".into()
    } else {
        parts.join("; ")
    }
}

/// The exact value of a stopping problem, sup E R_τ, from the Snell envelope.
fn exact_stopping_value(problem: &ProblemFile, reward: &[f64]) -> Result<BigRational, CliError> {
    let tree = problem.exact_tree()?;
    let r: Vec<BigRational> = reward
        .iter()
        .map(|&x| {
            if x.is_finite() {
                Ok(<BigRational as Scalar>::from_float(x))
            } else {
                Err(CliError::parse("rewards must be finite"))
            }
        })
        .collect::<Result<_, _>>()?;
    let reward = AdaptedProcess::from_node_scalars(&tree, &r)?;
    let snell = snell_envelope(&tree, &reward)?;
    Ok(snell.node_value(&tree, 0)[0].clone())
}

fn exact_section(problem: &ProblemFile) -> Result<ExactSection, CliError> {
    let tree_note = "probabilities validated in rational arithmetic";
    match &problem.spec {
        Spec::Stopping(s) => Ok(ExactSection {
            value: Some(exact_stopping_value(problem, &s.reward)?.to_string()),
            note: format!("{tree_note}; value is sup E R_tau from the exact Snell envelope"),
        }),
        _ => {
            problem.exact_tree()?;
            Ok(ExactSection { value: None, note: format!("{tree_note}; no closed-form value for this class") })
        }
    }
}

pub fn exit_code(status: CertificateStatus) -> i32 {
    match status {
        CertificateStatus::Optimal => code::OK,
        CertificateStatus::GapAboveTol | CertificateStatus::DualInfeasible => code::GAP_ABOVE_TOL,
        CertificateStatus::PrimalInfeasible => code::INFEASIBLE,
        CertificateStatus::Unbounded => code::UNBOUNDED,
    }
}

/// Solves the problem and builds its certificate. A certificate is returned
/// for every status; only optimal ones pass `verify_certificate`.
pub fn solve_problem(problem: &ProblemFile, opts: &Options) -> Result<(CertificateFile, i32), CliError> {
    check_tol(opts.tol)?;
    let inst = problem.build()?;
    let sopts = solve_options(opts);
    let cert = solve(&inst, &sopts)?;
    let mut status = cert.status;
    let (mut primal, mut dual, mut gap) = (cert.primal, cert.dual, cert.gap);
    let mut fenchel = cert.per_leaf_fenchel_residual;
    let mut orth = cert.orth_residuals;
    if status == CertificateStatus::Optimal {
        // the same check `verify` runs, so every optimal certificate verifies
        let report = verify(&inst, &cert.x, &cert.d, opts.tol)?;
        if report.verdict != Verdict::OptimalPair {
            status = CertificateStatus::GapAboveTol;
        }
        (primal, dual, gap) = (report.primal, report.dual, report.gap);
        (fenchel, orth) = (report.fenchel_residuals, report.orth_residuals);
    }
    let exact = if opts.exact { Some(exact_section(problem)?) } else { None };
    let tree = inst.tree();
    let file = CertificateFile {
        format_version: FORMAT_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        problem_hash: problem.hash(),
        status,
        backend: cert.backend,
        tolerances: ToleranceSection { tol: opts.tol, tol_feas: sopts.tol_feas },
        primal,
        dual,
        gap,
        stage_dims: inst.dims().to_vec(),
        x: CertificateFile::node_x(&cert.x, tree),
        p: cert.d.p.values().to_vec(),
        y: cert.d.y.values().to_vec(),
        residuals: Residuals { fenchel, orth },
        exact,
    };
    Ok((file, exit_code(status)))
}

pub fn solve_summary(file: &CertificateFile) -> String {
    format!("status: {}\nprimal: {}\ndual: {}\ngap: {}\n", file.status, ext(file.primal), ext(file.dual), ext(file.gap))
}

fn agree(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    match (a.finite(), b.finite()) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => a == b,
    }
}

/// Checks a certificate against its problem. Returns the report text and
/// exit code 0 (optimal pair) or 1.
pub fn verify_certificate(
    problem: &ProblemFile,
    cert: &CertificateFile,
    tol: Option<f64>,
) -> Result<(String, i32), CliError> {
    if cert.problem_hash != problem.hash() {
        return Err(CliError::new(
            code::HASH_MISMATCH,
            format!("certificate is for problem {}, this problem hashes to {}", cert.problem_hash, problem.hash()),
        ));
    }
    let tol = tol.unwrap_or(cert.tolerances.tol);
    check_tol(tol)?;
    let inst = problem.build()?;
    let mut out = String::new();
    writeln!(out, "tolerance: {}", num(tol)).unwrap();
    if cert.status != CertificateStatus::Optimal {
        writeln!(out, "verdict: invalid").unwrap();
        writeln!(out, "certificate records status {}; only optimal certificates verify", cert.status).unwrap();
        return Ok((out, code::VERIFY_FAILED));
    }
    let (x, d) = match cert.pair(&inst) {
        Ok(pair) => pair,
        Err(e) => {
            writeln!(out, "verdict: invalid\ncertificate arrays do not fit the problem: {e}").unwrap();
            return Ok((out, code::VERIFY_FAILED));
        }
    };
    let report = verify(&inst, &x, &d, tol)?;
    let mut ok = report.verdict == Verdict::OptimalPair;
    let mut problems = Vec::new();
    for (name, recorded, actual) in
        [("primal", cert.primal, report.primal), ("dual", cert.dual, report.dual), ("gap", cert.gap, report.gap)]
    {
        if !agree(recorded, actual, tol) {
            ok = false;
            problems.push(format!("recorded {name} {} differs from recomputed {}", ext(recorded), ext(actual)));
        }
    }
    if let (Some(ex), Spec::Stopping(s)) = (&cert.exact, &problem.spec) {
        let value = exact_stopping_value(problem, &s.reward)?.to_string();
        if ex.value.as_deref() != Some(value.as_str()) {
            ok = false;
            problems.push(format!("recorded exact value {:?} differs from {value}", ex.value));
        }
    }
    let verdict = if ok { Verdict::OptimalPair } else if report.verdict == Verdict::OptimalPair { Verdict::Invalid } else { report.verdict };
    writeln!(out, "verdict: {verdict}").unwrap();
    writeln!(out, "primal: {}", ext(report.primal)).unwrap();
    writeln!(out, "dual: {}", ext(report.dual)).unwrap();
    writeln!(out, "gap: {}", ext(report.gap)).unwrap();
    writeln!(out, "primal feasible: {}", report.primal_feasible).unwrap();
    writeln!(out, "dual feasible: {}", report.dual_feasible).unwrap();
    let orth = report.orth_residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    writeln!(out, "max orthogonality residual: {}", num(orth)).unwrap();
    if report.failing_leaves.is_empty() {
        writeln!(out, "failing leaves: none").unwrap();
    } else {
        writeln!(out, "failing leaves: {:?}", report.failing_leaves).unwrap();
        for &leaf in &report.failing_leaves {
            writeln!(out, "  leaf {leaf}: fenchel residual {}", ext(report.fenchel_residuals[leaf])).unwrap();
        }
    }
    for line in report.notes.iter().chain(&problems) {
        writeln!(out, "note: {line}").unwrap();
    }
    Ok((out, if ok { code::OK } else { code::VERIFY_FAILED }))
}

fn describe(f: &ConvexFunction) -> String {
    use ConvexFunction as C;
    match f {
        C::Affine { slope, .. } => format!("affine({})", slope.len()),
        C::Quadratic { linear, .. } => format!("quadratic({})", linear.len()),
        C::IndicatorPolyhedron { dim, ineq, eq, .. } => {
            format!("polyhedron({dim}; {} ineq, {} eq)", ineq.len(), eq.len())
        }
        C::MaxAffine { intercepts, .. } => format!("max_affine({} pieces)", intercepts.len()),
        C::SupportBox { lower, .. } => format!("support_box({})", lower.len()),
        C::ScalarLoss(l) => format!("loss({:?})", l.kind),
        C::Sum { terms } => format!("sum[{}]", terms.iter().map(describe).collect::<Vec<_>>().join(", ")),
        C::AffinePre { matrix, inner, .. } => format!("{} ∘ affine({} rows)", describe(inner), matrix.len()),
        C::Separable { blocks } => {
            format!("separable[{}]", blocks.iter().map(describe).collect::<Vec<_>>().join(", "))
        }
        C::Scaled { factor, inner } => format!("{factor}·{}", describe(inner)),
        C::NondecreasingPre { outer, inner } => format!("loss({:?}) ∘ {}", outer.kind, describe(inner)),
        C::Sublevel { inner } => format!("δ({} ≤ 0)", describe(inner)),
    }
}

fn conjugate_kind(f: &ConvexFunction) -> &'static str {
    if f.uses_exp_cone() {
        "numeric conjugate (exponential cone)"
    } else if f.is_polyhedral() {
        "exact conjugate (polyhedral)"
    } else {
        "exact conjugate (closed form or conic program)"
    }
}

fn leaf_list(leaves: &[usize]) -> String {
    if leaves.len() > 1 && leaves.windows(2).all(|w| w[1] == w[0] + 1) {
        format!("leaves {}..={}", leaves[0], leaves[leaves.len() - 1])
    } else if leaves.len() == 1 {
        format!("leaf {}", leaves[0])
    } else {
        format!("leaves {leaves:?}")
    }
}

/// A readable statement of the dual problem, with the reduced dual for
/// application classes.
pub fn dualize(problem: &ProblemFile) -> Result<String, CliError> {
    let inst = problem.build()?;
    let tree = inst.tree();
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "dual problem ({})", problem.spec.kind()).unwrap();
    writeln!(w, "  maximize E[ū·y] − E f*(p, y)").unwrap();
    writeln!(
        w,
        "  over y ∈ R^{} per leaf and p = (p_0, …, p_{}) with p_t ∈ R^d_t, d = {:?}",
        inst.param_dim(),
        tree.horizon(),
        inst.dims()
    )
    .unwrap();
    writeln!(w, "information constraints:").unwrap();
    for (t, &d) in inst.dims().iter().enumerate() {
        let atoms = tree.nodes_at(t).len();
        if d == 0 {
            writeln!(w, "  E_{t} p_{t} = 0  (no decision at stage {t})").unwrap();
        } else {
            writeln!(w, "  E_{t} p_{t} = 0  ({atoms} atoms × {d} equations)").unwrap();
        }
    }
    writeln!(w, "per-leaf conjugates f*(·, ·, leaf):").unwrap();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for leaf in 0..tree.num_leaves() {
        let f = inst.integrand(leaf);
        let text = format!("{}; {}", describe(f), conjugate_kind(f));
        match groups.iter_mut().find(|(t, _)| *t == text) {
            Some((_, leaves)) => leaves.push(leaf),
            None => groups.push((text, vec![leaf])),
        }
    }
    for (text, leaves) in &groups {
        writeln!(w, "  {}: f = {text}", leaf_list(leaves)).unwrap();
    }
    write_reduced_dual(w, problem, &inst)?;
    Ok(out)
}

fn write_reduced_dual(w: &mut String, problem: &ProblemFile, inst: &SPInstance) -> Result<(), CliError> {
    match &problem.spec {
        Spec::Generic(_) => {}
        Spec::Stopping(s) => {
            let tree = inst.tree();
            let reward = AdaptedProcess::from_node_scalars(tree, &s.reward)?;
            let snell = snell_envelope(tree, &reward)?;
            let s0 = snell.node_value(tree, 0)[0];
            writeln!(w, "reduced dual (martingale dominance):").unwrap();
            writeln!(w, "  minimize E[y] over martingales y_t = E_t[y] with R_t ≤ y_t for every t").unwrap();
            writeln!(w, "  shadow prices p_t = y − y_t").unwrap();
            writeln!(w, "  Snell envelope S_0 = {}; the primal minimum is −S_0 = {}", num(s0), num(-s0)).unwrap();
        }
        Spec::Mathprog(s) => {
            let l = s.num_inequalities;
            let m = s.num_constraints();
            writeln!(w, "reduced dual (multipliers y per leaf, K* = R_+^{l} × R^{}):", m - l).unwrap();
            for leaf in 0..inst.tree().num_leaves() {
                let obj = s.objective[leaf].as_affine();
                let rows: Option<Vec<(Vec<f64>, f64)>> = s
                    .constraints
                    .get(leaf)
                    .map_or(Some(Vec::new()), |cs| cs.iter().map(|c| c.as_affine()).collect());
                match (obj, rows) {
                    (Some((c, _)), Some(rows)) => {
                        writeln!(w, "  leaf {leaf}: c + A*y = p, y ∈ K*").unwrap();
                        writeln!(w, "    c = {}", fmt_vec(&c)).unwrap();
                        for (j, (a, b)) in rows.iter().enumerate() {
                            writeln!(w, "    A row {j} = {}, offset {b}", fmt_vec(a)).unwrap();
                        }
                        let offsets: Vec<f64> = rows.iter().map(|r| r.1).collect();
                        writeln!(w, "    objective term E[b·y] with b = {}", fmt_vec(&offsets)).unwrap();
                    }
                    _ => {
                        writeln!(w, "  leaf {leaf}: p ∈ ∂_x[f_0 + Σ_j y_j f_j](x), y ∈ K*, y_j f_j(x) = 0").unwrap();
                    }
                }
            }
        }
        Spec::Control(_) => {
            writeln!(w, "reduced dual over adapted y_1, …, y_T ∈ R^N with y_0 = y_(T+1) = 0:").unwrap();
            writeln!(w, "  maximize E Σ_t W_t·y_t − E Σ_t L_t*(−E_t v_t)").unwrap();
            writeln!(w, "  v_t = (Δy_(t+1) + A_(t+1)* y_(t+1), B_(t+1)* y_(t+1))").unwrap();
            writeln!(w, "  shadow prices p_t = v_t − E_t v_t").unwrap();
        }
        Spec::Lagrange(_) => {
            writeln!(w, "reduced dual over adapted y_0, …, y_T with y_(T+1) = 0:").unwrap();
            writeln!(w, "  maximize −E Σ_t K_t*(E_t Δy_(t+1), y_t)").unwrap();
            writeln!(w, "  shadow prices p_t = E_t Δy_(t+1) − Δy_(t+1)").unwrap();
        }
        Spec::Hedging(s) => {
            writeln!(w, "reduced dual over y per leaf (a scaled density dQ/dP):").unwrap();
            writeln!(w, "  maximize E[c y] − E V*(y) − S₀*(E[y c̄])").unwrap();
            if s.constraints.is_some() {
                writeln!(w, "  − E Σ_t σ_(D_t)(E_t[y Δs_(t+1)]) for the trading constraints D_t").unwrap();
            } else {
                writeln!(w, "  subject to E_t[y Δs_(t+1)] = 0 for every t (s is a Q-martingale)").unwrap();
            }
            writeln!(w, "  calibration: E^Q c̄ ∈ dom S₀*").unwrap();
            if s.num_static() == 0 {
                writeln!(w, "  (no static assets, so calibration holds trivially)").unwrap();
            }
        }
    }
    Ok(())
}

/// Solves both problems and explains the observed gap.
pub fn report(problem: &ProblemFile, opts: &Options) -> Result<String, CliError> {
    check_tol(opts.tol)?;
    let inst = problem.build()?;
    let r = gap_report(&inst, &solve_options(opts))?;
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "status: {}", r.status).unwrap();
    writeln!(w, "primal: {}", ext(r.primal)).unwrap();
    writeln!(w, "dual: {}", ext(r.dual)).unwrap();
    writeln!(w, "gap: {}", ext(r.gap)).unwrap();
    match &r.linearity {
        None => writeln!(w, "linearity: unsupported").unwrap(),
        Some(l) if l.is_linear => {
            writeln!(w, "linearity: holds (lineality dimension {})", l.lineality_dim).unwrap()
        }
        Some(l) => {
            let witness = l.witness.as_ref().map_or("none".to_string(), |x| fmt_process(x, &inst));
            writeln!(w, "linearity fails; witness x = {witness}").unwrap();
        }
    }
    writeln!(w, "dual neighborhood: {}", if r.neighborhood { "holds" } else { "fails" }).unwrap();
    let zero_gap = r.gap.finite().is_some_and(|g| g.abs() <= opts.tol);
    let verdict = match (&r.linearity, r.predicted, zero_gap) {
        (None, _, _) => format!("zero-gap check unsupported; observed gap {}", ext(r.gap)),
        (_, true, true) => "gap 0: predicted by linearity + neighborhood".to_string(),
        (_, true, false) => format!("gap {} observed although zero gap is predicted (solver inaccuracy)", ext(r.gap)),
        (_, false, true) => "gap 0 observed, not predicted by the sufficient conditions".to_string(),
        (_, false, false) => format!("gap {} observed", ext(r.gap)),
    };
    writeln!(w, "{verdict}").unwrap();
    for note in &r.notes {
        writeln!(w, "note: {note}").unwrap();
    }
    Ok(out)
}
