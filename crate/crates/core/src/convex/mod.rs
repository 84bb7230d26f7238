//! A catalogue of closed proper convex functions on R^n.
//!
//! Every variant can be evaluated exactly, lowered into a conic [`Model`],
//! conjugated (in closed form where one exists, otherwise by a conic
//! program) and proximally mapped.
//!
//! [`Model`]: crate::conic::Model

mod conjugate;
mod eval;
mod loss;
mod lower;
mod oracle;
mod prox;
mod recession;

pub use conjugate::{domain_tol, Conjugate, Exactness, Fallback};
pub use loss::{LossKind, ScalarLoss};
pub use oracle::{conjugate_numeric_oracle, grid_maximum};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexFunction {
    /// slope·x + constant
    Affine { slope: Vec<f64>, constant: f64 },
    /// ½xᵀHx + linear·x + constant with H symmetric positive semidefinite
    Quadratic { hessian: Rows, linear: Vec<f64>, constant: f64 },
    /// δ(ineq·x ≤ ineq_rhs, eq·x = eq_rhs)
    IndicatorPolyhedron {
        dim: usize,
        #[serde(default)]
        ineq: Rows,
        #[serde(default)]
        ineq_rhs: Vec<f64>,
        #[serde(default)]
        eq: Rows,
        #[serde(default)]
        eq_rhs: Vec<f64>,
    },
    /// max_i slopes_i·x + intercepts_i
    MaxAffine { slopes: Rows, intercepts: Vec<f64> },
    /// x ↦ sup_{lower ≤ s ≤ upper} s·x; bounds may be infinite
    SupportBox {
        #[serde(with = "crate::serde_ext::ext_f64_vec")]
        lower: Vec<f64>,
        #[serde(with = "crate::serde_ext::ext_f64_vec")]
        upper: Vec<f64>,
    },
    ScalarLoss(ScalarLoss),
    Sum { terms: Vec<ConvexFunction> },
    /// x ↦ inner(matrix·x + offset)
    AffinePre { matrix: Rows, offset: Vec<f64>, inner: Box<ConvexFunction> },
    /// x = (x_1, …, x_k) ↦ Σ blocks_i(x_i)
    Separable { blocks: Vec<ConvexFunction> },
    /// factor·inner; a zero factor gives the indicator of dom inner
    Scaled { factor: f64, inner: Box<ConvexFunction> },
    /// outer(inner(x)) for a nondecreasing outer loss
    NondecreasingPre { outer: ScalarLoss, inner: Box<ConvexFunction> },
    /// δ(inner(x) ≤ 0)
    Sublevel { inner: Box<ConvexFunction> },
}

impl From<ScalarLoss> for ConvexFunction {
    fn from(l: ScalarLoss) -> Self {
        ConvexFunction::ScalarLoss(l)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub(crate) fn to_dmatrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

impl ConvexFunction {
    pub fn affine(slope: Vec<f64>, constant: f64) -> Self {
        ConvexFunction::Affine { slope, constant }
    }

    pub fn zero(dim: usize) -> Self {
        ConvexFunction::affine(vec![0.0; dim], 0.0)
    }

    pub fn quadratic(hessian: Rows, linear: Vec<f64>, constant: f64) -> Self {
        ConvexFunction::Quadratic { hessian, linear, constant }
    }

    /// ½‖x‖².
    pub fn half_norm_squared(dim: usize) -> Self {
        let h = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        ConvexFunction::quadratic(h, vec![0.0; dim], 0.0)
    }

    pub fn polyhedron(dim: usize, ineq: Rows, ineq_rhs: Vec<f64>, eq: Rows, eq_rhs: Vec<f64>) -> Self {
        ConvexFunction::IndicatorPolyhedron { dim, ineq, ineq_rhs, eq, eq_rhs }
    }

    /// Indicator of the nonnegative orthant, as the support function of (−∞, 0]^n.
    pub fn nonnegative_orthant(dim: usize) -> Self {
        ConvexFunction::SupportBox { lower: vec![f64::NEG_INFINITY; dim], upper: vec![0.0; dim] }
    }

    pub fn max_affine(slopes: Rows, intercepts: Vec<f64>) -> Self {
        ConvexFunction::MaxAffine { slopes, intercepts }
    }

    pub fn support_box(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ConvexFunction::SupportBox { lower, upper }
    }

    pub fn sum(terms: Vec<ConvexFunction>) -> Self {
        ConvexFunction::Sum { terms }
    }

    pub fn affine_pre(matrix: Rows, offset: Vec<f64>, inner: ConvexFunction) -> Self {
        ConvexFunction::AffinePre { matrix, offset, inner: Box::new(inner) }
    }

    pub fn separable(blocks: Vec<ConvexFunction>) -> Self {
        ConvexFunction::Separable { blocks }
    }

    pub fn scaled(factor: f64, inner: ConvexFunction) -> Self {
        ConvexFunction::Scaled { factor, inner: Box::new(inner) }
    }

    pub fn nondecreasing_pre(outer: ScalarLoss, inner: ConvexFunction) -> Self {
        ConvexFunction::NondecreasingPre { outer, inner: Box::new(inner) }
    }

    pub fn sublevel(inner: ConvexFunction) -> Self {
        ConvexFunction::Sublevel { inner: Box::new(inner) }
    }

    /// The stable textual tag of the outermost variant.
    pub fn tag(&self) -> &'static str {
        match self {
            ConvexFunction::Affine { .. } => "affine",
            ConvexFunction::Quadratic { .. } => "quadratic",
            ConvexFunction::IndicatorPolyhedron { .. } => "indicator_polyhedron",
            ConvexFunction::MaxAffine { .. } => "max_affine",
            ConvexFunction::SupportBox { .. } => "support_box",
            ConvexFunction::ScalarLoss(_) => "scalar_loss",
            ConvexFunction::Sum { .. } => "sum",
            ConvexFunction::AffinePre { .. } => "affine_pre",
            ConvexFunction::Separable { .. } => "separable",
            ConvexFunction::Scaled { .. } => "scaled",
            ConvexFunction::NondecreasingPre { .. } => "nondecreasing_pre",
            ConvexFunction::Sublevel { .. } => "sublevel",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFunction::Affine { slope, .. } => slope.len(),
            ConvexFunction::Quadratic { linear, .. } => linear.len(),
            ConvexFunction::IndicatorPolyhedron { dim, .. } => *dim,
            ConvexFunction::MaxAffine { slopes, .. } => slopes.first().map_or(0, |r| r.len()),
            ConvexFunction::SupportBox { lower, .. } => lower.len(),
            ConvexFunction::ScalarLoss(_) => 1,
            ConvexFunction::Sum { terms } => terms.first().map_or(0, |t| t.dim()),
            ConvexFunction::AffinePre { matrix, .. } => matrix.first().map_or(0, |r| r.len()),
            ConvexFunction::Separable { blocks } => blocks.iter().map(|b| b.dim()).sum(),
            ConvexFunction::Scaled { inner, .. }
            | ConvexFunction::NondecreasingPre { inner, .. }
            | ConvexFunction::Sublevel { inner } => inner.dim(),
        }
    }

    /// Checks shapes and the convexity/properness conditions of each variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFunction(m));
        let rect = |rows: &Rows, ncols: usize, what: &str| -> Result<()> {
            if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
                return Err(Error::InvalidFunction(format!(
                    "{what}: row of length {} where {ncols} columns are expected",
                    r.len()
                )));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidFunction(format!("{what}: non-finite entry")));
            }
            Ok(())
        };
        let finite = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().any(|x| !x.is_finite()) {
                Err(Error::InvalidFunction(format!("{what}: non-finite entry")))
            } else {
                Ok(())
            }
        };
        match self {
            ConvexFunction::Affine { slope, constant } => {
                finite(slope, "affine slope")?;
                finite(&[*constant], "affine constant")
            }
            ConvexFunction::Quadratic { hessian, linear, constant } => {
                let n = linear.len();
                if hessian.len() != n {
                    return bad(format!("quadratic: {} hessian rows for dimension {n}", hessian.len()));
                }
                rect(hessian, n, "quadratic hessian")?;
                finite(linear, "quadratic linear term")?;
                finite(&[*constant], "quadratic constant")?;
                let h = to_dmatrix(hessian, n);
                let scale = h.amax().max(1.0);
                if (&h - h.transpose()).amax() > 1e-10 * scale {
                    return bad("quadratic: hessian is not symmetric".into());
                }
                if n > 0 && h.symmetric_eigenvalues().min() < -1e-10 * scale {
                    return bad("quadratic: hessian is not positive semidefinite".into());
                }
                Ok(())
            }
            ConvexFunction::IndicatorPolyhedron { dim, ineq, ineq_rhs, eq, eq_rhs } => {
                rect(ineq, *dim, "polyhedron inequalities")?;
                rect(eq, *dim, "polyhedron equalities")?;
                if ineq.len() != ineq_rhs.len() || eq.len() != eq_rhs.len() {
                    return bad("polyhedron: right-hand side length mismatch".into());
                }
                finite(ineq_rhs, "polyhedron rhs")?;
                finite(eq_rhs, "polyhedron rhs")?;
                if !self.polyhedron_nonempty()? {
                    return bad("polyhedron: empty set".into());
                }
                Ok(())
            }
            ConvexFunction::MaxAffine { slopes, intercepts } => {
                if slopes.is_empty() {
                    return bad("max-affine: no pieces".into());
                }
                rect(slopes, slopes[0].len(), "max-affine slopes")?;
                if intercepts.len() != slopes.len() {
                    return bad("max-affine: intercept count mismatch".into());
                }
                finite(intercepts, "max-affine intercepts")
            }
            ConvexFunction::SupportBox { lower, upper } => {
                if lower.len() != upper.len() {
                    return bad("support box: bound length mismatch".into());
                }
                for (l, u) in lower.iter().zip(upper) {
                    if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY
                    {
                        return bad("support box: empty interval".into());
                    }
                }
                Ok(())
            }
            ConvexFunction::ScalarLoss(l) => l.validate(),
            ConvexFunction::Sum { terms } => {
                if terms.is_empty() {
                    return bad("sum: no terms".into());
                }
                let n = terms[0].dim();
                for t in terms {
                    t.validate()?;
                    if t.dim() != n {
                        return bad(format!("sum: term of dimension {} among dimension {n}", t.dim()));
                    }
                }
                Ok(())
            }
            ConvexFunction::AffinePre { matrix, offset, inner } => {
                inner.validate()?;
                if matrix.is_empty() {
                    return bad("affine precomposition: empty matrix".into());
                }
                if matrix.len() != inner.dim() || offset.len() != inner.dim() {
                    return bad(format!(
                        "affine precomposition: {} rows and offset {} for inner dimension {}",
                        matrix.len(),
                        offset.len(),
                        inner.dim()
                    ));
                }
                rect(matrix, matrix[0].len(), "affine precomposition matrix")?;
                finite(offset, "affine precomposition offset")
            }
            ConvexFunction::Separable { blocks } => {
                if blocks.is_empty() {
                    return bad("separable: no blocks".into());
                }
                blocks.iter().try_for_each(|b| b.validate())
            }
            ConvexFunction::Scaled { factor, inner } => {
                if !factor.is_finite() || *factor < 0.0 {
                    return bad("scaled: factor must be finite and nonnegative".into());
                }
                inner.validate()
            }
            ConvexFunction::NondecreasingPre { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                if !outer.is_nondecreasing() && inner.as_affine().is_none() {
                    return bad("composition: outer loss must be nondecreasing unless inner is affine".into());
                }
                Ok(())
            }
            ConvexFunction::Sublevel { inner } => inner.validate(),
        }
    }

    fn polyhedron_nonempty(&self) -> Result<bool> {
        use crate::conic::{Lin, Model, Status, Tolerances};
        let ConvexFunction::IndicatorPolyhedron { dim, ineq, ineq_rhs, eq, eq_rhs } = self else {
            return Ok(true);
        };
        if ineq.is_empty() && eq.is_empty() {
            return Ok(true);
        }
        let mut m = Model::new();
        let x = m.add_vars(*dim);
        for (row, b) in ineq.iter().zip(ineq_rhs) {
            m.le(Lin::combine(row.iter().copied(), &x) - Lin::constant(*b));
        }
        for (row, b) in eq.iter().zip(eq_rhs) {
            m.eq(Lin::combine(row.iter().copied(), &x) - Lin::constant(*b));
        }
        Ok(m.solve(&Tolerances::default())?.status != Status::Infeasible)
    }

    /// (slope, constant) when the function is affine on all of R^n.
    pub fn as_affine(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            ConvexFunction::Affine { slope, constant } => Some((slope.clone(), *constant)),
            ConvexFunction::Quadratic { hessian, linear, constant }
                if hessian.iter().flatten().all(|v| *v == 0.0) =>
            {
                Some((linear.clone(), *constant))
            }
            ConvexFunction::SupportBox { lower, upper } if lower == upper => {
                Some((lower.clone(), 0.0))
            }
            ConvexFunction::ScalarLoss(l)
                if l.kind == LossKind::Linear && l.lower == f64::NEG_INFINITY && l.upper == f64::INFINITY =>
            {
                Some((vec![l.scale], -l.scale * l.shift))
            }
            ConvexFunction::Sum { terms } => {
                let mut slope = vec![0.0; self.dim()];
                let mut c = 0.0;
                for t in terms {
                    let (s, k) = t.as_affine()?;
                    slope.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
                    c += k;
                }
                Some((slope, c))
            }
            ConvexFunction::AffinePre { matrix, offset, inner } => {
                let (s, k) = inner.as_affine()?;
                let n = self.dim();
                let slope = (0..n).map(|j| matrix.iter().zip(&s).map(|(r, w)| r[j] * w).sum()).collect();
                Some((slope, k + dot(&s, offset)))
            }
            ConvexFunction::Separable { blocks } => {
                let mut slope = Vec::new();
                let mut c = 0.0;
                for b in blocks {
                    let (s, k) = b.as_affine()?;
                    slope.extend(s);
                    c += k;
                }
                Some((slope, c))
            }
            ConvexFunction::Scaled { factor, inner } => {
                let (s, k) = inner.as_affine()?;
                Some((s.iter().map(|v| factor * v).collect(), factor * k))
            }
            _ => None,
        }
    }

    /// Every piece is polyhedral, so epigraph, conjugate and recession are LPs.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            ConvexFunction::Affine { .. }
            | ConvexFunction::IndicatorPolyhedron { .. }
            | ConvexFunction::MaxAffine { .. }
            | ConvexFunction::SupportBox { .. } => true,
            ConvexFunction::Quadratic { .. } => self.as_affine().is_some(),
            ConvexFunction::ScalarLoss(l) => l.is_polyhedral(),
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_polyhedral()),
            ConvexFunction::Separable { blocks } => blocks.iter().all(|t| t.is_polyhedral()),
            ConvexFunction::AffinePre { inner, .. }
            | ConvexFunction::Scaled { inner, .. }
            | ConvexFunction::Sublevel { inner } => inner.is_polyhedral(),
            ConvexFunction::NondecreasingPre { outer, inner } => outer.is_polyhedral() && inner.is_polyhedral(),
        }
    }

    /// Quadratic objective over polyhedral constraints: no conic rows needed.
    pub fn is_quadratic(&self) -> bool {
        match self {
            ConvexFunction::Quadratic { .. } => true,
            ConvexFunction::ScalarLoss(l) => l.kind != LossKind::Exponential,
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_quadratic()),
            ConvexFunction::Separable { blocks } => blocks.iter().all(|t| t.is_quadratic()),
            ConvexFunction::AffinePre { inner, .. } | ConvexFunction::Scaled { inner, .. } => inner.is_quadratic(),
            ConvexFunction::NondecreasingPre { outer, inner } => {
                inner.is_polyhedral() && (outer.is_polyhedral() || inner.as_affine().is_some())
                    && outer.kind != LossKind::Exponential
            }
            _ => self.is_polyhedral(),
        }
    }

    /// Continuously differentiable on R^n.
    pub fn is_smooth(&self) -> bool {
        match self {
            ConvexFunction::Affine { .. } | ConvexFunction::Quadratic { .. } => true,
            ConvexFunction::ScalarLoss(l) => l.is_smooth(),
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_smooth()),
            ConvexFunction::Separable { blocks } => blocks.iter().all(|t| t.is_smooth()),
            ConvexFunction::AffinePre { inner, .. } => inner.is_smooth(),
            ConvexFunction::Scaled { factor, inner } => *factor > 0.0 && inner.is_smooth(),
            ConvexFunction::NondecreasingPre { outer, inner } => outer.is_smooth() && inner.is_smooth(),
            ConvexFunction::SupportBox { lower, upper } => lower == upper,
            _ => false,
        }
    }

    /// Lowering uses exponential cones somewhere.
    pub fn uses_exp_cone(&self) -> bool {
        match self {
            ConvexFunction::ScalarLoss(l) => l.kind == LossKind::Exponential,
            ConvexFunction::Sum { terms } => terms.iter().any(|t| t.uses_exp_cone()),
            ConvexFunction::Separable { blocks } => blocks.iter().any(|t| t.uses_exp_cone()),
            ConvexFunction::AffinePre { inner, .. }
            | ConvexFunction::Scaled { inner, .. }
            | ConvexFunction::Sublevel { inner } => inner.uses_exp_cone(),
            ConvexFunction::NondecreasingPre { outer, inner } => {
                outer.kind == LossKind::Exponential || inner.uses_exp_cone()
            }
            _ => false,
        }
    }

    /// Hessian as a dense matrix (quadratic variant only).
    pub(crate) fn hessian_matrix(hessian: &Rows) -> DMatrix<f64> {
        to_dmatrix(hessian, hessian.len())
    }

    pub(crate) fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }
}
