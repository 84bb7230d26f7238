use nalgebra::{DMatrix, DVector};

use super::{dot, to_dmatrix, ConvexFunction};
use crate::conic::{Lin, Model, Status, Tolerances};
use crate::error::{Error, Result};
use crate::extreal::{ExtReal, NegInf, PosInf};

/// How a conjugate value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Exactness {
    ClosedForm,
    /// LP, QP or SOCP solved to interior-point tolerance.
    Program,
    /// Exponential-cone program; accurate only to solver tolerance in the
    /// transcendental part.
    Numeric,
}

/// Whether a numeric fallback may be used when no closed form exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    #[default]
    Allow,
    Forbid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate {
    pub value: ExtReal,
    pub exactness: Exactness,
}

/// Slack for domain membership used by certificate checks.
pub fn domain_tol(tol: f64) -> f64 {
    tol.min(1e-9)
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

impl ConvexFunction {
    /// f*(v) = sup_x v·x − f(x).
    pub fn conjugate(&self, v: &[f64]) -> Result<Conjugate> {
        self.conjugate_relaxed(v, 0.0, Fallback::Allow)
    }

    /// f*(v), failing with `NoClosedForm` instead of falling back to an
    /// exponential-cone program.
    pub fn conjugate_eval(&self, v: &[f64]) -> Result<ExtReal> {
        Ok(self.conjugate_relaxed(v, 0.0, Fallback::Forbid)?.value)
    }

    /// Conjugate of f + eps·‖·‖₁, i.e. the infimum of f* over the ∞-ball of
    /// radius eps around v. With eps = 0 this is f*(v).
    pub fn conjugate_relaxed(&self, v: &[f64], eps: f64, fallback: Fallback) -> Result<Conjugate> {
        if v.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.len() });
        }
        if let Some(value) = self.closed_conjugate(v, eps) {
            return Ok(Conjugate { value, exactness: Exactness::ClosedForm });
        }
        let numeric = self.uses_exp_cone();
        if numeric && fallback == Fallback::Forbid {
            return Err(Error::NoClosedForm(format!(
                "conjugate of a {} function needs a numeric exponential-cone program",
                self.tag()
            )));
        }
        let value = self.conjugate_program(v, eps)?;
        let exactness = if numeric { Exactness::Numeric } else { Exactness::Program };
        Ok(Conjugate { value, exactness })
    }

    /// The relaxed conjugate at the smallest radius of the ladder
    /// 0, eps·10⁻⁴, …, eps that gives a finite value. A relaxation lowers f*
    /// by up to radius·‖x*‖₁, so points just outside dom f* should pay only
    /// for their actual distance.
    pub fn conjugate_tight(&self, v: &[f64], eps: f64, fallback: Fallback) -> Result<Conjugate> {
        let mut c = self.conjugate_relaxed(v, 0.0, fallback)?;
        let mut radius = eps * 1e-4;
        while c.value == PosInf && eps > 0.0 && radius <= eps * (1.0 + 1e-9) {
            c = self.conjugate_relaxed(v, radius, fallback)?;
            radius *= 10.0;
        }
        Ok(c)
    }

    fn closed_conjugate(&self, v: &[f64], eps: f64) -> Option<ExtReal> {
        match self {
            ConvexFunction::Affine { slope, constant } => Some(if inf_dist(v, slope) <= eps {
                ExtReal::Finite(-constant)
            } else {
                PosInf
            }),
            ConvexFunction::Quadratic { hessian, linear, constant } => {
                let n = linear.len();
                let g: Vec<f64> = v.iter().zip(linear).map(|(a, b)| a - b).collect();
                let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || hessian[i][j] == 0.0));
                if diagonal {
                    // sup_x g x − ½h x² − eps|x| per coordinate
                    let mut total = -constant;
                    for i in 0..n {
                        let h = hessian[i][i];
                        let excess = (g[i].abs() - eps).max(0.0);
                        if h > 0.0 {
                            total += excess * excess / (2.0 * h);
                        } else if excess > 0.0 {
                            return Some(PosInf);
                        }
                    }
                    return Some(ExtReal::Finite(total));
                }
                if eps > 0.0 {
                    return None;
                }
                let h = to_dmatrix(hessian, n);
                let gv = DVector::from_column_slice(&g);
                let pinv = h.clone().pseudo_inverse(1e-12 * h.amax().max(1.0)).ok()?;
                let x = &pinv * &gv;
                let resid = (&h * &x - &gv).amax();
                if resid > 1e-10 * (1.0 + gv.amax()) {
                    return Some(PosInf);
                }
                Some(ExtReal::Finite(0.5 * gv.dot(&x) - constant))
            }
            ConvexFunction::SupportBox { lower, upper } => {
                let ok = v
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(x, (l, u))| *x >= l - eps && *x <= u + eps);
                Some(if ok { ExtReal::ZERO } else { PosInf })
            }
            ConvexFunction::ScalarLoss(l) => Some(l.conjugate_relaxed(v[0], eps)),
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                let mut total = ExtReal::ZERO;
                for b in blocks {
                    let k = b.dim();
                    total = total + b.closed_conjugate(&v[start..start + k], eps)?;
                    start += k;
                }
                Some(total)
            }
            ConvexFunction::Scaled { factor, inner } if *factor > 0.0 => {
                let w: Vec<f64> = v.iter().map(|x| x / factor).collect();
                Some(inner.closed_conjugate(&w, eps / factor)?.scale(*factor))
            }
            ConvexFunction::Sum { terms } => {
                let mut slope = vec![0.0; v.len()];
                let mut constant = 0.0;
                let mut rest = None;
                for t in terms {
                    match t.as_affine() {
                        Some((s, c)) => {
                            slope.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
                            constant += c;
                        }
                        None if rest.is_none() => rest = Some(t),
                        None => return None,
                    }
                }
                match rest {
                    None => ConvexFunction::affine(slope, constant).closed_conjugate(v, eps),
                    Some(g) => {
                        let w: Vec<f64> = v.iter().zip(&slope).map(|(a, b)| a - b).collect();
                        Some(g.closed_conjugate(&w, eps)? + (-constant))
                    }
                }
            }
            ConvexFunction::AffinePre { matrix, offset, inner } if eps == 0.0 => {
                // (g∘(M·+c))*(v) = g*(w) − w·c with Mᵀw = v when M has full row rank
                let k = matrix.len();
                let n = self.dim();
                if k > n {
                    return None;
                }
                let m = to_dmatrix(matrix, n);
                let gram: DMatrix<f64> = &m * m.transpose();
                let chol = gram.cholesky()?;
                if chol.l().diagonal().min() <= 1e-9 * m.amax().max(1.0) {
                    return None;
                }
                let vv = DVector::from_column_slice(v);
                let w = chol.solve(&(&m * &vv));
                let resid = (m.transpose() * &w - &vv).amax();
                if resid > 1e-10 * (1.0 + vv.amax()) {
                    return Some(PosInf);
                }
                let w: Vec<f64> = w.iter().copied().collect();
                Some(inner.closed_conjugate(&w, 0.0)? + (-dot(&w, offset)))
            }
            _ => None,
        }
    }

    pub(crate) fn conjugate_program(&self, v: &[f64], eps: f64) -> Result<ExtReal> {
        let mut m = Model::new();
        let z = m.add_vars(v.len());
        self.lower_objective(&mut m, &z, 1.0);
        m.add_linear(&Lin::combine(v.iter().copied(), &z), -1.0);
        add_l1_penalty(&mut m, &z, eps);
        let sol = m.solve(&Tolerances::default())?;
        Ok(match sol.status {
            Status::Optimal => ExtReal::Finite(-sol.objective),
            Status::Unbounded => PosInf,
            Status::Infeasible => NegInf,
        })
    }

    /// f(x) + f*(v) − x·v with f* relaxed by at most eps, nonnegative by the
    /// Fenchel–Young inequality.
    pub fn fenchel_residual(&self, x: &[f64], v: &[f64], eps: f64) -> Result<ExtReal> {
        let c = self.conjugate_tight(v, eps, Fallback::Allow)?;
        Ok(self.eval_tol(x, eps) + c.value - dot(x, v))
    }

    /// Whether v ∈ ∂f(x) up to `tol` in the Fenchel–Young equality.
    pub fn subgradient_check(&self, x: &[f64], v: &[f64], tol: f64) -> Result<bool> {
        Ok(match self.fenchel_residual(x, v, domain_tol(tol))? {
            ExtReal::Finite(r) => r <= tol,
            _ => false,
        })
    }

    /// For f on R^{n_x} × R^{n_u} split as (x, u):
    /// l(x, y) = inf_u f(x, u) − u·y (+ eps‖u‖₁), i.e. −(f(x, ·))*_eps(y).
    pub fn lagrangian(&self, x: &[f64], y: &[f64], eps: f64) -> Result<ExtReal> {
        let n = self.dim();
        if x.len() + y.len() != n {
            return Err(Error::Dimension { expected: n, got: x.len() + y.len() });
        }
        if y.is_empty() {
            return Ok(self.eval(x));
        }
        let mut m = Model::new();
        let u = m.add_vars(y.len());
        let mut z: Vec<Lin> = x.iter().map(|&c| Lin::constant(c)).collect();
        z.extend(u.iter().cloned());
        self.lower_objective(&mut m, &z, 1.0);
        m.add_linear(&Lin::combine(y.iter().copied(), &u), -1.0);
        add_l1_penalty(&mut m, &u, eps);
        let sol = m.solve(&Tolerances::default())?;
        Ok(match sol.status {
            Status::Optimal => ExtReal::Finite(sol.objective),
            Status::Unbounded => NegInf,
            Status::Infeasible => PosInf,
        })
    }
}

pub(crate) fn add_l1_penalty(m: &mut Model, z: &[Lin], eps: f64) {
    if eps <= 0.0 {
        return;
    }
    for zi in z {
        let a = m.add_var();
        m.le(zi.clone() - a.clone());
        m.le(-zi.clone() - a.clone());
        m.add_linear(&a, eps);
    }
}
