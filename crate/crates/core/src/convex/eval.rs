use super::{dot, mat_vec, ConvexFunction};
use crate::extreal::{ExtReal, PosInf};

impl ConvexFunction {
    /// f(x). Panics if `x` has the wrong length.
    pub fn eval(&self, x: &[f64]) -> ExtReal {
        self.eval_tol(x, 0.0)
    }

    /// f(x) with domain constraints relaxed by `tol` (relative to the
    /// magnitude of each right-hand side).
    pub fn eval_tol(&self, x: &[f64], tol: f64) -> ExtReal {
        assert_eq!(x.len(), self.dim(), "argument length does not match the function dimension");
        match self {
            ConvexFunction::Affine { slope, constant } => ExtReal::from_f64(dot(slope, x) + constant),
            ConvexFunction::Quadratic { hessian, linear, constant } => {
                let hx = mat_vec(hessian, x);
                ExtReal::from_f64(0.5 * dot(&hx, x) + dot(linear, x) + constant)
            }
            ConvexFunction::IndicatorPolyhedron { ineq, ineq_rhs, eq, eq_rhs, .. } => {
                let ok_le = ineq.iter().zip(ineq_rhs).all(|(r, b)| dot(r, x) - b <= tol * b.abs().max(1.0));
                let ok_eq = eq.iter().zip(eq_rhs).all(|(r, b)| (dot(r, x) - b).abs() <= tol * b.abs().max(1.0));
                if ok_le && ok_eq {
                    ExtReal::ZERO
                } else {
                    PosInf
                }
            }
            ConvexFunction::MaxAffine { slopes, intercepts } => ExtReal::from_f64(
                slopes
                    .iter()
                    .zip(intercepts)
                    .map(|(s, b)| dot(s, x) + b)
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            ConvexFunction::SupportBox { lower, upper } => {
                let mut total = 0.0;
                for ((&l, &u), &xi) in lower.iter().zip(upper).zip(x) {
                    let end = if xi > 0.0 { u } else if xi < 0.0 { l } else { continue };
                    if end.is_finite() {
                        total += end * xi;
                    } else if xi.abs() <= tol {
                        // within tolerance of the recession boundary
                        let other = if xi > 0.0 { l } else { u };
                        if other.is_finite() {
                            total += other * xi;
                        }
                    } else {
                        return PosInf;
                    }
                }
                ExtReal::Finite(total)
            }
            ConvexFunction::ScalarLoss(l) => l.eval_tol(x[0], tol),
            ConvexFunction::Sum { terms } => terms.iter().map(|t| t.eval_tol(x, tol)).sum(),
            ConvexFunction::AffinePre { matrix, offset, inner } => {
                let mut z = mat_vec(matrix, x);
                z.iter_mut().zip(offset).for_each(|(a, b)| *a += b);
                inner.eval_tol(&z, tol)
            }
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                let mut total = ExtReal::ZERO;
                for b in blocks {
                    let d = b.dim();
                    total = total + b.eval_tol(&x[start..start + d], tol);
                    start += d;
                }
                total
            }
            ConvexFunction::Scaled { factor, inner } => {
                let v = inner.eval_tol(x, tol);
                if *factor == 0.0 {
                    if v == PosInf {
                        PosInf
                    } else {
                        ExtReal::ZERO
                    }
                } else {
                    v.scale(*factor)
                }
            }
            ConvexFunction::NondecreasingPre { outer, inner } => match inner.eval_tol(x, tol) {
                ExtReal::Finite(h) => outer.eval_tol(h, tol),
                other => other,
            },
            ConvexFunction::Sublevel { inner } => match inner.eval_tol(x, tol) {
                ExtReal::Finite(h) if h <= tol => ExtReal::ZERO,
                _ => PosInf,
            },
        }
    }

    /// Whether x lies in the effective domain up to `tol`.
    pub fn in_domain(&self, x: &[f64], tol: f64) -> bool {
        self.eval_tol(x, tol).is_finite()
    }
}
