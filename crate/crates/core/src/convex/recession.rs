use super::{dot, mat_vec, to_dmatrix, ConvexFunction};
use crate::conic::{Lin, Model, Status, Tolerances};
use crate::error::Result;
use crate::extreal::{ExtReal, PosInf};

const REC_TOL: f64 = 1e-12;

impl ConvexFunction {
    /// f^∞(d) = lim_{λ→∞} f(x + λd)/λ, evaluated analytically.
    pub fn recession(&self, d: &[f64]) -> ExtReal {
        assert_eq!(d.len(), self.dim(), "direction length does not match the function dimension");
        let scale = 1.0 + d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let small = |x: f64| x.abs() <= REC_TOL * scale;
        match self {
            ConvexFunction::Affine { slope, .. } => ExtReal::Finite(dot(slope, d)),
            ConvexFunction::Quadratic { hessian, linear, .. } => {
                let h = to_dmatrix(hessian, linear.len());
                let hd = &h * ConvexFunction::dvec(d);
                if hd.iter().all(|x| x.abs() <= REC_TOL * scale * h.amax().max(1.0)) {
                    ExtReal::Finite(dot(linear, d))
                } else {
                    PosInf
                }
            }
            ConvexFunction::IndicatorPolyhedron { ineq, eq, .. } => {
                let ok = mat_vec(ineq, d).into_iter().all(|x| x <= REC_TOL * scale)
                    && mat_vec(eq, d).into_iter().all(small);
                if ok {
                    ExtReal::ZERO
                } else {
                    PosInf
                }
            }
            ConvexFunction::MaxAffine { slopes, .. } => {
                ExtReal::Finite(mat_vec(slopes, d).into_iter().fold(f64::NEG_INFINITY, f64::max))
            }
            ConvexFunction::SupportBox { .. } => self.eval_tol(d, REC_TOL * scale),
            ConvexFunction::ScalarLoss(l) => l.recession(if small(d[0]) { 0.0 } else { d[0] }),
            ConvexFunction::Sum { terms } => terms.iter().map(|t| t.recession(d)).sum(),
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                let mut total = ExtReal::ZERO;
                for b in blocks {
                    let k = b.dim();
                    total = total + b.recession(&d[start..start + k]);
                    start += k;
                }
                total
            }
            ConvexFunction::AffinePre { matrix, inner, .. } => inner.recession(&mat_vec(matrix, d)),
            ConvexFunction::Scaled { factor, inner } => {
                let r = inner.recession(d);
                if *factor == 0.0 {
                    if r == PosInf {
                        PosInf
                    } else {
                        ExtReal::ZERO
                    }
                } else {
                    r.scale(*factor)
                }
            }
            ConvexFunction::NondecreasingPre { outer, inner } => {
                let h = match inner.as_affine() {
                    Some((s, _)) => ExtReal::Finite(dot(&s, d)),
                    None => inner.recession(d),
                };
                match h {
                    ExtReal::Finite(h) => outer.recession(if small(h) { 0.0 } else { h }),
                    other => other,
                }
            }
            ConvexFunction::Sublevel { inner } => match inner.recession(d) {
                ExtReal::Finite(h) if h <= REC_TOL * scale => ExtReal::ZERO,
                _ => PosInf,
            },
        }
    }

    /// f^∞(d) computed from the polyhedral recession lowering.
    pub fn recession_by_program(&self, d: &[f64]) -> Result<ExtReal> {
        let mut m = Model::new();
        let dl: Vec<Lin> = d.iter().map(|&x| Lin::constant(x)).collect();
        let t = self.lower_recession(&mut m, &dl);
        m.add_linear(&t, 1.0);
        let sol = m.solve(&Tolerances::default())?;
        Ok(match sol.status {
            Status::Optimal => ExtReal::Finite(sol.objective),
            Status::Infeasible => PosInf,
            Status::Unbounded => ExtReal::NegInf,
        })
    }
}
