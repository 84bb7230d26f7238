//! Conic lowering of catalogue functions.
//!
//! `lower_epigraph` returns an expression `e` and adds constraints such that
//! the set of feasible `(z, e)` is exactly the epigraph of f, so that
//! minimizing `e` recovers f(z).

use super::{ConvexFunction, LossKind, ScalarLoss};
use crate::conic::{Lin, Model};

const EIG_TOL: f64 = 1e-12;

pub(crate) fn affine_map(matrix: &[Vec<f64>], offset: &[f64], z: &[Lin]) -> Vec<Lin> {
    matrix
        .iter()
        .zip(offset)
        .map(|(row, c)| Lin::combine(row.iter().copied(), z) + *c)
        .collect()
}

fn linear_map(matrix: &[Vec<f64>], z: &[Lin]) -> Vec<Lin> {
    matrix.iter().map(|row| Lin::combine(row.iter().copied(), z)).collect()
}

/// Factor rows w_k = √λ_k v_kᵀ for the positive eigenpairs of a PSD matrix.
pub(crate) fn psd_factor(hessian: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = hessian.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let h = ConvexFunction::hessian_matrix(&hessian.to_vec());
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1.0);
    let (mut range, mut kernel) = (Vec::new(), Vec::new());
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        if lam > EIG_TOL * top {
            range.push(v.iter().map(|x| x * lam.sqrt()).collect());
        } else {
            kernel.push(v);
        }
    }
    (range, kernel)
}

impl ScalarLoss {
    pub(crate) fn lower_epigraph(&self, m: &mut Model, z: &Lin) -> Lin {
        let a = self.scale;
        let w = z.clone() - Lin::constant(self.shift);
        match self.kind {
            LossKind::Square => {
                let t = m.add_var();
                m.soc(vec![t.clone() + 0.5, w * a.sqrt(), t.clone() + (-0.5)]);
                t
            }
            LossKind::ShortfallSquare => {
                let r = m.add_var();
                m.le(w - r.clone());
                m.le(-r.clone());
                let t = m.add_var();
                m.soc(vec![t.clone() + 0.5, r * a.sqrt(), t.clone() + (-0.5)]);
                t
            }
            LossKind::Exponential => {
                let t = m.add_var();
                m.exp_cone(w + a.ln(), Lin::constant(1.0), t.clone());
                t
            }
            LossKind::Hinge => {
                let t = m.add_var();
                m.le(-t.clone());
                m.le(w * a - t.clone());
                t
            }
            LossKind::Linear => {
                self.lower_bounds(m, &w);
                w * a
            }
        }
    }

    fn lower_bounds(&self, m: &mut Model, w: &Lin) {
        if self.lower.is_finite() {
            if self.lower == self.upper {
                m.eq(w.clone() - Lin::constant(self.lower));
                return;
            }
            m.le(Lin::constant(self.lower) - w.clone());
        }
        if self.upper.is_finite() {
            m.le(w.clone() - Lin::constant(self.upper));
        }
    }

    pub(crate) fn lower_objective(&self, m: &mut Model, z: &Lin, weight: f64) {
        let a = self.scale;
        let w = z.clone() - Lin::constant(self.shift);
        match self.kind {
            LossKind::Square => m.add_square(&w, weight * a),
            LossKind::ShortfallSquare => {
                let r = m.add_var();
                m.le(w - r.clone());
                m.le(-r.clone());
                m.add_square(&r, weight * a);
            }
            LossKind::Linear => {
                self.lower_bounds(m, &w);
                m.add_linear(&(w * a), weight);
            }
            _ => {
                let t = self.lower_epigraph(m, z);
                m.add_linear(&t, weight);
            }
        }
    }

    /// Epigraph of φ^∞ at `d`.
    pub(crate) fn lower_recession(&self, m: &mut Model, d: &Lin) -> Lin {
        match self.kind {
            LossKind::Square => {
                m.eq(d.clone());
                Lin::zero()
            }
            LossKind::ShortfallSquare | LossKind::Exponential => {
                m.le(d.clone());
                Lin::zero()
            }
            LossKind::Hinge => {
                let t = m.add_var();
                m.le(-t.clone());
                m.le(d.clone() * self.scale - t.clone());
                t
            }
            LossKind::Linear => {
                if self.lower.is_finite() && self.upper.is_finite() {
                    m.eq(d.clone());
                } else if self.lower.is_finite() {
                    m.le(-d.clone());
                } else if self.upper.is_finite() {
                    m.le(d.clone());
                }
                d.clone() * self.scale
            }
        }
    }
}

impl ConvexFunction {
    /// Adds `weight·f(z)` to the model objective together with domain constraints.
    pub(crate) fn lower_objective(&self, m: &mut Model, z: &[Lin], weight: f64) {
        debug_assert_eq!(z.len(), self.dim());
        match self {
            ConvexFunction::Affine { slope, constant } => {
                m.add_linear(&(Lin::combine(slope.iter().copied(), z) + *constant), weight);
            }
            ConvexFunction::Quadratic { hessian, linear, constant } => {
                m.add_quadratic(z, &ConvexFunction::hessian_matrix(hessian), weight);
                m.add_linear(&(Lin::combine(linear.iter().copied(), z) + *constant), weight);
            }
            ConvexFunction::ScalarLoss(l) => l.lower_objective(m, &z[0], weight),
            ConvexFunction::Sum { terms } => terms.iter().for_each(|t| t.lower_objective(m, z, weight)),
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                for b in blocks {
                    let d = b.dim();
                    b.lower_objective(m, &z[start..start + d], weight);
                    start += d;
                }
            }
            ConvexFunction::AffinePre { matrix, offset, inner } => {
                inner.lower_objective(m, &affine_map(matrix, offset, z), weight)
            }
            ConvexFunction::Scaled { factor, inner } => inner.lower_objective(m, z, weight * factor),
            ConvexFunction::NondecreasingPre { outer, inner } => {
                let h = inner.lower_scalar(m, z);
                outer.lower_objective(m, &h, weight);
            }
            _ => {
                let t = self.lower_epigraph(m, z);
                m.add_linear(&t, weight);
            }
        }
    }

    /// Exact affine expression when the function is affine, epigraph otherwise.
    fn lower_scalar(&self, m: &mut Model, z: &[Lin]) -> Lin {
        match self.as_affine() {
            Some((s, c)) => Lin::combine(s, z) + c,
            None => self.lower_epigraph(m, z),
        }
    }

    pub(crate) fn lower_epigraph(&self, m: &mut Model, z: &[Lin]) -> Lin {
        debug_assert_eq!(z.len(), self.dim());
        match self {
            ConvexFunction::Affine { slope, constant } => Lin::combine(slope.iter().copied(), z) + *constant,
            ConvexFunction::Quadratic { hessian, linear, constant } => {
                let lin = Lin::combine(linear.iter().copied(), z) + *constant;
                let (range, _) = psd_factor(hessian);
                if range.is_empty() {
                    return lin;
                }
                let t = m.add_var();
                let tau = t.clone() - lin;
                let mut cone = vec![tau.clone() + 0.5];
                cone.extend(linear_map(&range, z));
                cone.push(tau + (-0.5));
                m.soc(cone);
                t
            }
            ConvexFunction::IndicatorPolyhedron { ineq, ineq_rhs, eq, eq_rhs, .. } => {
                for (row, b) in ineq.iter().zip(ineq_rhs) {
                    m.le(Lin::combine(row.iter().copied(), z) - Lin::constant(*b));
                }
                for (row, b) in eq.iter().zip(eq_rhs) {
                    m.eq(Lin::combine(row.iter().copied(), z) - Lin::constant(*b));
                }
                Lin::zero()
            }
            ConvexFunction::MaxAffine { slopes, intercepts } => {
                let t = m.add_var();
                for (row, b) in slopes.iter().zip(intercepts) {
                    m.le(Lin::combine(row.iter().copied(), z) + *b - t.clone());
                }
                t
            }
            ConvexFunction::SupportBox { lower, upper } => lower_support_box(m, lower, upper, z),
            ConvexFunction::ScalarLoss(l) => l.lower_epigraph(m, &z[0]),
            ConvexFunction::Sum { terms } => {
                terms.iter().fold(Lin::zero(), |acc, t| acc + t.lower_epigraph(m, z))
            }
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                let mut acc = Lin::zero();
                for b in blocks {
                    let d = b.dim();
                    acc = acc + b.lower_epigraph(m, &z[start..start + d]);
                    start += d;
                }
                acc
            }
            ConvexFunction::AffinePre { matrix, offset, inner } => {
                inner.lower_epigraph(m, &affine_map(matrix, offset, z))
            }
            ConvexFunction::Scaled { factor, inner } => inner.lower_epigraph(m, z) * *factor,
            ConvexFunction::NondecreasingPre { outer, inner } => {
                let h = inner.lower_scalar(m, z);
                outer.lower_epigraph(m, &h)
            }
            ConvexFunction::Sublevel { inner } => {
                let h = inner.lower_scalar(m, z);
                m.le(h);
                Lin::zero()
            }
        }
    }

    /// Epigraph of the recession function f^∞ at `d`. Only linear and
    /// equality/inequality rows are added: every catalogue recession
    /// function is polyhedral.
    pub(crate) fn lower_recession(&self, m: &mut Model, d: &[Lin]) -> Lin {
        match self {
            ConvexFunction::Affine { slope, .. } => Lin::combine(slope.iter().copied(), d),
            ConvexFunction::Quadratic { hessian, linear, .. } => {
                let (range, _) = psd_factor(hessian);
                for e in linear_map(&range, d) {
                    m.eq(e);
                }
                Lin::combine(linear.iter().copied(), d)
            }
            ConvexFunction::IndicatorPolyhedron { ineq, eq, .. } => {
                for e in linear_map(ineq, d) {
                    m.le(e);
                }
                for e in linear_map(eq, d) {
                    m.eq(e);
                }
                Lin::zero()
            }
            ConvexFunction::MaxAffine { slopes, .. } => {
                let t = m.add_var();
                for e in linear_map(slopes, d) {
                    m.le(e - t.clone());
                }
                t
            }
            ConvexFunction::SupportBox { lower, upper } => lower_support_box(m, lower, upper, d),
            ConvexFunction::ScalarLoss(l) => l.lower_recession(m, &d[0]),
            ConvexFunction::Sum { terms } => {
                terms.iter().fold(Lin::zero(), |acc, t| acc + t.lower_recession(m, d))
            }
            ConvexFunction::Separable { blocks } => {
                let mut start = 0;
                let mut acc = Lin::zero();
                for b in blocks {
                    let k = b.dim();
                    acc = acc + b.lower_recession(m, &d[start..start + k]);
                    start += k;
                }
                acc
            }
            ConvexFunction::AffinePre { matrix, inner, .. } => inner.lower_recession(m, &linear_map(matrix, d)),
            ConvexFunction::Scaled { factor, inner } => inner.lower_recession(m, d) * *factor,
            ConvexFunction::NondecreasingPre { outer, inner } => {
                let h = match inner.as_affine() {
                    Some((s, _)) => Lin::combine(s, d),
                    None => inner.lower_recession(m, d),
                };
                outer.lower_recession(m, &h)
            }
            ConvexFunction::Sublevel { inner } => {
                let h = inner.lower_recession(m, d);
                m.le(h);
                Lin::zero()
            }
        }
    }
}

fn lower_support_box(m: &mut Model, lower: &[f64], upper: &[f64], z: &[Lin]) -> Lin {
    let mut acc = Lin::zero();
    for ((&l, &u), zi) in lower.iter().zip(upper).zip(z) {
        match (l.is_finite(), u.is_finite()) {
            _ if l == u => acc.add_scaled(zi, l),
            (true, true) => {
                let t = m.add_var();
                m.le(zi.clone() * l - t.clone());
                m.le(zi.clone() * u - t.clone());
                acc = acc + t;
            }
            (true, false) => {
                m.le(zi.clone());
                acc.add_scaled(zi, l);
            }
            (false, true) => {
                m.le(-zi.clone());
                acc.add_scaled(zi, u);
            }
            (false, false) => {
                m.eq(zi.clone());
            }
        }
    }
    acc
}
