use nalgebra::{DMatrix, DVector};

use super::{dot, to_dmatrix, ConvexFunction};
use crate::conic::{Lin, Model, Status, Tolerances};
use crate::error::{Error, Result};

impl ConvexFunction {
    /// prox_{step·f}(x) = argmin_z f(z) + ‖z − x‖²/(2·step).
    pub fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidSpec(format!("prox step must be positive, got {step}")));
        }
        if let Some(z) = self.closed_prox(x, step) {
            return Ok(z);
        }
        self.prox_program(x, step)
    }

    fn closed_prox(&self, x: &[f64], step: f64) -> Option<Vec<f64>> {
        match self {
            ConvexFunction::Affine { slope, .. } => Some(x.iter().zip(slope).map(|(a, s)| a - step * s).collect()),
            ConvexFunction::Quadratic { hessian, linear, .. } => {
                let n = x.len();
                let h = to_dmatrix(hessian, n);
                let lhs = DMatrix::<f64>::identity(n, n) + h * step;
                let rhs = DVector::from_iterator(n, x.iter().zip(linear).map(|(a, q)| a - step * q));
                let z = lhs.cholesky()?.solve(&rhs);
                Some(z.iter().copied().collect())
            }
            ConvexFunction::SupportBox { lower, upper } => Some(
                // Moreau: prox of σ_B is the identity minus step·proj_B(·/step)
                x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(xi, (l, u))| xi - step * (xi / step).clamp(*l, *u))
                    .collect(),
            ),
            ConvexFunction::ScalarLoss(l) => Some(vec![l.prox(x[0], step)]),
            ConvexFunction::Separable { blocks } => {
                let mut out = Vec::with_capacity(x.len());
                let mut start = 0;
                for b in blocks {
                    let k = b.dim();
                    out.extend(b.closed_prox(&x[start..start + k], step)?);
                    start += k;
                }
                Some(out)
            }
            ConvexFunction::Scaled { factor, inner } if *factor > 0.0 => inner.closed_prox(x, step * factor),
            ConvexFunction::Sum { terms } => {
                let mut slope = vec![0.0; x.len()];
                let mut rest = None;
                for t in terms {
                    match t.as_affine() {
                        Some((s, _)) => slope.iter_mut().zip(&s).for_each(|(a, b)| *a += b),
                        None if rest.is_none() => rest = Some(t),
                        None => return None,
                    }
                }
                let shifted: Vec<f64> = x.iter().zip(&slope).map(|(a, s)| a - step * s).collect();
                match rest {
                    None => Some(shifted),
                    Some(g) => g.closed_prox(&shifted, step),
                }
            }
            ConvexFunction::AffinePre { matrix, offset, inner } if matrix.len() == 1 => {
                // z = x + t·m with the scalar s = m·z + c given by a scaled prox of the inner function
                let m = &matrix[0];
                let norm2 = dot(m, m);
                if norm2 == 0.0 {
                    return inner.in_domain(offset, 0.0).then(|| x.to_vec());
                }
                let s0 = dot(m, x) + offset[0];
                let s = inner.closed_prox(&[s0], step * norm2)?[0];
                let t = (s - s0) / norm2;
                Some(x.iter().zip(m).map(|(a, b)| a + t * b).collect())
            }
            _ => None,
        }
    }

    fn prox_program(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        if self.uses_exp_cone() {
            return Err(Error::NotProxFriendly(format!(
                "no proximal map for a {} function built on exponential losses",
                self.tag()
            )));
        }
        let mut m = Model::new();
        let z = m.add_vars(x.len());
        self.lower_objective(&mut m, &z, 1.0);
        for (zi, xi) in z.iter().zip(x) {
            m.add_square(&(zi.clone() - Lin::constant(*xi)), 1.0 / step);
        }
        if let Some(sol) = m.solve_equality_qp() {
            return Ok(sol[..x.len()].to_vec());
        }
        let sol = m.solve(&Tolerances::default())?;
        match sol.status {
            Status::Optimal => Ok(sol.x[..x.len()].to_vec()),
            Status::Infeasible => Err(Error::InvalidFunction("proximal map of a function with empty domain".into())),
            Status::Unbounded => Err(Error::Numerical("proximal subproblem reported unbounded".into())),
        }
    }
}
