//! Scalar losses φ(z) = scale·base(z − shift).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extreal::{ExtReal, PosInf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// ½w²
    Square,
    /// ½max(w, 0)²
    ShortfallSquare,
    /// e^w
    Exponential,
    /// max(w, 0)
    Hinge,
    /// w + δ_[lower, upper](w)
    #[serde(rename = "linear_plus_indicator")]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarLoss {
    pub kind: LossKind,
    pub scale: f64,
    pub shift: f64,
    #[serde(with = "crate::serde_ext::ext_f64", default = "neg_inf")]
    pub lower: f64,
    #[serde(with = "crate::serde_ext::ext_f64", default = "pos_inf")]
    pub upper: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl ScalarLoss {
    pub fn new(kind: LossKind, scale: f64, shift: f64) -> Self {
        ScalarLoss { kind, scale, shift, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn square() -> Self {
        ScalarLoss::new(LossKind::Square, 1.0, 0.0)
    }

    pub fn shortfall_square() -> Self {
        ScalarLoss::new(LossKind::ShortfallSquare, 1.0, 0.0)
    }

    pub fn exponential() -> Self {
        ScalarLoss::new(LossKind::Exponential, 1.0, 0.0)
    }

    pub fn hinge() -> Self {
        ScalarLoss::new(LossKind::Hinge, 1.0, 0.0)
    }

    /// slope·w restricted to w ∈ [lower, upper], where w = z − shift.
    pub fn linear(slope: f64, lower: f64, upper: f64) -> Self {
        ScalarLoss { kind: LossKind::Linear, scale: slope, shift: 0.0, lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidFunction(format!("scalar loss: {m}")));
        if !self.scale.is_finite() || !self.shift.is_finite() {
            return bad("scale and shift must be finite");
        }
        match self.kind {
            LossKind::Linear => {
                if self.lower.is_nan() || self.upper.is_nan() || self.lower > self.upper {
                    return bad("empty domain interval");
                }
                if self.lower == f64::INFINITY || self.upper == f64::NEG_INFINITY {
                    return bad("domain interval must contain a real number");
                }
            }
            _ => {
                if self.scale <= 0.0 {
                    return bad("scale must be positive");
                }
                if self.lower != f64::NEG_INFINITY || self.upper != f64::INFINITY {
                    return bad("only the linear kind takes domain bounds");
                }
            }
        }
        Ok(())
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self.kind {
            LossKind::Square => false,
            LossKind::Linear => self.scale >= 0.0 && self.lower == f64::NEG_INFINITY,
            _ => true,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.kind == LossKind::Linear
            && self.scale == 0.0
            && self.lower == f64::NEG_INFINITY
            && self.upper == f64::INFINITY
    }

    pub fn is_polyhedral(&self) -> bool {
        matches!(self.kind, LossKind::Hinge | LossKind::Linear)
    }

    pub fn is_smooth(&self) -> bool {
        match self.kind {
            LossKind::Square | LossKind::ShortfallSquare | LossKind::Exponential => true,
            LossKind::Hinge => false,
            LossKind::Linear => self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY,
        }
    }

    fn in_domain(&self, w: f64, tol: f64) -> bool {
        w >= self.lower - tol && w <= self.upper + tol
    }

    pub fn eval(&self, z: f64) -> ExtReal {
        self.eval_tol(z, 0.0)
    }

    pub fn eval_tol(&self, z: f64, tol: f64) -> ExtReal {
        let w = z - self.shift;
        let a = self.scale;
        let v = match self.kind {
            LossKind::Square => 0.5 * a * w * w,
            LossKind::ShortfallSquare => 0.5 * a * w.max(0.0).powi(2),
            LossKind::Exponential => a * w.exp(),
            LossKind::Hinge => a * w.max(0.0),
            LossKind::Linear => {
                if !self.in_domain(w, tol) {
                    return PosInf;
                }
                a * w.clamp(self.lower, self.upper)
            }
        };
        ExtReal::from_f64(v)
    }

    /// φ*(v) = v·shift + scale·base*(v/scale).
    pub fn conjugate(&self, v: f64) -> ExtReal {
        let a = self.scale;
        let lin = v * self.shift;
        let base = match self.kind {
            LossKind::Square => ExtReal::Finite(v * v / (2.0 * a)),
            LossKind::ShortfallSquare => {
                if v < 0.0 {
                    PosInf
                } else {
                    ExtReal::Finite(v * v / (2.0 * a))
                }
            }
            LossKind::Exponential => {
                if v < 0.0 {
                    PosInf
                } else if v == 0.0 {
                    ExtReal::ZERO
                } else {
                    ExtReal::Finite(v * (v / a).ln() - v)
                }
            }
            LossKind::Hinge => {
                if (0.0..=a).contains(&v) {
                    ExtReal::ZERO
                } else {
                    PosInf
                }
            }
            LossKind::Linear => support_interval(self.lower, self.upper, v - a),
        };
        base + lin
    }

    /// min of φ* over [v − eps, v + eps]: the conjugate of φ + eps·|·|.
    pub fn conjugate_relaxed(&self, v: f64, eps: f64) -> ExtReal {
        if eps <= 0.0 {
            return self.conjugate(v);
        }
        let (lo, hi) = (v - eps, v + eps);
        let a = self.scale;
        let s = self.shift;
        let mut candidates = vec![lo, hi];
        match self.kind {
            LossKind::Square => candidates.push(-a * s),
            LossKind::ShortfallSquare => candidates.extend([0.0, (-a * s).max(0.0)]),
            LossKind::Exponential => candidates.extend([0.0, a * (-s).exp()]),
            LossKind::Hinge => candidates.extend([0.0, a]),
            LossKind::Linear => candidates.push(a),
        }
        candidates
            .into_iter()
            .map(|u| self.conjugate(u.clamp(lo, hi)))
            .fold(PosInf, |best, c| if c < best { c } else { best })
    }

    /// φ^∞(d).
    pub fn recession(&self, d: f64) -> ExtReal {
        match self.kind {
            LossKind::Square => {
                if d == 0.0 {
                    ExtReal::ZERO
                } else {
                    PosInf
                }
            }
            LossKind::ShortfallSquare | LossKind::Exponential => {
                if d <= 0.0 {
                    ExtReal::ZERO
                } else {
                    PosInf
                }
            }
            LossKind::Hinge => ExtReal::Finite(self.scale * d.max(0.0)),
            LossKind::Linear => {
                let ok = (d >= 0.0 || self.lower == f64::NEG_INFINITY)
                    && (d <= 0.0 || self.upper == f64::INFINITY);
                if ok {
                    ExtReal::Finite(self.scale * d)
                } else {
                    PosInf
                }
            }
        }
    }

    /// argmin_z φ(z) + (z − x)²/(2·step).
    pub fn prox(&self, x: f64, step: f64) -> f64 {
        let a = self.scale;
        let s = self.shift;
        match self.kind {
            LossKind::Square => (x + step * a * s) / (1.0 + step * a),
            LossKind::ShortfallSquare => {
                if x <= s {
                    x
                } else {
                    (x + step * a * s) / (1.0 + step * a)
                }
            }
            LossKind::Hinge => {
                if x <= s {
                    x
                } else if x - step * a >= s {
                    x - step * a
                } else {
                    s
                }
            }
            LossKind::Linear => (x - step * a).clamp(s + self.lower, s + self.upper),
            LossKind::Exponential => {
                // root of g(z) = z − x + step·a·e^{z−s}, increasing in z
                let g = |z: f64| z - x + step * a * (z - s).exp();
                let mut hi = x;
                let mut lo = x - step * a * (x - s).exp();
                if g(lo) > 0.0 {
                    lo = x - 1.0;
                    while g(lo) > 0.0 {
                        lo -= 2.0 * (x - lo);
                    }
                }
                let mut z = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let gz = g(z);
                    if gz > 0.0 {
                        hi = z;
                    } else {
                        lo = z;
                    }
                    let newton = z - gz / (1.0 + step * a * (z - s).exp());
                    z = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                    if (hi - lo).abs() <= 1e-15 * (1.0 + z.abs()) || gz == 0.0 {
                        break;
                    }
                }
                z
            }
        }
    }
}

/// σ_[lo, hi](v) = sup_{w ∈ [lo, hi]} v·w.
pub(crate) fn support_interval(lo: f64, hi: f64, v: f64) -> ExtReal {
    if v > 0.0 {
        if hi == f64::INFINITY {
            PosInf
        } else {
            ExtReal::Finite(v * hi)
        }
    } else if v < 0.0 {
        if lo == f64::NEG_INFINITY {
            PosInf
        } else {
            ExtReal::Finite(v * lo)
        }
    } else {
        ExtReal::ZERO
    }
}
