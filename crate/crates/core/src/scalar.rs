use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Field the tree calculus runs over: `f64` for solvers, `BigRational` for exact checks.
pub trait Scalar: Signed + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// Slack allowed in structural checks (probability sums and the like).
    fn structural_tol() -> Self;
    fn to_float(&self) -> f64;
    /// Exact for rationals: every finite float is a dyadic rational.
    fn from_float(x: f64) -> Self;
    fn from_count(n: usize) -> Self;
}

impl Scalar for f64 {
    fn structural_tol() -> Self {
        1e-12
    }
    fn to_float(&self) -> f64 {
        *self
    }
    fn from_float(x: f64) -> Self {
        x
    }
    fn from_count(n: usize) -> Self {
        n as f64
    }
}

impl Scalar for BigRational {
    fn structural_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn to_float(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_float(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn from_count(n: usize) -> Self {
        <BigRational as FromPrimitive>::from_usize(n).expect("usize fits in BigInt")
    }
}

pub fn max_abs<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    values
        .into_iter()
        .map(|v| v.abs())
        .fold(F::zero(), |acc, v| if v > acc { v } else { acc })
}
