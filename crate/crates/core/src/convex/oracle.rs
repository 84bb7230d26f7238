//! Brute-force conjugate evaluation used to cross-check closed forms.

use super::{dot, ConvexFunction};
use crate::extreal::{ExtReal, NegInf};

/// Grid maximum of a concave objective over the box [lo, hi].
///
/// One-dimensional boxes are scanned at spacing `resolution`. Larger boxes
/// and higher dimensions start from a coarse grid and repeatedly halve the
/// box around the incumbent until the spacing reaches `resolution`; for a
/// concave objective the maximizer stays inside the refined box.
pub fn grid_maximum(lo: &[f64], hi: &[f64], resolution: f64, obj: impl Fn(&[f64]) -> Option<f64>) -> ExtReal {
    let n = lo.len();
    assert_eq!(hi.len(), n);
    assert!(resolution > 0.0);
    if n == 0 {
        return obj(&[]).map_or(NegInf, ExtReal::Finite);
    }
    let width = (0..n).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max);
    if n == 1 && width / resolution <= 2e6 {
        let k = (width / resolution).ceil() as usize;
        return (0..=k)
            .map(|i| (lo[0] + resolution * i as f64).min(hi[0]))
            .filter_map(|x| obj(&[x]))
            .fold(NegInf, |b, c| b.max(ExtReal::Finite(c)));
    }

    let per_axis = ((20_000f64).powf(1.0 / n as f64).floor() as usize).clamp(5, 201);
    let (mut l, mut h) = (lo.to_vec(), hi.to_vec());
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if h[i] <= l[i] {
                    vec![l[i]]
                } else {
                    (0..per_axis).map(|k| l[i] + (h[i] - l[i]) * k as f64 / (per_axis - 1) as f64).collect()
                }
            })
            .collect();
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        'grid: loop {
            for i in 0..n {
                x[i] = axes[i][idx[i]];
            }
            if let Some(val) = obj(&x) {
                if best.as_ref().map_or(true, |(b, _)| val > *b) {
                    best = Some((val, x.clone()));
                }
            }
            for k in 0..n {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    continue 'grid;
                }
                idx[k] = 0;
            }
            break;
        }
        let spacing = (0..n).map(|i| (h[i] - l[i]) / (per_axis - 1) as f64).fold(0.0f64, f64::max);
        let Some((_, centre)) = &best else { break };
        if spacing <= resolution {
            break;
        }
        for i in 0..n {
            let half = 0.25 * (h[i] - l[i]);
            l[i] = (centre[i] - half).max(lo[i]);
            h[i] = (centre[i] + half).min(hi[i]);
        }
    }
    best.map_or(NegInf, |(b, _)| ExtReal::Finite(b))
}

/// max over a grid on [lo, hi] of v·x − f(x): a lower bound on f*(v) that is
/// accurate to O(resolution·‖v‖) when the supremum is attained in the box.
pub fn conjugate_numeric_oracle(f: &ConvexFunction, v: &[f64], lo: &[f64], hi: &[f64], resolution: f64) -> ExtReal {
    assert_eq!(v.len(), f.dim());
    grid_maximum(lo, hi, resolution, |x| f.eval(x).finite().map(|fx| dot(v, x) - fx))
}
