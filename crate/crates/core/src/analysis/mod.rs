//! Distortion statistics of an embedding and the empirical PAC curve.

pub mod export;
pub mod pac;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{check_alpha, FiniteMetricSpace};
use crate::scalar::Real;

pub use pac::{min_valid_delta, pac_distortion_from_delta, pac_probability_bound, pac_theta_from_distortion};

/// Per-pair ratios `ρ = D_emb / d^α` and their summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DistortionReport<T> {
    pub pair_ratios: Vec<T>,
    pub mean_rel_error: T,
    pub max_rel_error: T,
    /// `min ρ`.
    pub scale_s: T,
    /// `max ρ / min ρ`; infinite when some pair collapses.
    pub distortion_d: T,
}

/// Compares embedded distances `(i, j, D_emb)` against `d(i, j)^α`.
pub fn distortion_report<T: Real>(
    space: &FiniteMetricSpace<T>,
    embedded: &[(usize, usize, T)],
    alpha: T,
) -> Result<DistortionReport<T>> {
    check_alpha(alpha)?;
    if embedded.is_empty() {
        return Err(Error::InvalidParameter("distortion report needs at least one pair".into()));
    }
    let n = space.len();
    let mut ratios = Vec::with_capacity(embedded.len());
    let mut sum = T::zero();
    let mut max_err = T::zero();
    for &(i, j, e) in embedded {
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        let d = space.d(i, j);
        if d <= T::zero() {
            return Err(Error::ZeroDistance { i, j });
        }
        if !e.is_finite() || e < T::zero() {
            return Err(Error::Numeric(format!("embedded distance ({i}, {j}) = {e}")));
        }
        let target = d.powf(alpha);
        let rel = (target - e).abs() / target;
        sum += rel;
        max_err = max_err.max(rel);
        ratios.push(e / target);
    }
    let lo = ratios.iter().fold(T::infinity(), |m, &r| m.min(r));
    let hi = ratios.iter().fold(T::zero(), |m, &r| m.max(r));
    let distortion = if lo > T::zero() { hi / lo } else { T::infinity() };
    Ok(DistortionReport {
        mean_rel_error: sum / T::from_usize_lossy(ratios.len()),
        max_rel_error: max_err,
        scale_s: lo,
        distortion_d: distortion,
        pair_ratios: ratios,
    })
}

/// Best fraction of pairs whose ratios fit in a window `[s, s·D]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PacCurve<T> {
    pub distortion: Vec<T>,
    pub fraction: Vec<T>,
}

/// For each `D` in `grid`, slides a multiplicative window over the sorted
/// ratios and keeps the fullest one.
pub fn pac_fraction_curve<T: Real>(report: &DistortionReport<T>, grid: &[T]) -> Result<PacCurve<T>> {
    if let Some(&bad) = grid.iter().find(|&&d| !(d >= T::one())) {
        return Err(Error::InvalidParameter(format!("distortion grid values must be >= 1, got {bad}")));
    }
    let mut r = report.pair_ratios.clone();
    r.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let m = r.len();
    let slack = T::one() + T::tol(1e-12);
    let fraction = grid
        .iter()
        .map(|&d| {
            let mut best = 0;
            let mut hi = 0;
            for lo in 0..m {
                hi = hi.max(lo);
                let limit = r[lo] * d * slack;
                while hi < m && (r[hi] <= limit || d.is_infinite()) {
                    hi += 1;
                }
                best = best.max(hi - lo);
            }
            T::from_usize_lossy(best) / T::from_usize_lossy(m.max(1))
        })
        .collect();
    Ok(PacCurve { distortion: grid.to_vec(), fraction })
}
