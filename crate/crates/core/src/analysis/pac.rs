//! Closed-form quantities of the PAC-type embedding guarantee.
//!
//! For `n` points and a target probability `δ`, with `λ = log_n √δ`:
//!
//! ```text
//! D(δ) = −2 (1+λ)^{(1+λ)/λ} / λ,      θ_D solves 2/D = (1−θ) θ^{θ/(1−θ)},
//! ```
//!
//! and `θ_{D(δ)} = 1 + λ`. A random pair is embedded with distortion `D`
//! with probability at least `n^{−2+2θ_D}`.

use crate::error::{Error, Result};

/// `(1−θ) θ^{θ/(1−θ)}`, strictly decreasing from 1 to 0 on `(0, 1)`.
pub fn theta_equation_rhs(theta: f64) -> f64 {
    if theta <= 0.0 {
        return 1.0;
    }
    if theta >= 1.0 {
        return 0.0;
    }
    (1.0 - theta) * (theta / (1.0 - theta) * theta.ln()).exp()
}

/// Smallest admissible probability: `max(e⁻², n⁻²)`.
pub fn min_valid_delta(n: usize) -> f64 {
    (-2.0f64).exp().max((n as f64).powi(-2))
}

/// Distortion attainable with probability `delta` on `n` points.
pub fn pac_distortion_from_delta(n: usize, delta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let floor = min_valid_delta(n);
    if !(delta > floor && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} outside the valid range ({floor}, 1) for n = {n}"
        )));
    }
    let lambda = delta.sqrt().ln() / (n as f64).ln();
    let base = 1.0 + lambda;
    Ok(-2.0 * base.powf(base / lambda) / lambda)
}

/// Solves `2/D = (1−θ) θ^{θ/(1−θ)}` for `θ ∈ (0, 1)` by bisection.
pub fn pac_theta_from_distortion(distortion: f64) -> Result<f64> {
    if !(distortion > 2.0) || !distortion.is_finite() {
        return Err(Error::InvalidParameter(format!("distortion must be finite and > 2, got {distortion}")));
    }
    let target = 2.0 / distortion;
    let mut lo = (1.0 - 2.0 * std::f64::consts::E / distortion).max(0.0);
    if theta_equation_rhs(lo) < target {
        lo = 0.0;
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta_equation_rhs(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `n^{−2+2θ}`.
pub fn pac_probability_bound(n: usize, theta: f64) -> f64 {
    (n as f64).powf(-2.0 + 2.0 * theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_at_eight_is_one_half() {
        let t = pac_theta_from_distortion(8.0).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(theta_equation_rhs(0.5), 0.25);
    }

    #[test]
    fn distortion_at_ten_points_quarter() {
        // λ = log₁₀ 0.5, D = −2 (1+λ)^{(1+λ)/λ} / λ
        let lambda = 0.5f64.log10();
        let expected = -2.0 * (1.0 + lambda).powf((1.0 + lambda) / lambda) / lambda;
        let d = pac_distortion_from_delta(10, 0.25).unwrap();
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 15.260765256558651).abs() < 1e-9);
    }

    #[test]
    fn distortion_grows_to_infinity_and_stays_above_two() {
        for n in [3, 10, 1000] {
            let floor = min_valid_delta(n);
            let mut prev = 2.0;
            for k in 1..200 {
                let delta = floor + (1.0 - floor) * k as f64 / 200.0;
                let d = pac_distortion_from_delta(n, delta).unwrap();
                assert!(d > prev, "n = {n}, delta = {delta}");
                prev = d;
            }
            assert!(pac_distortion_from_delta(n, 1.0 - 1e-9).unwrap() > 1e6);
        }
    }

    #[test]
    fn rejects_invalid_delta() {
        assert!(pac_distortion_from_delta(10, 0.1).is_err());
        assert!(pac_distortion_from_delta(10, 1.0).is_err());
        assert!(pac_distortion_from_delta(1, 0.5).is_err());
        let err = pac_distortion_from_delta(2, 0.2).unwrap_err().to_string();
        assert!(err.contains("0.25"), "{err}");
        assert!(pac_distortion_from_delta(10, 0.13).is_err());
        assert!(pac_theta_from_distortion(2.0).is_err());
    }

    #[test]
    fn theta_tends_to_one() {
        let mut prev = 0.0;
        for d in [2.5, 4.0, 8.0, 50.0, 1e3, 1e6] {
            let t = pac_theta_from_distortion(d).unwrap();
            assert!(t > prev);
            assert!((theta_equation_rhs(t) - 2.0 / d).abs() <= 1e-10);
            prev = t;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn round_trip() {
        for n in [5usize, 10, 100] {
            for delta in [0.3, 0.5, 0.9] {
                let d = pac_distortion_from_delta(n, delta).unwrap();
                let theta = pac_theta_from_distortion(d).unwrap();
                let expected = 1.0 + delta.sqrt().ln() / (n as f64).ln();
                assert!((theta - expected).abs() < 1e-8, "n = {n}, delta = {delta}");
            }
        }
    }
}
