//! One-dimensional W₂ through quantile functions.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transport::GaussianMixture1D;

const SERIES_CUTOFF: f64 = 1.5;
const SERIES_TERMS: usize = 25;
const CONTFRAC_CUTOFF: f64 = 30.0;
const CONTFRAC_TERMS: usize = 50;

/// Error function: Taylor series near zero, a continued fraction for
/// the complement in the tails. Absolute error is below `1e-14` in `f64`.
pub fn erf<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(SERIES_CUTOFF) {
        erf_series(x)
    } else {
        let cf = if ax >= T::lit(CONTFRAC_CUTOFF) { T::zero() } else { erfc_contfrac(ax) };
        (T::one() - cf).copysign(x)
    }
}

/// Complementary error function `1 - erf(x)`.
pub fn erfc<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(SERIES_CUTOFF) {
        T::one() - erf_series(x)
    } else {
        let cf = if ax >= T::lit(CONTFRAC_CUTOFF) { T::zero() } else { erfc_contfrac(ax) };
        if x > T::zero() {
            cf
        } else {
            T::lit(2.0) - cf
        }
    }
}

fn erf_series<T: Real>(x: T) -> T {
    // erf(x) = 2x/√π · exp(-x²) · Σ (2x²)^k / (1·3·5···(2k+1))
    let x2 = x * x;
    let mut acc = T::zero();
    let mut fk = T::lit(SERIES_TERMS as f64) + T::lit(0.5);
    for _ in 0..SERIES_TERMS {
        acc = T::lit(2.0) + x2 * acc / fk;
        fk -= T::one();
    }
    acc * x * (-x2).exp() / T::pi().sqrt()
}

fn erfc_contfrac<T: Real>(x: T) -> T {
    // forward three-term recurrence for the convergents; x >= 1.5
    let x2 = x * x;
    let mut a = T::zero();
    let mut da = T::lit(0.5);
    let mut p = T::one();
    let mut p_last = T::zero();
    let mut q = da + x2;
    let mut q_last = T::one();
    for _ in 0..CONTFRAC_TERMS {
        a += da;
        da += T::lit(2.0);
        let b = da + x2;
        let p_next = b * p - a * p_last;
        let q_next = b * q - a * q_last;
        p_last = p;
        p = p_next;
        q_last = q;
        q = q_next;
    }
    p / q * x * (-x2).exp() / T::pi().sqrt()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf<T: Real>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::lit(std::f64::consts::SQRT_2))
}

/// Exact W₂ between two finitely supported measures on the line, given as
/// `(weight, location)` atoms. Pairs quantile segments of the two sorted
/// cumulative weight functions.
pub fn w2_empirical_1d<T: Real>(a: &[(T, T)], b: &[(T, T)]) -> Result<T> {
    let sa = sorted_atoms(a, "first")?;
    let sb = sorted_atoms(b, "second")?;
    let (mut i, mut j) = (0, 0);
    let mut ra = sa[0].0;
    let mut rb = sb[0].0;
    let mut total = T::zero();
    loop {
        let m = ra.min(rb);
        let diff = sa[i].1 - sb[j].1;
        total += m * diff * diff;
        ra -= m;
        rb -= m;
        // advance whichever atom is used up; ties advance both
        let a_done = ra <= rb;
        let b_done = rb <= ra;
        if a_done {
            i += 1;
            if i == sa.len() {
                break;
            }
            ra += sa[i].0;
        }
        if b_done {
            j += 1;
            if j == sb.len() {
                break;
            }
            rb += sb[j].0;
        }
    }
    Ok(total.max(T::zero()).sqrt())
}

fn sorted_atoms<T: Real>(atoms: &[(T, T)], what: &str) -> Result<Vec<(T, T)>> {
    let w: Vec<T> = atoms.iter().map(|a| a.0).collect();
    crate::transport::simplex::check_simplex(&w, what)?;
    if let Some(a) = atoms.iter().find(|a| !a.1.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite atom location {}", a.1)));
    }
    let mut v = atoms.to_vec();
    v.sort_by(|x, y| x.1.partial_cmp(&y.1).expect("finite locations"));
    Ok(v)
}

/// Mixture CDF; zero-width components contribute a unit step at their mean.
pub fn mixture_cdf<T: Real>(p: &GaussianMixture1D<T>, x: T) -> T {
    p.components()
        .iter()
        .map(|c| {
            let mass = if c.std > T::zero() {
                normal_cdf((x - c.mean) / c.std)
            } else if x >= c.mean {
                T::one()
            } else {
                T::zero()
            };
            c.w * mass
        })
        .sum()
}

/// Quantiles of `p` at increasing levels `ts` by bisection on the CDF.
fn quantiles<T: Real>(p: &GaussianMixture1D<T>, ts: &[T]) -> Vec<T> {
    let spread = T::lit(40.0);
    let lo0 = p.components().iter().map(|c| c.mean - spread * c.std).fold(T::infinity(), T::min) - T::one();
    let hi0 = p.components().iter().map(|c| c.mean + spread * c.std).fold(T::neg_infinity(), T::max) + T::one();
    let width_tol = T::epsilon() * T::lit(4.0) * (hi0.abs().max(lo0.abs()).max(T::one()));
    let mut lower = lo0;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let (mut lo, mut hi) = (lower, hi0);
        assert!(mixture_cdf(p, hi) >= t, "quantile bisection is not bracketed at level {t}");
        // invariant: F(lo) < t <= F(hi)
        for _ in 0..200 {
            if hi - lo <= width_tol {
                break;
            }
            let mid = lo + (hi - lo) * T::lit(0.5);
            if mixture_cdf(p, mid) >= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(hi);
        lower = lo;
    }
    out
}

/// W₂ between two univariate mixtures, `sqrt(∫₀¹ (Q_p(t) - Q_q(t))² dt)`,
/// by the midpoint rule on `grid` nodes.
pub fn w2_mixture_1d_numeric<T: Real>(p: &GaussianMixture1D<T>, q: &GaussianMixture1D<T>, grid: usize) -> Result<T> {
    if grid < 64 {
        return Err(Error::InvalidParameter(format!("quadrature grid must have at least 64 nodes, got {grid}")));
    }
    let g = T::from_usize_lossy(grid);
    let ts: Vec<T> = (0..grid).map(|k| (T::from_usize_lossy(k) + T::lit(0.5)) / g).collect();
    let qp = quantiles(p, &ts);
    let qq = quantiles(q, &ts);
    let sum: T = qp.iter().zip(&qq).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sum / g).sqrt())
}
