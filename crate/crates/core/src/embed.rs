//! Constructive embeddings into degenerate Gaussian mixtures.
//!
//! A vector `x ∈ ℝ^D` whose coordinates are increasing maps to the uniform
//! empirical measure on `√D · x`; W₂ between two such measures pairs sorted
//! atoms, i.e. coordinates, so the map is an isometry from `(ℝ^D_<, ‖·‖₂)`.
//! A shared bias pushes every vector of a finite set into that cone.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metric::{check_alpha, FiniteMetricSpace, LandmarkSet};
use crate::model::{Layer, MLPParams, PTParams};
use crate::scalar::Real;
use crate::transport::GaussianMixture1D;

/// Shift that makes every generating vector strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasVector<T> {
    pub b: Vec<T>,
}

impl<T: Real> BiasVector<T> {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Whether `x + b` is strictly increasing with gaps of at least `margin`.
    pub fn orders(&self, x: &[T], margin: T) -> bool {
        x.len() == self.b.len() && x.windows(2).zip(self.b.windows(2)).all(|(xs, bs)| xs[1] + bs[1] - xs[0] - bs[0] >= margin)
    }

    /// One comma-separated line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(self.b.iter().map(T::to_string))?;
        out.flush()?;
        Ok(())
    }
}

/// Cumulative shift: `b_1 = 0` and
/// `b_k = max_n ReLU(x^n_{k-1} + b_{k-1} - x^n_k) + margin`,
/// with `margin = 1e-6 · (1 + spread)` and `spread` the range of all
/// coordinates.
pub fn initialize_bias<T: Real>(vectors: &[Vec<T>]) -> Result<BiasVector<T>> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidParameter("bias initialization needs at least one vector".into()));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidParameter("vectors must be nonempty".into()));
    }
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
        for &x in v {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite coordinate {x}")));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let margin = T::lit(1e-6) * (T::one() + (hi - lo));
    let mut b = vec![T::zero(); d];
    for k in 1..d {
        let need = vectors.iter().map(|v| (v[k - 1] + b[k - 1] - v[k]).max(T::zero())).fold(T::zero(), T::max);
        b[k] = need + margin;
    }
    Ok(BiasVector { b })
}

/// `(1/D) Σ_k δ_{√D (x + b)_k}`.
pub fn ball_to_empirical<T: Real>(x: &[T], bias: &BiasVector<T>) -> Result<GaussianMixture1D<T>> {
    if x.len() != bias.len() {
        return Err(Error::DimensionMismatch { expected: bias.len(), got: x.len() });
    }
    let root = T::from_usize_lossy(x.len()).sqrt();
    let atoms: Vec<T> = x.iter().zip(&bias.b).map(|(&xi, &bi)| root * (xi + bi)).collect();
    GaussianMixture1D::empirical(&atoms)
}

/// Snowflake, Fréchet features against every point, shared bias, empirical
/// measure. Distances satisfy `d^α ≤ MW₂ ≤ √n · d^α`.
pub fn constructive_embed<T: Real>(space: &FiniteMetricSpace<T>, alpha: T) -> Result<Vec<GaussianMixture1D<T>>> {
    check_alpha(alpha)?;
    if space.len() < 2 {
        return Err(Error::InvalidParameter("constructive embedding needs at least two points".into()));
    }
    let snow = space.snowflake(alpha)?;
    let features = snow.to_rows();
    let bias = initialize_bias(&features)?;
    features.iter().map(|f| ball_to_empirical(f, &bias)).collect()
}

/// A transformer that outputs `(1/K) Σ_k N(μ_k(x), 0)` exactly on every
/// point of `space`, with `targets[x][k]` the `d`-vector `μ_k(x)`.
///
/// All points are landmarks, so feature `i` of point `x` is `d(x, x_i)`.
/// Each head has one hidden unit per point, `ReLU(1 - d(x, x_i) / r)` with
/// `r` half the minimum separation: 1 at `x_i`, 0 at every other point.
/// The output layer places the target means; factor rows are zero.
pub fn memorize_pt<T: Real>(space: &FiniteMetricSpace<T>, targets: &[Vec<Vec<T>>]) -> Result<PTParams<T>> {
    let n = space.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty space".into()));
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
    }
    let k = targets[0].len();
    if k == 0 {
        return Err(Error::InvalidParameter("targets need at least one component".into()));
    }
    let d = targets[0][0].len();
    if d == 0 {
        return Err(Error::InvalidParameter("target means must be nonempty".into()));
    }
    for t in targets {
        if t.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: t.len() });
        }
        if let Some(m) = t.iter().find(|m| m.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: m.len() });
        }
    }
    let mut min_sep = T::infinity();
    for (i, j) in space.pairs() {
        let dij = space.d(i, j);
        if dij <= T::zero() {
            return Err(Error::ZeroDistance { i, j });
        }
        min_sep = min_sep.min(dij);
    }
    let radius = if n > 1 { min_sep * T::lit(0.5) } else { T::one() };

    let bump = Layer::new(Mat::from_fn(n, n, |r, c| if r == c { -T::one() / radius } else { T::zero() }), vec![T::one(); n])?;
    let out_dim = d + d * d;
    let heads = (0..k)
        .map(|comp| {
            let readout = Layer::new(
                Mat::from_fn(out_dim, n, |r, point| if r < d { targets[point][comp][r] } else { T::zero() }),
                vec![T::zero(); out_dim],
            )?;
            MLPParams::new(vec![bump.clone(), readout])
        })
        .collect::<Result<_>>()?;
    PTParams::new(LandmarkSet::all(n)?, None, MLPParams::zeros(&[n, k])?, heads, d)
}
