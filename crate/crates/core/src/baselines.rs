//! Comparison geometries: Euclidean space, the upper half-space model of
//! hyperbolic space, and univariate Gaussians under the Fisher–Rao metric,
//! each reached through a linear readout of trunk features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{landmark_features, FiniteMetricSpace, LandmarkSet};
use crate::model::{Layer, MLPParams, MlpTrace};
use crate::scalar::{acosh1p, sigmoid, softplus, Real};

/// Floor added after softplus on positive coordinates.
pub const POSITIVE_FLOOR: f64 = 1e-6;

/// Point of `ℍ^d = {x ∈ ℝ^{d+1} : x_{d+1} > 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HyperbolicPoint<T> {
    coords: Vec<T>,
}

impl<T: Real> HyperbolicPoint<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        match coords.last() {
            None => Err(Error::InvalidParameter("hyperbolic point needs coordinates".into())),
            Some(&h) if !(h > T::zero()) || !h.is_finite() => {
                Err(Error::InvalidParameter(format!("last hyperbolic coordinate must be positive, got {h}")))
            }
            Some(_) if coords.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidParameter("non-finite hyperbolic coordinate".into()))
            }
            Some(_) => Ok(Self { coords }),
        }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }
}

/// Non-degenerate univariate Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FisherRaoPoint<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> FisherRaoPoint<T> {
    pub fn new(mean: T, std: T) -> Result<Self> {
        if !(std > T::zero()) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!("Fisher-Rao point needs std > 0, got N({mean}, {std})")));
        }
        Ok(Self { mean, std })
    }
}

/// `‖x − y‖² / (2 x_n y_n)`, the argument of `arccosh(1 + ·)`.
fn half_space_eps<T: Real>(x: &[T], y: &[T]) -> T {
    let sq: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
    sq / (T::lit(2.0) * x[x.len() - 1] * y[y.len() - 1])
}

/// `arccosh(1 + ‖x − y‖² / (2 x_n y_n))`.
pub fn hyperbolic_distance<T: Real>(x: &HyperbolicPoint<T>, y: &HyperbolicPoint<T>) -> Result<T> {
    if x.coords.len() != y.coords.len() {
        return Err(Error::DimensionMismatch { expected: x.coords.len(), got: y.coords.len() });
    }
    Ok(acosh1p(half_space_eps(&x.coords, &y.coords)))
}

/// `√2 ln((A + B) / (A − B))` with `A = ‖u − v̄‖`, `B = ‖u − v‖`,
/// `u = (μ₁/√2, σ₁)`, `v = (μ₂/√2, σ₂)`, `v̄ = (μ₂/√2, −σ₂)`; evaluated as
/// `√2 ln_1p(B (A + B) / (2 σ₁ σ₂))` since `A² − B² = 4 σ₁ σ₂`.
pub fn fisher_rao_distance<T: Real>(a: &FisherRaoPoint<T>, b: &FisherRaoPoint<T>) -> Result<T> {
    FisherRaoPoint::new(a.mean, a.std)?;
    FisherRaoPoint::new(b.mean, b.std)?;
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let dm = (a.mean - b.mean) / r2;
    let big = (dm * dm + (a.std + b.std) * (a.std + b.std)).sqrt();
    let small = (dm * dm + (a.std - b.std) * (a.std - b.std)).sqrt();
    Ok(r2 * (small * (big + small) / (T::lit(2.0) * a.std * b.std)).ln_1p())
}

/// Target geometry of a readout head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    Euclidean,
    Hyperbolic,
    FisherRao,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadPoint<T> {
    Euclidean(Vec<T>),
    Hyperbolic(HyperbolicPoint<T>),
    FisherRao(FisherRaoPoint<T>),
}

impl<T: Real> HeadPoint<T> {
    pub fn distance(&self, other: &Self) -> Result<T> {
        match (self, other) {
            (HeadPoint::Euclidean(a), HeadPoint::Euclidean(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
                }
                Ok(a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt())
            }
            (HeadPoint::Hyperbolic(a), HeadPoint::Hyperbolic(b)) => hyperbolic_distance(a, b),
            (HeadPoint::FisherRao(a), HeadPoint::FisherRao(b)) => fisher_rao_distance(a, b),
            _ => Err(Error::InvalidParameter("distance between points of different geometries".into())),
        }
    }
}

/// Maps a raw readout vector into the target geometry.
pub fn point_from_raw<T: Real>(kind: ReadoutKind, raw: &[T]) -> Result<HeadPoint<T>> {
    let floor = T::lit(POSITIVE_FLOOR);
    match kind {
        ReadoutKind::Euclidean => Ok(HeadPoint::Euclidean(raw.to_vec())),
        ReadoutKind::Hyperbolic => {
            let Some((&last, rest)) = raw.split_last() else {
                return Err(Error::InvalidParameter("hyperbolic readout needs at least one output".into()));
            };
            let mut coords = rest.to_vec();
            coords.push(softplus(last) + floor);
            Ok(HeadPoint::Hyperbolic(HyperbolicPoint::new(coords)?))
        }
        ReadoutKind::FisherRao => {
            if raw.len() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: raw.len() });
            }
            Ok(HeadPoint::FisherRao(FisherRaoPoint::new(raw[0], softplus(raw[1]) + floor)?))
        }
    }
}

/// Applies the final linear readout to trunk features and maps the result
/// into the target geometry.
pub fn head_forward<T: Real>(kind: ReadoutKind, trunk_output: &[T], readout: &Layer<T>) -> Result<HeadPoint<T>> {
    if trunk_output.len() != readout.input_dim() {
        return Err(Error::DimensionMismatch { expected: readout.input_dim(), got: trunk_output.len() });
    }
    point_from_raw(kind, &readout.apply(trunk_output))
}

/// Squared distance between the points of two raw readout vectors and its
/// gradient with respect to each raw vector.
pub fn squared_distance_grad<T: Real>(kind: ReadoutKind, a: &[T], b: &[T]) -> Result<(T, Vec<T>, Vec<T>)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let two = T::lit(2.0);
    match kind {
        ReadoutKind::Euclidean => {
            let diff: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
            let sq = diff.iter().map(|&v| v * v).sum();
            let ga: Vec<T> = diff.iter().map(|&v| two * v).collect();
            let gb = ga.iter().map(|&v| -v).collect();
            Ok((sq, ga, gb))
        }
        ReadoutKind::Hyperbolic => {
            let n = a.len();
            if n == 0 {
                return Err(Error::InvalidParameter("hyperbolic readout needs at least one output".into()));
            }
            let mut x = a.to_vec();
            let mut y = b.to_vec();
            x[n - 1] = softplus(a[n - 1]) + T::lit(POSITIVE_FLOOR);
            y[n - 1] = softplus(b[n - 1]) + T::lit(POSITIVE_FLOOR);
            let (sq, mut gx, mut gy) = half_space_sq_grad(&x, &y);
            gx[n - 1] *= sigmoid(a[n - 1]);
            gy[n - 1] *= sigmoid(b[n - 1]);
            Ok((sq, gx, gy))
        }
        ReadoutKind::FisherRao => {
            if a.len() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: a.len() });
            }
            // d_F² = 2 d_ℍ² at (μ/√2, σ)
            let r2 = T::lit(std::f64::consts::SQRT_2);
            let floor = T::lit(POSITIVE_FLOOR);
            let x = [a[0] / r2, softplus(a[1]) + floor];
            let y = [b[0] / r2, softplus(b[1]) + floor];
            let (sq, gx, gy) = half_space_sq_grad(&x, &y);
            let ga = vec![two * gx[0] / r2, two * gx[1] * sigmoid(a[1])];
            let gb = vec![two * gy[0] / r2, two * gy[1] * sigmoid(b[1])];
            Ok((two * sq, ga, gb))
        }
    }
}

/// `d_ℍ(x, y)²` and its gradient in the half-space coordinates.
fn half_space_sq_grad<T: Real>(x: &[T], y: &[T]) -> (T, Vec<T>, Vec<T>) {
    let n = x.len();
    let (xn, yn) = (x[n - 1], y[n - 1]);
    let eps = half_space_eps(x, y);
    let dist = acosh1p(eps);
    // d(d²)/dε = 2d / √(ε(2+ε)) → 2 as ε → 0
    let root = (eps * (T::lit(2.0) + eps)).sqrt();
    let outer = if root > T::lit(1e-150) { T::lit(2.0) * dist / root } else { T::lit(2.0) };
    let denom = xn * yn;
    let mut gx: Vec<T> = x.iter().zip(y).map(|(&a, &b)| outer * (a - b) / denom).collect();
    let mut gy: Vec<T> = gx.iter().map(|&v| -v).collect();
    gx[n - 1] -= outer * eps / xn;
    gy[n - 1] -= outer * eps / yn;
    (dist * dist, gx, gy)
}

/// Landmark features → optional ReLU trunk → linear readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ReadoutModel<T> {
    pub kind: ReadoutKind,
    pub landmarks: LandmarkSet,
    pub trunk: Option<MLPParams<T>>,
    pub readout: Layer<T>,
}

/// Cached forward values of a [`ReadoutModel`].
#[derive(Clone, Debug)]
pub struct ReadoutTrace<T> {
    pub trunk: Option<MlpTrace<T>>,
    pub hidden: Vec<T>,
    pub raw: Vec<T>,
}

impl<T: Real> ReadoutTrace<T> {
    pub fn signature(&self) -> Vec<bool> {
        match &self.trunk {
            Some(t) => {
                let mut s = t.activation_pattern();
                s.extend(t.output().iter().map(|&v| v > T::zero()));
                s
            }
            None => Vec::new(),
        }
    }
}

impl<T: Real> ReadoutModel<T> {
    /// Raw readout width for a target dimension: `d` (Euclidean), `d + 1`
    /// (hyperbolic, `ℍ^d`) or 2 (Fisher–Rao, `dim` ignored).
    pub fn raw_dim(kind: ReadoutKind, dim: usize) -> usize {
        match kind {
            ReadoutKind::Euclidean => dim,
            ReadoutKind::Hyperbolic => dim + 1,
            ReadoutKind::FisherRao => 2,
        }
    }

    pub fn init<R: Rng>(kind: ReadoutKind, landmarks: LandmarkSet, trunk: &[usize], dim: usize, rng: &mut R) -> Result<Self> {
        let l = landmarks.len();
        let trunk_net = if trunk.is_empty() { None } else { Some(MLPParams::glorot(&[&[l][..], trunk].concat(), rng)?) };
        let feat = trunk.last().copied().unwrap_or(l);
        let out = Self::raw_dim(kind, dim);
        if out == 0 {
            return Err(Error::InvalidParameter("readout dimension must be positive".into()));
        }
        Ok(Self { kind, landmarks, trunk: trunk_net, readout: Layer::glorot(feat, out, rng) })
    }

    pub fn forward_features(&self, u: &[T]) -> Result<ReadoutTrace<T>> {
        let (trunk, hidden) = match &self.trunk {
            Some(t) => {
                let tr = t.forward_trace(u)?;
                let h = tr.output().iter().map(|&v| v.max(T::zero())).collect();
                (Some(tr), h)
            }
            None => (None, u.to_vec()),
        };
        if hidden.len() != self.readout.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.readout.input_dim(), got: hidden.len() });
        }
        let raw = self.readout.apply(&hidden);
        Ok(ReadoutTrace { trunk, hidden, raw })
    }

    pub fn forward_point(&self, space: &FiniteMetricSpace<T>, point: usize) -> Result<ReadoutTrace<T>> {
        self.forward_features(&landmark_features(space, &self.landmarks, point)?)
    }

    pub fn point(&self, space: &FiniteMetricSpace<T>, point: usize) -> Result<HeadPoint<T>> {
        point_from_raw(self.kind, &self.forward_point(space, point)?.raw)
    }

    pub fn zero_grads(&self) -> Self {
        Self {
            kind: self.kind,
            landmarks: self.landmarks.clone(),
            trunk: self.trunk.as_ref().map(MLPParams::zeros_like),
            readout: Layer::zeros(self.readout.input_dim(), self.readout.output_dim()),
        }
    }

    /// Accumulates gradients for an upstream gradient on the raw readout.
    pub fn backward_into(&self, trace: &ReadoutTrace<T>, grad_raw: &[T], grads: &mut Self) -> Result<()> {
        if grad_raw.len() != self.readout.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.readout.output_dim(), got: grad_raw.len() });
        }
        let cols = self.readout.input_dim();
        for (r, &g) in grad_raw.iter().enumerate() {
            grads.readout.bias[r] += g;
            for (c, &h) in trace.hidden.iter().enumerate() {
                grads.readout.weight.data[r * cols + c] += g * h;
            }
        }
        if let (Some(trunk), Some(tr), Some(tg)) = (&self.trunk, &trace.trunk, grads.trunk.as_mut()) {
            let mut gh = self.readout.weight.matvec_t(grad_raw);
            for (g, &z) in gh.iter_mut().zip(tr.output()) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            trunk.backward(tr, &gh, tg);
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let readout = self.readout.weight.data.iter().chain(&self.readout.bias).filter(|&&v| v != T::zero()).count();
        self.trunk.as_ref().map_or(0, MLPParams::param_count) + readout
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.trunk.as_ref().map(MLPParams::tensors).unwrap_or_default();
        out.push(&self.readout.weight.data);
        out.push(&self.readout.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.trunk.as_mut().map(MLPParams::tensors_mut).unwrap_or_default();
        out.push(&mut self.readout.weight.data);
        out.push(&mut self.readout.bias);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hp(c: Vec<f64>) -> HyperbolicPoint<f64> {
        HyperbolicPoint::new(c).unwrap()
    }

    #[test]
    fn hyperbolic_examples() {
        let a = hp(vec![0.0, 1.0]);
        assert_eq!(hyperbolic_distance(&a, &a).unwrap(), 0.0);
        let b = hp(vec![0.0, std::f64::consts::E]);
        assert!((hyperbolic_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(HyperbolicPoint::new(vec![1.0, 0.0]).is_err());
        assert!(HyperbolicPoint::new(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn hyperbolic_symmetry_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pt = |rng: &mut ChaCha8Rng| hp(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.01..4.0)]);
        for _ in 0..1000 {
            let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            let ab: f64 = hyperbolic_distance(&a, &b).unwrap();
            assert!((ab - hyperbolic_distance(&b, &a).unwrap()).abs() <= 1e-12);
            let ac = hyperbolic_distance(&a, &c).unwrap();
            let bc = hyperbolic_distance(&b, &c).unwrap();
            assert!(ac <= ab + bc + 1e-8);
        }
    }

    #[test]
    fn fisher_rao_examples() {
        let a = FisherRaoPoint::new(0.3, 1.2).unwrap();
        assert_eq!(fisher_rao_distance(&a, &a).unwrap(), 0.0);
        let b = FisherRaoPoint::new(0.3, 1.2 * std::f64::consts::E).unwrap();
        assert!((fisher_rao_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(FisherRaoPoint::new(0.0, 0.0).is_err());
    }

    #[test]
    fn fisher_rao_is_scaled_hyperbolic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r2 = 2f64.sqrt();
        for _ in 0..200 {
            let a = FisherRaoPoint::new(rng.random_range(-5.0..5.0), rng.random_range(0.05..3.0)).unwrap();
            let b = FisherRaoPoint::new(rng.random_range(-5.0..5.0), rng.random_range(0.05..3.0)).unwrap();
            let h = hyperbolic_distance(&hp(vec![a.mean / r2, a.std]), &hp(vec![b.mean / r2, b.std])).unwrap();
            assert!((fisher_rao_distance(&a, &b).unwrap() - r2 * h).abs() <= 1e-9);
        }
    }

    #[test]
    fn fisher_rao_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pt = |rng: &mut ChaCha8Rng| FisherRaoPoint::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0)).unwrap();
        for _ in 0..1000 {
            let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            let ab: f64 = fisher_rao_distance(&a, &b).unwrap();
            assert!((ab - fisher_rao_distance(&b, &a).unwrap()).abs() <= 1e-12);
            assert!(fisher_rao_distance(&a, &c).unwrap() <= ab + fisher_rao_distance(&b, &c).unwrap() + 1e-8);
        }
    }

    #[test]
    fn zero_readouts() {
        let layer = Layer::<f64>::zeros(3, 2);
        assert_eq!(head_forward(ReadoutKind::Euclidean, &[1.0, 2.0, 3.0], &layer).unwrap(), HeadPoint::Euclidean(vec![0.0, 0.0]));
        match head_forward(ReadoutKind::Hyperbolic, &[1.0, 2.0, 3.0], &layer).unwrap() {
            HeadPoint::Hyperbolic(p) => assert!((p.coords()[1] - (std::f64::consts::LN_2 + 1e-6)).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(head_forward(ReadoutKind::Euclidean, &[1.0], &layer).is_err());
    }

    #[test]
    fn heads_always_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(-800.0..800.0)).collect();
            point_from_raw(ReadoutKind::Hyperbolic, &raw).unwrap();
            point_from_raw(ReadoutKind::FisherRao, &raw[..2]).unwrap();
        }
    }

    #[test]
    fn squared_distance_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for kind in [ReadoutKind::Euclidean, ReadoutKind::Hyperbolic, ReadoutKind::FisherRao] {
            for _ in 0..100 {
                let dim = if kind == ReadoutKind::FisherRao { 2 } else { 3 };
                let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (sq, ga, gb) = squared_distance_grad(kind, &a, &b).unwrap();
                let d = point_from_raw(kind, &a).unwrap().distance(&point_from_raw(kind, &b).unwrap()).unwrap();
                assert!((sq - d * d).abs() < 1e-12 * sq.max(1.0));
                for i in 0..dim {
                    let f = |v: &[f64]| squared_distance_grad(kind, v, &b).unwrap().0;
                    let mut p = a.clone();
                    p[i] += h;
                    let mut m = a.clone();
                    m[i] -= h;
                    let fd = (f(&p) - f(&m)) / (2.0 * h);
                    assert!((fd - ga[i]).abs() < 1e-6 * fd.abs().max(1.0), "{kind:?} a[{i}]: {fd} vs {}", ga[i]);
                    let g = |v: &[f64]| squared_distance_grad(kind, &a, v).unwrap().0;
                    let mut p = b.clone();
                    p[i] += h;
                    let mut m = b.clone();
                    m[i] -= h;
                    let fd = (g(&p) - g(&m)) / (2.0 * h);
                    assert!((fd - gb[i]).abs() < 1e-6 * fd.abs().max(1.0), "{kind:?} b[{i}]");
                }
            }
        }
        // coincident points: the limit d(d²)/dε = 2
        let (sq, ga, _) = squared_distance_grad(ReadoutKind::Hyperbolic, &[0.5, 0.1], &[0.5, 0.1]).unwrap();
        assert_eq!(sq, 0.0);
        assert!(ga.iter().all(|g: &f64| g.abs() < 1e-15));
    }
}
