//! Probabilistic transformer: landmark features → (optional shared trunk) →
//! a weight network and K component heads, combined by probabilistic
//! attention into a Gaussian mixture.
//!
//! ```text
//! u = (d(x, l_1), …, d(x, l_L))
//! h = ReLU(trunk(u))                      (h = u without a trunk)
//! w = softmax(nn_w(h))
//! (μ_k, Σ_k) = head_k(h),   component k = N(μ_k, Σ_kᵀ Σ_k)
//! ```
//!
//! With `D = 1` the factor is a scalar `s` and the component std is `|s|`.

pub mod mlp;
pub mod report;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{landmark_features, FiniteMetricSpace, LandmarkSet};
use crate::scalar::Real;
use crate::transport::{Component1D, ComponentD, GaussianMixture1D, GaussianMixtureD};

pub use mlp::{Layer, MLPParams, MlpTrace};
pub use report::{complexity_report, dimensional_constant, ComplexityReport, SpaceStats, TheoremExtras};

#[derive(Clone, Debug, PartialEq)]
pub struct PTParams<T> {
    pub landmarks: LandmarkSet,
    pub trunk: Option<MLPParams<T>>,
    pub nn_w: MLPParams<T>,
    pub heads: Vec<MLPParams<T>>,
    output_dim: usize,
}

/// Hidden layer sizes of the three sub-networks.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Architecture {
    /// Trunk layer sizes after the input; empty means no trunk. The last
    /// entry is the trunk's feature width.
    pub trunk: Vec<usize>,
    pub weight_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl<T: Real> PTParams<T> {
    pub fn new(
        landmarks: LandmarkSet,
        trunk: Option<MLPParams<T>>,
        nn_w: MLPParams<T>,
        heads: Vec<MLPParams<T>>,
        output_dim: usize,
    ) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::InvalidParameter("a transformer needs at least one head".into()));
        }
        if output_dim == 0 {
            return Err(Error::InvalidParameter("output dimension must be positive".into()));
        }
        let l = landmarks.len();
        let feat = match &trunk {
            Some(t) => {
                if t.input_dim() != l {
                    return Err(Error::DimensionMismatch { expected: l, got: t.input_dim() });
                }
                t.output_dim()
            }
            None => l,
        };
        if nn_w.input_dim() != feat {
            return Err(Error::DimensionMismatch { expected: feat, got: nn_w.input_dim() });
        }
        if nn_w.output_dim() != heads.len() {
            return Err(Error::DimensionMismatch { expected: heads.len(), got: nn_w.output_dim() });
        }
        let head_out = output_dim + output_dim * output_dim;
        for h in &heads {
            if h.input_dim() != feat {
                return Err(Error::DimensionMismatch { expected: feat, got: h.input_dim() });
            }
            if h.output_dim() != head_out {
                return Err(Error::DimensionMismatch { expected: head_out, got: h.output_dim() });
            }
        }
        Ok(Self { landmarks, trunk, nn_w, heads, output_dim })
    }

    /// Glorot-initialized model.
    pub fn init<R: Rng>(
        landmarks: LandmarkSet,
        mixture_count: usize,
        output_dim: usize,
        arch: &Architecture,
        rng: &mut R,
    ) -> Result<Self> {
        if mixture_count == 0 {
            return Err(Error::InvalidParameter("mixture count must be positive".into()));
        }
        let l = landmarks.len();
        let trunk = if arch.trunk.is_empty() {
            None
        } else {
            Some(MLPParams::glorot(&[&[l][..], &arch.trunk].concat(), rng)?)
        };
        let feat = arch.trunk.last().copied().unwrap_or(l);
        let nn_w = MLPParams::glorot(&[&[feat][..], &arch.weight_hidden, &[mixture_count]].concat(), rng)?;
        let head_dims = [&[feat][..], &arch.head_hidden, &[output_dim + output_dim * output_dim]].concat();
        let heads = (0..mixture_count).map(|_| MLPParams::glorot(&head_dims, rng)).collect::<Result<_>>()?;
        Self::new(landmarks, trunk, nn_w, heads, output_dim)
    }

    pub fn mixture_count(&self) -> usize {
        self.heads.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.landmarks.len()
    }

    /// `K (D + D²)`.
    pub fn effdim(&self) -> usize {
        self.mixture_count() * (self.output_dim + self.output_dim * self.output_dim)
    }

    /// Nonzero entries over the trunk (counted once), nn_w and every head.
    pub fn param_count(&self) -> usize {
        self.trunk.as_ref().map_or(0, MLPParams::param_count)
            + self.nn_w.param_count()
            + self.heads.iter().map(MLPParams::param_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        let branch = self.heads.iter().map(MLPParams::depth).fold(self.nn_w.depth(), usize::max);
        self.trunk.as_ref().map_or(0, MLPParams::depth) + branch
    }

    pub fn width(&self) -> usize {
        let mut w = self.heads.iter().map(MLPParams::width).fold(self.nn_w.width(), usize::max);
        if let Some(t) = &self.trunk {
            w = w.max(t.width());
        }
        w
    }

    pub fn zero_grads(&self) -> PtGrads<T> {
        PtGrads {
            trunk: self.trunk.as_ref().map(MLPParams::zeros_like),
            nn_w: self.nn_w.zeros_like(),
            heads: self.heads.iter().map(MLPParams::zeros_like).collect(),
        }
    }

    /// Parameter tensors in a fixed order shared with [`PtGrads::tensors`].
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.trunk.as_ref().map(MLPParams::tensors).unwrap_or_default();
        out.extend(self.nn_w.tensors());
        out.extend(self.heads.iter().flat_map(MLPParams::tensors));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.trunk.as_mut().map(MLPParams::tensors_mut).unwrap_or_default();
        out.extend(self.nn_w.tensors_mut());
        out.extend(self.heads.iter_mut().flat_map(MLPParams::tensors_mut));
        out
    }

    pub fn features(&self, space: &FiniteMetricSpace<T>, point: usize) -> Result<Vec<T>> {
        landmark_features(space, &self.landmarks, point)
    }

    pub fn forward_features(&self, u: &[T]) -> Result<PtTrace<T>> {
        let (trunk, hidden) = match &self.trunk {
            Some(t) => {
                let tr = t.forward_trace(u)?;
                let h = tr.output().iter().map(|&v| v.max(T::zero())).collect();
                (Some(tr), h)
            }
            None => {
                if u.len() != self.input_dim() {
                    return Err(Error::DimensionMismatch { expected: self.input_dim(), got: u.len() });
                }
                (None, u.to_vec())
            }
        };
        let nn_w = self.nn_w.forward_trace(&hidden)?;
        let heads: Vec<MlpTrace<T>> = self.heads.iter().map(|h| h.forward_trace(&hidden)).collect::<Result<_>>()?;
        let weights = softmax(nn_w.output());
        let d = self.output_dim;
        let means = heads.iter().map(|t| t.output()[..d].to_vec()).collect();
        let factors = heads.iter().map(|t| t.output()[d..].to_vec()).collect();
        Ok(PtTrace { trunk, hidden, nn_w, heads, output: PtOutput { dim: d, weights, means, factors } })
    }

    pub fn forward_point(&self, space: &FiniteMetricSpace<T>, point: usize) -> Result<PtTrace<T>> {
        self.forward_features(&self.features(space, point)?)
    }

    /// Reverse-mode gradients of a scalar loss given its gradient with
    /// respect to the forward output.
    pub fn backward(&self, trace: &PtTrace<T>, upstream: &PtUpstream<T>) -> Result<PtGrads<T>> {
        let mut grads = self.zero_grads();
        self.backward_into(trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// As [`PTParams::backward`], accumulating into `grads`.
    pub fn backward_into(&self, trace: &PtTrace<T>, upstream: &PtUpstream<T>, grads: &mut PtGrads<T>) -> Result<()> {
        let k = self.mixture_count();
        let d = self.output_dim;
        if upstream.weights.len() != k || upstream.means.len() != k || upstream.spreads.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: upstream.weights.len() });
        }
        let spread_len = if d == 1 { 1 } else { d * d };
        for i in 0..k {
            if upstream.means[i].len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: upstream.means[i].len() });
            }
            if upstream.spreads[i].len() != spread_len {
                return Err(Error::DimensionMismatch { expected: spread_len, got: upstream.spreads[i].len() });
            }
        }
        let w = &trace.output.weights;
        let mean_g: T = w.iter().zip(&upstream.weights).map(|(&a, &b)| a * b).sum();
        let logit_grad: Vec<T> = w.iter().zip(&upstream.weights).map(|(&wi, &gi)| wi * (gi - mean_g)).collect();

        let mut hidden_grad = self.nn_w.backward(&trace.nn_w, &logit_grad, &mut grads.nn_w);
        for i in 0..k {
            let s = &trace.output.factors[i];
            let mut out_grad = upstream.means[i].clone();
            if d == 1 {
                out_grad.push(if s[0] > T::zero() {
                    upstream.spreads[i][0]
                } else if s[0] < T::zero() {
                    -upstream.spreads[i][0]
                } else {
                    T::zero()
                });
            } else {
                // cov = SᵀS  ⇒  ∂L/∂S = S (G + Gᵀ)
                let g = &upstream.spreads[i];
                for r in 0..d {
                    for c in 0..d {
                        let v: T = (0..d).map(|m| s[r * d + m] * (g[m * d + c] + g[c * d + m])).sum();
                        out_grad.push(v);
                    }
                }
            }
            let gh = self.heads[i].backward(&trace.heads[i], &out_grad, &mut grads.heads[i]);
            for (a, b) in hidden_grad.iter_mut().zip(gh) {
                *a += b;
            }
        }
        if let (Some(trunk), Some(tr), Some(tg)) = (&self.trunk, &trace.trunk, grads.trunk.as_mut()) {
            for (g, &z) in hidden_grad.iter_mut().zip(tr.output()) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            trunk.backward(tr, &hidden_grad, tg);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            mixture_count: self.mixture_count(),
            output_dim: self.output_dim,
            landmark_count: self.landmarks.len(),
            landmarks: self.landmarks.indices().to_vec(),
            trunk: self.trunk.clone(),
            weight_net: self.nn_w.clone(),
            heads: self.heads.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint<T>, n_points: usize) -> Result<Self> {
        if c.landmarks.len() != c.landmark_count {
            return Err(Error::DimensionMismatch { expected: c.landmark_count, got: c.landmarks.len() });
        }
        if c.heads.len() != c.mixture_count {
            return Err(Error::DimensionMismatch { expected: c.mixture_count, got: c.heads.len() });
        }
        let landmarks = LandmarkSet::new(c.landmarks, n_points)?;
        Self::new(landmarks, c.trunk, c.weight_net, c.heads, c.output_dim)
    }
}

/// JSON checkpoint layout: `(K, D, L)`, landmark indices and every layer as
/// `{rows, cols, data}` row-major weights plus a bias array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Checkpoint<T> {
    #[serde(rename = "K")]
    pub mixture_count: usize,
    #[serde(rename = "D")]
    pub output_dim: usize,
    #[serde(rename = "L")]
    pub landmark_count: usize,
    pub landmarks: Vec<usize>,
    pub trunk: Option<MLPParams<T>>,
    pub weight_net: MLPParams<T>,
    pub heads: Vec<MLPParams<T>>,
}

/// Gradient container mirroring [`PTParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct PtGrads<T> {
    pub trunk: Option<MLPParams<T>>,
    pub nn_w: MLPParams<T>,
    pub heads: Vec<MLPParams<T>>,
}

impl<T: Real> PtGrads<T> {
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.trunk.as_ref().map(MLPParams::tensors).unwrap_or_default();
        out.extend(self.nn_w.tensors());
        out.extend(self.heads.iter().flat_map(MLPParams::tensors));
        out
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == T::zero()))
    }
}

/// Raw mixture parameters produced by the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PtOutput<T> {
    pub dim: usize,
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    /// Covariance factors, row-major `D × D` (a single scalar when `D = 1`).
    pub factors: Vec<Vec<T>>,
}

impl<T: Real> PtOutput<T> {
    pub fn to_mixture_1d(&self) -> Result<GaussianMixture1D<T>> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.dim });
        }
        GaussianMixture1D::from_components(
            (0..self.weights.len())
                .map(|k| Component1D { w: self.weights[k], mean: self.means[k][0], std: self.factors[k][0].abs() })
                .collect(),
        )
    }

    pub fn covariance(&self, k: usize) -> Vec<Vec<T>> {
        let d = self.dim;
        let s = &self.factors[k];
        (0..d).map(|r| (0..d).map(|c| (0..d).map(|m| s[m * d + r] * s[m * d + c]).sum()).collect()).collect()
    }

    pub fn to_mixture_d(&self) -> Result<GaussianMixtureD<T>> {
        GaussianMixtureD::new(
            (0..self.weights.len())
                .map(|k| ComponentD { w: self.weights[k], mean: self.means[k].clone(), cov: self.covariance(k) })
                .collect(),
        )
    }
}

/// Cached forward values.
#[derive(Clone, Debug)]
pub struct PtTrace<T> {
    pub trunk: Option<MlpTrace<T>>,
    /// Input to the weight network and heads.
    pub hidden: Vec<T>,
    pub nn_w: MlpTrace<T>,
    pub heads: Vec<MlpTrace<T>>,
    pub output: PtOutput<T>,
}

impl<T: Real> PtTrace<T> {
    /// ReLU activation pattern of every sub-network plus the factor signs
    /// (for `D = 1`); a change means a kink was crossed.
    pub fn signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        if let Some(t) = &self.trunk {
            sig.extend(t.activation_pattern());
            sig.extend(t.output().iter().map(|&v| v > T::zero()));
        }
        sig.extend(self.nn_w.activation_pattern());
        for h in &self.heads {
            sig.extend(h.activation_pattern());
        }
        if self.output.dim == 1 {
            sig.extend(self.output.factors.iter().map(|f| f[0] > T::zero()));
        }
        sig
    }
}

/// Loss gradient with respect to the forward output.
#[derive(Clone, Debug, PartialEq)]
pub struct PtUpstream<T> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    /// With respect to the std when `D = 1`, otherwise the covariance
    /// (row-major `D × D`).
    pub spreads: Vec<Vec<T>>,
}

impl<T: Real> PtUpstream<T> {
    pub fn zeros(k: usize, d: usize) -> Self {
        let spread = if d == 1 { 1 } else { d * d };
        Self { weights: vec![T::zero(); k], means: vec![vec![T::zero(); d]; k], spreads: vec![vec![T::zero(); spread]; k] }
    }
}

pub fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mixture output of the transformer at `point`.
pub fn pt_forward<T: Real>(p: &PTParams<T>, space: &FiniteMetricSpace<T>, point: usize) -> Result<GaussianMixtureD<T>> {
    p.forward_point(space, point)?.output.to_mixture_d()
}

/// Univariate mixture output; requires `D = 1`.
pub fn pt_forward_1d<T: Real>(
    p: &PTParams<T>,
    space: &FiniteMetricSpace<T>,
    point: usize,
) -> Result<GaussianMixture1D<T>> {
    p.forward_point(space, point)?.output.to_mixture_1d()
}

pub fn pt_backward<T: Real>(p: &PTParams<T>, trace: &PtTrace<T>, upstream: &PtUpstream<T>) -> Result<PtGrads<T>> {
    p.backward(trace, upstream)
}

pub fn param_count<T: Real>(p: &PTParams<T>) -> usize {
    p.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::mw2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, seed: u64) -> FiniteMetricSpace<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0))).collect();
        FiniteMetricSpace::from_fn(n, |i, j| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt())
            .unwrap()
    }

    fn arch(trunk: bool) -> Architecture {
        Architecture {
            trunk: if trunk { vec![6, 5] } else { vec![] },
            weight_hidden: vec![4],
            head_hidden: vec![3],
        }
    }

    #[test]
    fn zero_networks_give_uniform_point_masses() {
        let sp = space(5, 0);
        let lm = LandmarkSet::new(vec![0, 2], 5).unwrap();
        let p = PTParams::new(
            lm,
            None,
            MLPParams::zeros(&[2, 3]).unwrap(),
            (0..3).map(|_| MLPParams::zeros(&[2, 2]).unwrap()).collect(),
            1,
        )
        .unwrap();
        let m = pt_forward(&p, &sp, 4).unwrap();
        for c in m.components() {
            assert!((c.w - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(c.mean, vec![0.0]);
            assert_eq!(c.cov, vec![vec![0.0]]);
        }
        assert_eq!(p.param_count(), 0);
        assert_eq!(p.effdim(), 3 * 2);
    }

    #[test]
    fn single_head_has_unit_weight() {
        let sp = space(6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PTParams::init(LandmarkSet::all(6).unwrap(), 1, 2, &arch(true), &mut rng).unwrap();
        for x in 0..6 {
            let m = pt_forward(&p, &sp, x).unwrap();
            assert_eq!(m.components()[0].w, 1.0);
        }
    }

    #[test]
    fn outputs_are_valid_mixtures_and_effdim() {
        let sp = space(8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, d) in [(5, 1), (3, 2), (2, 3)] {
            let p = PTParams::init(LandmarkSet::new(vec![1, 3, 5], 8).unwrap(), k, d, &arch(d != 2), &mut rng).unwrap();
            assert_eq!(p.effdim(), k * (d + d * d));
            for x in 0..8 {
                let m = pt_forward(&p, &sp, x).unwrap();
                let s: f64 = m.weights().iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(m.weights().iter().all(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let sp = space(7, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = PTParams::init(LandmarkSet::all(7).unwrap(), 4, 1, &arch(true), &mut rng).unwrap();
        let mut shifted = p.clone();
        let depth = shifted.nn_w.depth();
        for b in &mut shifted.nn_w.layers_mut()[depth - 1].bias {
            *b += 3.7;
        }
        for x in 0..7 {
            let a = pt_forward_1d(&p, &sp, x).unwrap();
            let b = pt_forward_1d(&shifted, &sp, x).unwrap();
            // shifting the logits moves the weights at rounding level only;
            // MW₂ is a square root, so compare its square
            let sq = mw2(&a, &b).unwrap().1.value;
            assert!(sq <= 1e-12, "{sq}");
            for (ca, cb) in a.components().iter().zip(b.components()) {
                assert!((ca.w - cb.w).abs() <= 1e-15);
                assert_eq!((ca.mean, ca.std), (cb.mean, cb.std));
            }
        }
    }

    #[test]
    fn param_count_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = PTParams::<f64>::init(LandmarkSet::all(5).unwrap(), 3, 1, &arch(true), &mut rng).unwrap();
        let sum = p.trunk.as_ref().unwrap().param_count()
            + p.nn_w.param_count()
            + p.heads.iter().map(|h| h.param_count()).sum::<usize>();
        assert_eq!(p.param_count(), sum);
        assert_eq!(p.depth(), 2 + 2);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let sp = space(6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = PTParams::init(LandmarkSet::all(6).unwrap(), 3, 2, &arch(true), &mut rng).unwrap();
        let tr = p.forward_point(&sp, 2).unwrap();
        assert!(p.backward(&tr, &PtUpstream::zeros(3, 2)).unwrap().is_zero());
        assert!(p.backward(&tr, &PtUpstream::zeros(2, 2)).is_err());
    }

    /// Linear functional of the forward output, so its gradient is the
    /// upstream vector itself.
    fn probe(out: &PtOutput<f64>, up: &PtUpstream<f64>) -> f64 {
        let d = out.dim;
        let mut v = 0.0;
        for k in 0..out.weights.len() {
            v += out.weights[k] * up.weights[k];
            v += out.means[k].iter().zip(&up.means[k]).map(|(a, b)| a * b).sum::<f64>();
            if d == 1 {
                v += out.factors[k][0].abs() * up.spreads[k][0];
            } else {
                let cov: Vec<f64> = out.covariance(k).concat();
                v += cov.iter().zip(&up.spreads[k]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        v
    }

    fn random_upstream(rng: &mut ChaCha8Rng, k: usize, d: usize) -> PtUpstream<f64> {
        let mut up = PtUpstream::zeros(k, d);
        for v in up.weights.iter_mut().chain(up.means.iter_mut().flatten()).chain(up.spreads.iter_mut().flatten()) {
            *v = rng.random_range(-1.0..1.0);
        }
        up
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for trial in 0..50 {
            let n = 5 + trial % 4;
            let sp = space(n, 100 + trial as u64);
            let (k, d) = [(3, 1), (2, 2), (4, 1), (1, 3)][trial % 4];
            let p = PTParams::init(LandmarkSet::all(n).unwrap(), k, d, &arch(trial % 2 == 0), &mut rng).unwrap();
            let x = trial % n;
            let up = random_upstream(&mut rng, k, d);
            let tr = p.forward_point(&sp, x).unwrap();
            let sig = tr.signature();
            let grads = p.backward(&tr, &up).unwrap();
            let analytic: Vec<f64> = grads.tensors().concat();
            let mut idx = 0;
            let shapes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
            for (t, &len) in shapes.iter().enumerate() {
                for e in 0..len {
                    let eval = |delta: f64| {
                        let mut q = p.clone();
                        q.tensors_mut()[t][e] += delta;
                        q.forward_point(&sp, x).unwrap()
                    };
                    let (tp, tm) = (eval(h), eval(-h));
                    if tp.signature() == sig && tm.signature() == sig {
                        let fd = (probe(&tp.output, &up) - probe(&tm.output, &up)) / (2.0 * h);
                        let rel = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1.0);
                        worst = worst.max(rel);
                    }
                    idx += 1;
                }
            }
        }
        assert!(worst <= 1e-4, "max relative deviation {worst}");
    }

    #[test]
    fn linear_model_gradient_is_exact() {
        // single-layer heads and weight net, no trunk, D = 1 with positive
        // factors: the output is affine in the parameters except softmax
        let sp = space(5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut p = PTParams::init(LandmarkSet::all(5).unwrap(), 3, 1, &Architecture::default(), &mut rng).unwrap();
        for head in &mut p.heads {
            head.layers_mut()[0].bias[1] = 10.0;
        }
        let mut up = random_upstream(&mut rng, 3, 1);
        up.weights = vec![0.0; 3];
        let tr = p.forward_point(&sp, 1).unwrap();
        let analytic: Vec<f64> = p.backward(&tr, &up).unwrap().tensors().concat();
        let h = 1e-5;
        let mut idx = 0;
        let shapes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
        for (t, &len) in shapes.iter().enumerate() {
            for e in 0..len {
                let eval = |delta: f64| {
                    let mut q = p.clone();
                    q.tensors_mut()[t][e] += delta;
                    probe(&q.forward_point(&sp, 1).unwrap().output, &up)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!((fd - analytic[idx]).abs() <= 1e-9 * fd.abs().max(1.0), "{fd} vs {}", analytic[idx]);
                idx += 1;
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = PTParams::<f64>::init(LandmarkSet::new(vec![4, 0, 2], 6).unwrap(), 2, 1, &arch(true), &mut rng).unwrap();
        let js = serde_json::to_string(&p.to_checkpoint()).unwrap();
        assert!(js.starts_with(r#"{"K":2,"D":1,"L":3,"landmarks":[4,0,2]"#));
        let back = PTParams::from_checkpoint(serde_json::from_str(&js).unwrap(), 6).unwrap();
        assert_eq!(back, p);
        assert!(PTParams::from_checkpoint(serde_json::from_str::<Checkpoint<f64>>(&js).unwrap(), 3).is_err());
    }
}
