//! Pairwise distance-matching losses, Adam, gradient checks and the
//! experiment drivers.

pub mod experiments;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{squared_distance_grad, ReadoutKind, ReadoutModel, ReadoutTrace};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, LandmarkSet};
use crate::model::{Checkpoint, PTParams, PtTrace, PtUpstream};
use crate::scalar::Real;
use crate::transport::{mw2, mw2_d, mw2_gradients, mw2_gradients_d, GaussianMixture1D, GaussianMixtureD};

pub use experiments::{
    run_dimension_sweep, run_sphere_experiment, run_tree_experiment, ExperimentBundle, HeadSpec, PointError, RunResult, Scale,
    SphereSetup, SweepRow, TrainingPlan, TreeSetup,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `(D_emb² − d^{2α})²`
    Squared,
    /// `|d^α − D_emb|`
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    GmMixture,
    EuclideanD,
    HyperbolicD,
    FisherRao,
}

impl HeadKind {
    pub fn readout(self) -> Option<ReadoutKind> {
        match self {
            HeadKind::GmMixture => None,
            HeadKind::EuclideanD => Some(ReadoutKind::Euclidean),
            HeadKind::HyperbolicD => Some(ReadoutKind::Hyperbolic),
            HeadKind::FisherRao => Some(ReadoutKind::FisherRao),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub weight_decay: f64,
    pub alpha: f64,
    pub loss_form: LossForm,
    pub seed: u64,
    pub head_kind: HeadKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch_size: 32,
            lr_initial: 1e-4,
            lr_final: 1e-6,
            weight_decay: 1e-6,
            alpha: 1.0,
            loss_form: LossForm::Squared,
            seed: 0,
            head_kind: HeadKind::GmMixture,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final && self.lr_initial.is_finite()) {
            return bad(format!("need lr_initial >= lr_final > 0, got {} and {}", self.lr_initial, self.lr_final));
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        Ok(())
    }
}

/// Geometric interpolation from `lr_initial` at the first iteration to
/// `lr_final` at the last.
pub fn learning_rate(iteration: usize, iterations: usize, lr_initial: f64, lr_final: f64) -> f64 {
    if iterations <= 1 || iteration == 0 {
        return lr_initial;
    }
    if iteration + 1 >= iterations {
        return lr_final;
    }
    let t = iteration as f64 / (iterations - 1) as f64;
    lr_initial * (lr_final / lr_initial).powf(t)
}

/// A trainable embedding network: the mixture-valued transformer or a
/// readout baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<T> {
    Mixture(PTParams<T>),
    Readout(ReadoutModel<T>),
}

/// Serialized form of a [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum ModelFile<T> {
    Mixture(Checkpoint<T>),
    Readout(ReadoutModel<T>),
}

enum PointEval<T: Real> {
    Mixture1(PtTrace<T>, GaussianMixture1D<T>),
    MixtureD(PtTrace<T>, GaussianMixtureD<T>),
    Readout(ReadoutTrace<T>),
}

enum Upstream<T> {
    Mixture(PtUpstream<T>),
    Readout(Vec<T>),
}

impl<T: Real> Model<T> {
    pub fn head_kind(&self) -> HeadKind {
        match self {
            Model::Mixture(_) => HeadKind::GmMixture,
            Model::Readout(r) => match r.kind {
                ReadoutKind::Euclidean => HeadKind::EuclideanD,
                ReadoutKind::Hyperbolic => HeadKind::HyperbolicD,
                ReadoutKind::FisherRao => HeadKind::FisherRao,
            },
        }
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        match self {
            Model::Mixture(p) => &p.landmarks,
            Model::Readout(r) => &r.landmarks,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Mixture(p) => p.param_count(),
            Model::Readout(r) => r.param_count(),
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        match self {
            Model::Mixture(p) => p.tensors(),
            Model::Readout(r) => r.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Model::Mixture(p) => p.tensors_mut(),
            Model::Readout(r) => r.tensors_mut(),
        }
    }

    pub fn to_file(&self) -> ModelFile<T> {
        match self {
            Model::Mixture(p) => ModelFile::Mixture(p.to_checkpoint()),
            Model::Readout(r) => ModelFile::Readout(r.clone()),
        }
    }

    pub fn from_file(file: ModelFile<T>, n_points: usize) -> Result<Self> {
        match file {
            ModelFile::Mixture(c) => Ok(Model::Mixture(PTParams::from_checkpoint(c, n_points)?)),
            ModelFile::Readout(r) => {
                LandmarkSet::new(r.landmarks.indices().to_vec(), n_points)?;
                let feat = r.trunk.as_ref().map_or(r.landmarks.len(), |t| t.output_dim());
                if r.trunk.as_ref().is_some_and(|t| t.input_dim() != r.landmarks.len()) || r.readout.input_dim() != feat {
                    return Err(Error::DimensionMismatch { expected: feat, got: r.readout.input_dim() });
                }
                if r.readout.output_dim() == 0 || (r.kind == ReadoutKind::FisherRao && r.readout.output_dim() != 2) {
                    return Err(Error::InvalidParameter("readout width does not match its geometry".into()));
                }
                Ok(Model::Readout(r))
            }
        }
    }

    fn eval_point(&self, space: &FiniteMetricSpace<T>, point: usize) -> Result<PointEval<T>> {
        match self {
            Model::Mixture(p) => {
                let tr = p.forward_point(space, point)?;
                if p.output_dim() == 1 {
                    let m = tr.output.to_mixture_1d()?;
                    Ok(PointEval::Mixture1(tr, m))
                } else {
                    let m = tr.output.to_mixture_d()?;
                    Ok(PointEval::MixtureD(tr, m))
                }
            }
            Model::Readout(r) => Ok(PointEval::Readout(r.forward_point(space, point)?)),
        }
    }

    fn evals(&self, space: &FiniteMetricSpace<T>, pairs: &[(usize, usize)]) -> Result<BTreeMap<usize, PointEval<T>>> {
        let mut out = BTreeMap::new();
        for &(i, j) in pairs {
            if i == j {
                return Err(Error::InvalidParameter(format!("pair ({i}, {j}) repeats a point")));
            }
            for x in [i, j] {
                if let std::collections::btree_map::Entry::Vacant(e) = out.entry(x) {
                    e.insert(self.eval_point(space, x)?);
                }
            }
        }
        Ok(out)
    }

    /// Embedded distances `(i, j, D_emb)` for the given pairs.
    pub fn embedded_distances(
        &self,
        space: &FiniteMetricSpace<T>,
        pairs: &[(usize, usize)],
    ) -> Result<Vec<(usize, usize, T)>> {
        let evals = self.evals(space, pairs)?;
        pairs
            .iter()
            .map(|&(i, j)| {
                let sq = squared_distance(self, &evals[&i], &evals[&j])?;
                Ok((i, j, sq.max(T::zero()).sqrt()))
            })
            .collect()
    }
}

fn squared_distance<T: Real>(model: &Model<T>, a: &PointEval<T>, b: &PointEval<T>) -> Result<T> {
    match (a, b) {
        (PointEval::Mixture1(_, p), PointEval::Mixture1(_, q)) => Ok(mw2(p, q)?.1.value.max(T::zero())),
        (PointEval::MixtureD(_, p), PointEval::MixtureD(_, q)) => Ok(mw2_d(p, q)?.1.value.max(T::zero())),
        (PointEval::Readout(x), PointEval::Readout(y)) => {
            let Model::Readout(r) = model else { unreachable!() };
            Ok(squared_distance_grad(r.kind, &x.raw, &y.raw)?.0)
        }
        _ => unreachable!("points evaluated by one model"),
    }
}

/// Squared embedded distance, its gradients with respect to each point's
/// forward output, and the transport basis (empty for readouts).
fn squared_distance_with_grads<T: Real>(
    model: &Model<T>,
    a: &PointEval<T>,
    b: &PointEval<T>,
) -> Result<(T, Upstream<T>, Upstream<T>, Vec<(usize, usize)>)> {
    match (a, b) {
        (PointEval::Mixture1(_, p), PointEval::Mixture1(_, q)) => {
            let (_, plan) = mw2(p, q)?;
            let g = mw2_gradients(p, q, &plan)?;
            let up = |m: crate::transport::MixtureGradient<T>| {
                Upstream::Mixture(PtUpstream {
                    weights: m.weights,
                    means: m.means.into_iter().map(|v| vec![v]).collect(),
                    spreads: m.stds.into_iter().map(|v| vec![v]).collect(),
                })
            };
            Ok((plan.value.max(T::zero()), up(g.p), up(g.q), plan.basis))
        }
        (PointEval::MixtureD(_, p), PointEval::MixtureD(_, q)) => {
            let (_, plan) = mw2_d(p, q)?;
            let g = mw2_gradients_d(p, q, &plan)?;
            let up = |m: crate::transport::MixtureGradientD<T>| {
                Upstream::Mixture(PtUpstream {
                    weights: m.weights,
                    means: m.means,
                    spreads: m.covs.into_iter().map(|c| c.data).collect(),
                })
            };
            Ok((plan.value.max(T::zero()), up(g.p), up(g.q), plan.basis))
        }
        (PointEval::Readout(x), PointEval::Readout(y)) => {
            let Model::Readout(r) = model else { unreachable!() };
            let (sq, ga, gb) = squared_distance_grad(r.kind, &x.raw, &y.raw)?;
            Ok((sq, Upstream::Readout(ga), Upstream::Readout(gb), Vec::new()))
        }
        _ => unreachable!("points evaluated by one model"),
    }
}

fn add_scaled<T: Real>(acc: &mut Option<Upstream<T>>, g: Upstream<T>, c: T) {
    let scale = |v: &mut Vec<T>| v.iter_mut().for_each(|x| *x *= c);
    let add = |a: &mut [T], b: &[T]| a.iter_mut().zip(b).for_each(|(x, &y)| *x += c * y);
    match (acc.as_mut(), g) {
        (None, Upstream::Mixture(mut u)) => {
            scale(&mut u.weights);
            u.means.iter_mut().chain(u.spreads.iter_mut()).for_each(scale);
            *acc = Some(Upstream::Mixture(u));
        }
        (None, Upstream::Readout(mut v)) => {
            scale(&mut v);
            *acc = Some(Upstream::Readout(v));
        }
        (Some(Upstream::Mixture(a)), Upstream::Mixture(u)) => {
            add(&mut a.weights, &u.weights);
            for (x, y) in a.means.iter_mut().zip(&u.means).chain(a.spreads.iter_mut().zip(&u.spreads)) {
                add(x, y);
            }
        }
        (Some(Upstream::Readout(a)), Upstream::Readout(v)) => add(a, &v),
        _ => unreachable!("points evaluated by one model"),
    }
}

/// Loss value, parameter gradients (in [`Model::tensors`] order) and a
/// signature of every piecewise choice made on the way (ReLU patterns,
/// factor signs, transport bases, absolute-value signs).
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval<T> {
    pub loss: T,
    pub grads: Vec<Vec<T>>,
    pub signature: Vec<usize>,
}

/// Distance-matching loss over `pairs` and its gradient.
pub fn loss_eval<T: Real>(
    model: &Model<T>,
    space: &FiniteMetricSpace<T>,
    pairs: &[(usize, usize)],
    config: &TrainConfig,
) -> Result<LossEval<T>> {
    config.validate()?;
    if model.head_kind() != config.head_kind {
        return Err(Error::InvalidParameter(format!(
            "config head kind {:?} does not match the model's {:?}",
            config.head_kind,
            model.head_kind()
        )));
    }
    let alpha = T::lit(config.alpha);
    let evals = model.evals(space, pairs)?;
    let mut signature = Vec::new();
    for e in evals.values() {
        let sig = match e {
            PointEval::Mixture1(t, _) | PointEval::MixtureD(t, _) => t.signature(),
            PointEval::Readout(t) => t.signature(),
        };
        signature.extend(sig.into_iter().map(usize::from));
    }
    let mut loss = T::zero();
    let mut upstream: BTreeMap<usize, Option<Upstream<T>>> = BTreeMap::new();
    for &(i, j) in pairs {
        let (sq, gi, gj, basis) = squared_distance_with_grads(model, &evals[&i], &evals[&j])?;
        signature.extend(basis.iter().flat_map(|&(r, c)| [r, c]));
        let target = space.d(i, j).powf(alpha);
        // dL/d(D²)
        let c = match config.loss_form {
            LossForm::Squared => {
                let r = sq - target * target;
                loss += r * r;
                T::lit(2.0) * r
            }
            LossForm::Absolute => {
                let dist = sq.sqrt();
                loss += (dist - target).abs();
                signature.push(usize::from(dist > target));
                if dist > T::zero() {
                    (dist - target).signum() / (T::lit(2.0) * dist)
                } else {
                    T::zero()
                }
            }
        };
        add_scaled(upstream.entry(i).or_default(), gi, c);
        add_scaled(upstream.entry(j).or_default(), gj, c);
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss}")));
    }
    let grads = match model {
        Model::Mixture(p) => {
            let mut g = p.zero_grads();
            for (x, up) in upstream {
                let (Some(PointEval::Mixture1(tr, _) | PointEval::MixtureD(tr, _)), Some(Upstream::Mixture(u))) =
                    (evals.get(&x), up)
                else {
                    unreachable!()
                };
                p.backward_into(tr, &u, &mut g)?;
            }
            g.tensors().into_iter().map(<[T]>::to_vec).collect()
        }
        Model::Readout(r) => {
            let mut g = r.zero_grads();
            for (x, up) in upstream {
                let (Some(PointEval::Readout(tr)), Some(Upstream::Readout(u))) = (evals.get(&x), up) else {
                    unreachable!()
                };
                r.backward_into(tr, &u, &mut g)?;
            }
            g.tensors().into_iter().map(<[T]>::to_vec).collect()
        }
    };
    Ok(LossEval { loss, grads, signature })
}

/// First and second moment estimates of Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(shapes: &[usize]) -> Self {
        Self { m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(), v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(), step: 0 }
    }
}

/// One Adam step (β₁ = 0.9, β₂ = 0.999, ε = 1e-8) with weight decay added
/// to the gradient.
pub fn adam_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    lr: T,
    weight_decay: T,
) -> Result<()> {
    let shapes_match = params.len() == grads.len()
        && params.len() == state.m.len()
        && params.iter().zip(grads).zip(&state.m).all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(Error::DimensionMismatch {
            expected: params.iter().map(|p| p.len()).sum(),
            got: grads.iter().map(Vec::len).sum(),
        });
    }
    let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-8));
    state.step += 1;
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let (c1, c2) = (T::one() - b1.powi(t), T::one() - b2.powi(t));
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for e in 0..p.len() {
            let ge = g[e] + weight_decay * p[e];
            m[e] = b1 * m[e] + (T::one() - b1) * ge;
            v[e] = b2 * v[e] + (T::one() - b2) * ge * ge;
            p[e] -= lr * (m[e] / c1) / ((v[e] / c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport<T> {
    pub loss_history: Vec<T>,
    pub lr_history: Vec<f64>,
    pub final_params: Model<T>,
    pub wallclock_seconds: f64,
}

/// All unordered pairs of `points`.
pub fn all_pairs(points: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (a, &i) in points.iter().enumerate() {
        for &j in &points[a + 1..] {
            out.push((i, j));
        }
    }
    out
}

/// Minibatch Adam on the distance-matching loss; each iteration draws
/// `batch_size` distinct training points and uses all pairs among them.
pub fn train_run<T: Real>(
    model: &Model<T>,
    space: &FiniteMetricSpace<T>,
    train_indices: &[usize],
    config: &TrainConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    let start = Instant::now();
    let mut distinct = train_indices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != train_indices.len() || train_indices.len() < 2 {
        return Err(Error::InvalidParameter("training set needs at least two distinct points".into()));
    }
    if let Some(&bad) = train_indices.iter().find(|&&i| i >= space.len()) {
        return Err(Error::IndexOutOfRange { index: bad, len: space.len() });
    }
    let batch = config.batch_size.min(train_indices.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = model.clone();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut state = AdamState::new(&shapes);
    let mut loss_history = Vec::with_capacity(config.iterations);
    let mut lr_history = Vec::with_capacity(config.iterations);
    let wd = T::lit(config.weight_decay);
    for it in 0..config.iterations {
        let points: Vec<usize> = sample(&mut rng, train_indices.len(), batch).into_iter().map(|k| train_indices[k]).collect();
        let eval = loss_eval(&params, space, &all_pairs(&points), config)?;
        let lr = learning_rate(it, config.iterations, config.lr_initial, config.lr_final);
        adam_step(&mut params.tensors_mut(), &eval.grads, &mut state, T::lit(lr), wd)?;
        loss_history.push(eval.loss);
        lr_history.push(lr);
    }
    Ok(TrainReport { loss_history, lr_history, final_params: params, wallclock_seconds: start.elapsed().as_secs_f64() })
}

const FD_STEP: f64 = 1e-5;
const FD_COORDS: usize = 240;

/// Largest deviation `|fd − g| / max(|fd|, |g|, 1)` between the analytic
/// gradient of [`loss_eval`] and central differences, over `trials` random
/// three-point batches. Coordinates whose perturbation changes the loss
/// signature are skipped.
pub fn gradcheck<T: Real>(
    model: &Model<T>,
    space: &FiniteMetricSpace<T>,
    config: &TrainConfig,
    trials: usize,
) -> Result<f64> {
    if space.len() < 3 {
        return Err(Error::InvalidParameter("gradient check needs at least three points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = T::lit(FD_STEP);
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let coords: Vec<(usize, usize)> =
        shapes.iter().enumerate().flat_map(|(t, &n)| (0..n).map(move |e| (t, e))).collect();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let pts = sample(&mut rng, space.len(), 3).into_vec();
        let pairs = all_pairs(&pts);
        let base = loss_eval(model, space, &pairs, config)?;
        let chosen: Vec<usize> = if coords.len() <= FD_COORDS {
            (0..coords.len()).collect()
        } else {
            sample(&mut rng, coords.len(), FD_COORDS).into_vec()
        };
        for c in chosen {
            let (t, e) = coords[c];
            let shifted = |delta: T| -> Result<LossEval<T>> {
                let mut m = model.clone();
                m.tensors_mut()[t][e] += delta;
                loss_eval(&m, space, &pairs, config)
            };
            let evals = [shifted(h + h)?, shifted(h)?, shifted(-h)?, shifted(-h - h)?];
            if evals.iter().any(|e| e.signature != base.signature) {
                continue;
            }
            let [p2, p1, m1, m2] = evals.map(|e| e.loss.to_f64_lossy());
            let fd = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * FD_STEP);
            let g = base.grads[t][e].to_f64_lossy();
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1.0));
        }
    }
    Ok(worst)
}

/// One configuration of [`gradcheck_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub head_kind: HeadKind,
    pub trunk: bool,
    pub loss_form: LossForm,
    pub linear: bool,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub cases: Vec<GradcheckCase>,
    pub max_rel_error: f64,
    pub linear_max_rel_error: f64,
}

fn random_plane_space(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Result<FiniteMetricSpace<f64>> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side))).collect();
    FiniteMetricSpace::from_fn(n, |i, j| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt())
}

/// Gradient checks over `configs` random models cycling through every head
/// kind, with and without a trunk, both loss forms. Every fifth config is a
/// linear model: a Euclidean readout or a single-component mixture with no
/// hidden layers, no trunk and a squared loss, so the loss is a polynomial
/// in the parameters.
pub fn gradcheck_suite(configs: usize, seed: u64) -> Result<GradcheckSummary> {
    use crate::model::Architecture;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [HeadKind::GmMixture, HeadKind::EuclideanD, HeadKind::HyperbolicD, HeadKind::FisherRao];
    let mut cases = Vec::with_capacity(configs);
    for c in 0..configs {
        let linear = c % 5 == 4;
        let head_kind = if linear { kinds[(c / 5) % 2] } else { kinds[c % kinds.len()] };
        let trunk = !linear && (c / kinds.len()) % 2 == 0;
        let loss_form = if linear || c % 3 != 2 { LossForm::Squared } else { LossForm::Absolute };
        let n = 6;
        let space = random_plane_space(&mut rng, n, if linear { 0.25 } else { 2.0 })?;
        let landmarks = LandmarkSet::new(sample(&mut rng, n, 3).into_vec(), n)?;
        let trunk_dims = if trunk { vec![5, 4] } else { vec![] };
        let model = match head_kind.readout() {
            None => {
                let arch = Architecture {
                    trunk: trunk_dims,
                    weight_hidden: if linear { vec![] } else { vec![4] },
                    head_hidden: if linear { vec![] } else { vec![4] },
                };
                let dim = if !linear && c % 8 == 4 { 2 } else { 1 };
                Model::Mixture(PTParams::init(landmarks, if linear { 1 } else { 3 }, dim, &arch, &mut rng)?)
            }
            Some(kind) => Model::Readout(ReadoutModel::init(kind, landmarks, &trunk_dims, 3, &mut rng)?),
        };
        let config = TrainConfig { head_kind, loss_form, seed: seed.wrapping_add(c as u64), ..TrainConfig::default() };
        let max_rel_error = gradcheck(&model, &space, &config, 2)?;
        cases.push(GradcheckCase { head_kind, trunk, loss_form, linear, max_rel_error });
    }
    let max_of = |lin: bool| cases.iter().filter(|c| c.linear == lin).fold(0.0f64, |m, c| m.max(c.max_rel_error));
    Ok(GradcheckSummary { max_rel_error: max_of(false), linear_max_rel_error: max_of(true), cases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{Architecture, Layer};

    fn line_space(coords: &[f64]) -> FiniteMetricSpace<f64> {
        FiniteMetricSpace::from_fn(coords.len(), |i, j| (coords[i] - coords[j]).abs()).unwrap()
    }

    /// Euclidean readout of the single feature `d(x, 0)`, scaled by `gain`.
    fn scaled_line(gain: f64, n: usize) -> Model<f64> {
        let readout = Layer::new(Mat::from_fn(1, 1, |_, _| gain), vec![0.0]).unwrap();
        Model::Readout(ReadoutModel {
            kind: ReadoutKind::Euclidean,
            landmarks: LandmarkSet::new(vec![0], n).unwrap(),
            trunk: None,
            readout,
        })
    }

    fn euclid_config() -> TrainConfig {
        TrainConfig { head_kind: HeadKind::EuclideanD, ..TrainConfig::default() }
    }

    #[test]
    fn loss_examples() {
        let sp = line_space(&[0.0, 1.0]);
        let cfg = euclid_config();
        assert_eq!(loss_eval(&scaled_line(1.0, 2), &sp, &[(0, 1)], &cfg).unwrap().loss, 0.0);
        // D² = 4 against d^{2α} = 1
        assert_eq!(loss_eval(&scaled_line(2.0, 2), &sp, &[(0, 1)], &cfg).unwrap().loss, 9.0);
        let abs = TrainConfig { loss_form: LossForm::Absolute, ..cfg.clone() };
        assert_eq!(loss_eval(&scaled_line(2.0, 2), &sp, &[(0, 1)], &abs).unwrap().loss, 1.0);
        // collapsed embedding: the loss is the squared target
        let far = line_space(&[0.0, 4.0]);
        let half = TrainConfig { alpha: 0.5, ..cfg.clone() };
        assert!((loss_eval(&scaled_line(0.0, 2), &far, &[(0, 1)], &cfg).unwrap().loss - 256.0).abs() < 1e-12);
        assert!((loss_eval(&scaled_line(0.0, 2), &far, &[(0, 1)], &half).unwrap().loss - 16.0).abs() < 1e-12);
    }

    #[test]
    fn loss_rejects_bad_input() {
        let sp = line_space(&[0.0, 1.0, 3.0]);
        let m = scaled_line(1.0, 3);
        assert!(loss_eval(&m, &sp, &[(1, 1)], &euclid_config()).is_err());
        assert!(loss_eval(&m, &sp, &[(0, 1)], &TrainConfig::default()).is_err());
        assert!(loss_eval(&m, &sp, &[(0, 7)], &euclid_config()).is_err());
        let bad = TrainConfig { alpha: 1.5, ..euclid_config() };
        assert!(loss_eval(&m, &sp, &[(0, 1)], &bad).is_err());
    }

    #[test]
    fn config_validation_and_json() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let js = serde_json::to_string(&cfg).unwrap();
        assert!(js.contains(r#""loss_form":"squared""#) && js.contains(r#""head_kind":"gm_mixture""#));
        assert_eq!(serde_json::from_str::<TrainConfig>(&js).unwrap(), cfg);
        for bad in [
            TrainConfig { lr_final: 1e-3, ..cfg.clone() },
            TrainConfig { lr_final: 0.0, lr_initial: 0.0, ..cfg.clone() },
            TrainConfig { batch_size: 1, ..cfg.clone() },
            TrainConfig { alpha: 0.0, ..cfg.clone() },
            TrainConfig { weight_decay: -1.0, ..cfg.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(serde_json::from_str::<TrainConfig>(r#"{"iterations":1}"#).is_err());
    }

    #[test]
    fn schedule_endpoints_and_monotone() {
        let n = 250;
        assert!((learning_rate(0, n, 1e-4, 1e-6) - 1e-4).abs() <= 1e-12);
        assert!((learning_rate(n - 1, n, 1e-4, 1e-6) - 1e-6).abs() <= 1e-12);
        let lrs: Vec<f64> = (0..n).map(|i| learning_rate(i, n, 1e-4, 1e-6)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert!((lrs[n / 2 - 1] * lrs[n / 2]).sqrt() < 1e-4);
        assert_eq!(learning_rate(0, 1, 3.0, 1.0), 3.0);
    }

    #[test]
    fn adam_examples() {
        let mut p: Vec<f64> = vec![1.0, -2.0, 0.5];
        let mut st = AdamState::new(&[3]);
        adam_step(&mut [&mut p[..]], &[vec![0.0; 3]], &mut st, 0.1, 0.0).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);

        let mut st = AdamState::new(&[3]);
        adam_step(&mut [&mut p[..]], &[vec![3.0, -0.2, 7.0]], &mut st, 0.01, 0.0).unwrap();
        for (a, b) in p.iter().zip([1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01f64]) {
            assert!((a - b).abs() < 1e-8);
        }

        let mut q = vec![1.0, -2.0];
        let mut st = AdamState::new(&[2]);
        for _ in 0..5 {
            adam_step(&mut [&mut q[..]], &[vec![0.0; 2]], &mut st, 0.01, 0.1).unwrap();
        }
        assert!(q[0] < 1.0 && q[0] > 0.0 && q[1] > -2.0 && q[1] < 0.0);
        assert!(adam_step(&mut [&mut q[..]], &[vec![0.0; 3]], &mut st, 0.01, 0.0).is_err());
    }

    fn small_mixture(seed: u64, n: usize) -> Model<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = Architecture { trunk: vec![8], weight_hidden: vec![], head_hidden: vec![] };
        Model::Mixture(PTParams::init(LandmarkSet::new(vec![0, 2], n).unwrap(), 3, 1, &arch, &mut rng).unwrap())
    }

    #[test]
    fn training_reduces_loss() {
        let sp = line_space(&[0.0, 1.0, 1.5, 3.0, 4.2]);
        for seed in 0..3 {
            let cfg = TrainConfig { iterations: 200, batch_size: 5, lr_initial: 1e-2, lr_final: 1e-3, seed, ..TrainConfig::default() };
            let rep = train_run(&small_mixture(seed, 5), &sp, &[0, 1, 2, 3, 4], &cfg).unwrap();
            assert_eq!(rep.loss_history.len(), 200);
            assert_eq!(rep.lr_history.len(), 200);
            assert!(rep.loss_history[199] < rep.loss_history[0], "seed {seed}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let sp = line_space(&[0.0, 1.0, 1.5, 3.0, 4.2, 6.0]);
        let cfg = TrainConfig { iterations: 30, batch_size: 3, lr_initial: 1e-2, lr_final: 1e-3, seed: 4, ..TrainConfig::default() };
        let a = train_run(&small_mixture(1, 6), &sp, &[0, 1, 3, 4, 5], &cfg).unwrap();
        let b = train_run(&small_mixture(1, 6), &sp, &[0, 1, 3, 4, 5], &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn zero_iterations_leave_model_unchanged() {
        let sp = line_space(&[0.0, 1.0, 1.5]);
        let m = small_mixture(2, 3);
        let cfg = TrainConfig { iterations: 0, ..TrainConfig::default() };
        let rep = train_run(&m, &sp, &[0, 1, 2], &cfg).unwrap();
        assert_eq!(rep.final_params, m);
        assert!(rep.loss_history.is_empty());
        assert!(train_run(&m, &sp, &[1], &cfg).is_err());
        assert!(train_run(&m, &sp, &[1, 1], &cfg).is_err());
    }

    #[test]
    fn gradcheck_suite_thresholds() {
        let s = gradcheck_suite(20, 3).unwrap();
        assert_eq!(s.cases.len(), 20);
        for kind in [HeadKind::GmMixture, HeadKind::EuclideanD, HeadKind::HyperbolicD, HeadKind::FisherRao] {
            assert!(s.cases.iter().any(|c| c.head_kind == kind && !c.linear));
        }
        assert!(s.max_rel_error <= 1e-4, "{}", s.max_rel_error);
        assert!(s.linear_max_rel_error <= 1e-9, "{}", s.linear_max_rel_error);
    }

    #[test]
    fn model_file_roundtrip() {
        let m = small_mixture(5, 4);
        let js = serde_json::to_string(&m.to_file()).unwrap();
        assert!(js.starts_with(r#"{"mixture":{"K":3"#));
        assert_eq!(Model::from_file(serde_json::from_str(&js).unwrap(), 4).unwrap(), m);
        let r = scaled_line(1.5, 4);
        let js = serde_json::to_string(&r.to_file()).unwrap();
        assert_eq!(Model::from_file(serde_json::from_str(&js).unwrap(), 4).unwrap(), r);
        assert!(Model::from_file(serde_json::from_str::<ModelFile<f64>>(&js).unwrap(), 0).is_err());
    }

    #[test]
    fn embedded_distances_match_loss_geometry() {
        let sp = line_space(&[0.0, 1.0, 2.5]);
        let d = scaled_line(2.0, 3).embedded_distances(&sp, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(d, vec![(0, 1, 2.0), (1, 2, 3.0), (0, 2, 5.0)]);
    }
}
