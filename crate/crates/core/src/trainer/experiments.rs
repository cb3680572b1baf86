//! Experiment drivers: the binary tree comparison, the `S²` run and the
//! `N`-sphere dimension sweep.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{all_pairs, train_run, HeadKind, LossForm, Model, TrainConfig};
use crate::analysis::{distortion_report, DistortionReport};
use crate::baselines::ReadoutModel;
use crate::error::{Error, Result};
use crate::metric::graph::{gen_binary_tree, graph_geodesics};
use crate::metric::sphere::{quasi_uniform_landmarks, sphere_sample};
use crate::metric::{FiniteMetricSpace, LandmarkSet};
use crate::model::{Architecture, PTParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Paper,
    Desk,
}

/// One competing model: its geometry and output size. `dim` is the mixture
/// dimension for `GmMixture`, the target dimension for readouts (ignored by
/// the Fisher–Rao plane).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub head_kind: HeadKind,
    pub dim: usize,
    pub mixture_count: usize,
}

impl HeadSpec {
    pub fn mixture(k: usize) -> Self {
        Self { name: "GM".into(), head_kind: HeadKind::GmMixture, dim: 1, mixture_count: k }
    }

    pub fn fisher_rao() -> Self {
        Self { name: "H2".into(), head_kind: HeadKind::FisherRao, dim: 2, mixture_count: 0 }
    }

    pub fn hyperbolic(d: usize) -> Self {
        Self { name: format!("H{d}"), head_kind: HeadKind::HyperbolicD, dim: d, mixture_count: 0 }
    }

    pub fn euclidean(d: usize) -> Self {
        Self { name: format!("R{d}"), head_kind: HeadKind::EuclideanD, dim: d, mixture_count: 0 }
    }
}

/// Shared network sizes and optimizer schedule of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub arch: Architecture,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub weight_decay: f64,
    pub loss_form: LossForm,
    pub heads: Vec<HeadSpec>,
}

impl TrainingPlan {
    fn config(&self, head: &HeadSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            weight_decay: self.weight_decay,
            alpha: 1.0,
            loss_form: self.loss_form,
            seed,
            head_kind: head.head_kind,
        }
    }

    /// Every head starts from the same trunk weights: the initializer
    /// draws the trunk first from a generator seeded identically.
    fn init(&self, head: &HeadSpec, landmarks: &LandmarkSet, seed: u64) -> Result<Model<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1417);
        match head.head_kind.readout() {
            None => Ok(Model::Mixture(PTParams::init(landmarks.clone(), head.mixture_count, head.dim, &self.arch, &mut rng)?)),
            Some(kind) => Ok(Model::Readout(ReadoutModel::init(kind, landmarks.clone(), &self.arch.trunk, head.dim, &mut rng)?)),
        }
    }
}

/// Mean and maximum relative error of the pairs touching one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub point: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub head: HeadSpec,
    pub config: TrainConfig,
    pub param_count: usize,
    pub train: DistortionReport<f64>,
    pub test: DistortionReport<f64>,
    pub per_point: Vec<PointError>,
    pub loss_history: Vec<f64>,
    pub lr_history: Vec<f64>,
    pub model: Model<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentBundle {
    pub space: FiniteMetricSpace<f64>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub landmarks: LandmarkSet,
    pub runs: Vec<RunResult>,
}

fn per_point_errors(space: &FiniteMetricSpace<f64>, embedded: &[(usize, usize, f64)], points: &[usize]) -> Vec<PointError> {
    let mut acc: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); space.len()];
    for &(i, j, e) in embedded {
        let d = space.d(i, j);
        let rel = (d - e).abs() / d;
        for x in [i, j] {
            acc[x].0 += rel;
            acc[x].1 = acc[x].1.max(rel);
            acc[x].2 += 1;
        }
    }
    points
        .iter()
        .filter(|&&p| acc[p].2 > 0)
        .map(|&p| PointError { point: p, mean_rel_error: acc[p].0 / acc[p].2 as f64, max_rel_error: acc[p].1 })
        .collect()
}

struct Split<'a> {
    space: &'a FiniteMetricSpace<f64>,
    train: &'a [usize],
    train_pairs: Vec<(usize, usize)>,
    test_pairs: Vec<(usize, usize)>,
    per_point: &'a [usize],
}

fn run_heads(plan: &TrainingPlan, split: &Split, landmarks: &LandmarkSet, seed: u64) -> Result<Vec<RunResult>> {
    plan.heads
        .iter()
        .map(|head| {
            let model = plan.init(head, landmarks, seed)?;
            let config = plan.config(head, seed);
            let report = train_run(&model, split.space, split.train, &config)?;
            let trained = report.final_params;
            let train_emb = trained.embedded_distances(split.space, &split.train_pairs)?;
            let test_emb = trained.embedded_distances(split.space, &split.test_pairs)?;
            Ok(RunResult {
                head: head.clone(),
                config,
                param_count: trained.param_count(),
                train: distortion_report(split.space, &train_emb, 1.0)?,
                test: distortion_report(split.space, &test_emb, 1.0)?,
                per_point: per_point_errors(split.space, &test_emb, split.per_point),
                loss_history: report.loss_history,
                lr_history: report.lr_history,
                model: trained,
            })
        })
        .collect()
}

/// Binary tree comparison: vertices split into train and test, landmarks
/// drawn from the training vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSetup {
    pub depth: u32,
    pub test_count: usize,
    pub landmark_count: usize,
    pub plan: TrainingPlan,
}

impl TreeSetup {
    pub fn new(scale: Scale) -> Self {
        let heads = vec![HeadSpec::mixture(5), HeadSpec::fisher_rao(), HeadSpec::hyperbolic(15)];
        match scale {
            Scale::Paper => Self {
                depth: 6,
                test_count: 16,
                landmark_count: 20,
                plan: TrainingPlan {
                    arch: Architecture { trunk: vec![64, 64], weight_hidden: vec![], head_hidden: vec![] },
                    iterations: 20_000,
                    batch_size: 32,
                    lr_initial: 1e-4,
                    lr_final: 1e-6,
                    weight_decay: 1e-6,
                    loss_form: LossForm::Squared,
                    heads,
                },
            },
            // desk configuration of our own: larger rates in place of the
            // long schedule
            Scale::Desk => Self {
                depth: 5,
                test_count: 8,
                landmark_count: 20,
                plan: TrainingPlan {
                    arch: Architecture { trunk: vec![64, 64], weight_hidden: vec![], head_hidden: vec![] },
                    iterations: 2000,
                    batch_size: 32,
                    lr_initial: 3e-3,
                    lr_final: 3e-4,
                    weight_decay: 1e-6,
                    loss_form: LossForm::Squared,
                    heads,
                },
            },
        }
    }
}

/// Trains every head of the tree comparison. Training error is measured on
/// all pairs of training vertices, test error on all pairs with at least
/// one test vertex.
pub fn run_tree_experiment(setup: &TreeSetup, seed: u64) -> Result<ExperimentBundle> {
    let space: FiniteMetricSpace<f64> = graph_geodesics(&gen_binary_tree(setup.depth))?;
    let n = space.len();
    if setup.test_count + setup.landmark_count.max(2) > n {
        return Err(Error::InvalidParameter(format!(
            "tree with {n} vertices cannot hold {} test vertices and {} landmarks",
            setup.test_count, setup.landmark_count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut test: Vec<usize> = order[..setup.test_count].to_vec();
    let mut train: Vec<usize> = order[setup.test_count..].to_vec();
    let mut lm: Vec<usize> = train.choose_multiple(&mut rng, setup.landmark_count).copied().collect();
    test.sort_unstable();
    train.sort_unstable();
    lm.sort_unstable();
    let landmarks = LandmarkSet::new(lm, n)?;
    let train_pairs = all_pairs(&train);
    let test_pairs: Vec<(usize, usize)> = all_pairs(&(0..n).collect::<Vec<_>>())
        .into_iter()
        .filter(|(i, j)| test.binary_search(i).is_ok() || test.binary_search(j).is_ok())
        .collect();
    let split = Split { space: &space, train: &train, train_pairs, test_pairs, per_point: &test };
    let runs = run_heads(&setup.plan, &split, &landmarks, seed)?;
    Ok(ExperimentBundle { space, train_indices: train, test_indices: test, landmarks, runs })
}

/// Sphere run: uniform training sample, a separate evaluation sample and
/// quasi-uniform landmarks appended after both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSetup {
    pub sphere_dim: usize,
    pub train_points: usize,
    pub eval_points: usize,
    pub landmark_count: usize,
    pub plan: TrainingPlan,
}

impl SphereSetup {
    fn plan(scale: Scale, heads: Vec<HeadSpec>) -> TrainingPlan {
        let arch = Architecture { trunk: vec![64, 64], weight_hidden: vec![], head_hidden: vec![] };
        match scale {
            Scale::Paper => TrainingPlan {
                arch,
                iterations: 5000,
                batch_size: 32,
                lr_initial: 1e-4,
                lr_final: 1e-6,
                weight_decay: 1e-6,
                loss_form: LossForm::Squared,
                heads,
            },
            Scale::Desk => TrainingPlan {
                arch,
                iterations: 500,
                batch_size: 32,
                lr_initial: 3e-3,
                lr_final: 3e-4,
                weight_decay: 1e-6,
                loss_form: LossForm::Squared,
                heads,
            },
        }
    }

    fn sizes(scale: Scale) -> (usize, usize) {
        match scale {
            Scale::Paper => (10_000, 500),
            Scale::Desk => (1000, 200),
        }
    }

    /// `S²` with 13 landmarks and a mixture head only.
    pub fn visualization(scale: Scale) -> Self {
        let (train_points, eval_points) = Self::sizes(scale);
        Self { sphere_dim: 2, train_points, eval_points, landmark_count: 13, plan: Self::plan(scale, vec![HeadSpec::mixture(5)]) }
    }

    /// `S^N` with `N + 10` landmarks; mixture, `ℝ¹⁵` and `ℍ¹⁵` heads.
    pub fn sweep(sphere_dim: usize, scale: Scale) -> Self {
        let (train_points, eval_points) = Self::sizes(scale);
        let heads = vec![HeadSpec::mixture(5), HeadSpec::euclidean(15), HeadSpec::hyperbolic(15)];
        Self { sphere_dim, train_points, eval_points, landmark_count: sphere_dim + 10, plan: Self::plan(scale, heads) }
    }
}

/// Training error is measured on all pairs among the first `eval_points`
/// training points, test error on all pairs of the evaluation sample.
pub fn run_sphere_experiment(setup: &SphereSetup, seed: u64) -> Result<ExperimentBundle> {
    let train_set = sphere_sample::<f64>(setup.sphere_dim, setup.train_points, seed)?;
    let eval_set = sphere_sample::<f64>(setup.sphere_dim, setup.eval_points, seed.wrapping_add(1))?;
    let lm_set = quasi_uniform_landmarks::<f64>(setup.sphere_dim, setup.landmark_count, seed.wrapping_add(2))?;
    let space = train_set.concat(&eval_set)?.concat(&lm_set)?.metric_space()?;
    let (nt, ne) = (setup.train_points, setup.eval_points);
    let train: Vec<usize> = (0..nt).collect();
    let test: Vec<usize> = (nt..nt + ne).collect();
    let landmarks = LandmarkSet::new((nt + ne..space.len()).collect(), space.len())?;
    let split = Split {
        space: &space,
        train: &train,
        train_pairs: all_pairs(&train[..ne.min(nt)]),
        test_pairs: all_pairs(&test),
        per_point: &test,
    };
    let runs = run_heads(&setup.plan, &split, &landmarks, seed)?;
    Ok(ExperimentBundle { space, train_indices: train, test_indices: test, landmarks, runs })
}

/// One row of the dimension-vs-error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sphere_dim: usize,
    pub head: String,
    pub train_mean_rel_error: f64,
    pub test_mean_rel_error: f64,
    pub param_count: usize,
}

pub fn run_dimension_sweep(dims: &[usize], scale: Scale, seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in dims {
        let bundle = run_sphere_experiment(&SphereSetup::sweep(n, scale), seed)?;
        rows.extend(bundle.runs.iter().map(|r| SweepRow {
            sphere_dim: n,
            head: r.head.name.clone(),
            train_mean_rel_error: r.train.mean_rel_error,
            test_mean_rel_error: r.test.mean_rel_error,
            param_count: r.param_count,
        }));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan(heads: Vec<HeadSpec>) -> TrainingPlan {
        TrainingPlan {
            arch: Architecture { trunk: vec![8, 8], weight_hidden: vec![], head_hidden: vec![] },
            iterations: 20,
            batch_size: 6,
            lr_initial: 1e-2,
            lr_final: 1e-3,
            weight_decay: 1e-6,
            loss_form: LossForm::Squared,
            heads,
        }
    }

    #[test]
    fn heads_share_initial_trunk() {
        let plan = tiny_plan(vec![HeadSpec::mixture(3), HeadSpec::fisher_rao(), HeadSpec::hyperbolic(4)]);
        let lm = LandmarkSet::new(vec![0, 3, 5], 9).unwrap();
        let trunks: Vec<_> = plan
            .heads
            .iter()
            .map(|h| match plan.init(h, &lm, 11).unwrap() {
                Model::Mixture(p) => p.trunk.unwrap(),
                Model::Readout(r) => r.trunk.unwrap(),
            })
            .collect();
        assert!(trunks.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn tree_split_and_reports() {
        let setup = TreeSetup { depth: 3, test_count: 3, landmark_count: 4, plan: tiny_plan(TreeSetup::new(Scale::Desk).plan.heads) };
        let b = run_tree_experiment(&setup, 5).unwrap();
        assert_eq!(b.space.len(), 15);
        assert_eq!((b.train_indices.len(), b.test_indices.len()), (12, 3));
        assert!(b.landmarks.indices().iter().all(|l| b.train_indices.contains(l)));
        let names: Vec<&str> = b.runs.iter().map(|r| r.head.name.as_str()).collect();
        assert_eq!(names, ["GM", "H2", "H15"]);
        for r in &b.runs {
            assert_eq!(r.train.pair_ratios.len(), 12 * 11 / 2);
            assert_eq!(r.test.pair_ratios.len(), 15 * 14 / 2 - 12 * 11 / 2);
            assert_eq!(r.loss_history.len(), 20);
            assert_eq!(r.per_point.len(), 3);
        }
        assert_eq!(run_tree_experiment(&setup, 5).unwrap(), b);
        let too_many = TreeSetup { test_count: 14, ..setup };
        assert!(run_tree_experiment(&too_many, 5).is_err());
    }

    #[test]
    fn sphere_setups() {
        let s = SphereSetup::sweep(7, Scale::Desk);
        assert_eq!(s.landmark_count, 17);
        assert_eq!((s.train_points, s.plan.iterations), (1000, 500));
        let names: Vec<&str> = s.plan.heads.iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, ["GM", "R15", "H15"]);
        let v = SphereSetup::visualization(Scale::Desk);
        assert_eq!((v.sphere_dim, v.landmark_count, v.plan.batch_size), (2, 13, 32));
        assert_eq!(v.plan.heads[0].mixture_count, 5);
    }

    #[test]
    fn small_sphere_run() {
        let setup = SphereSetup {
            sphere_dim: 2,
            train_points: 40,
            eval_points: 10,
            landmark_count: 5,
            plan: tiny_plan(vec![HeadSpec::mixture(2), HeadSpec::euclidean(3)]),
        };
        let b = run_sphere_experiment(&setup, 1).unwrap();
        assert_eq!(b.space.len(), 55);
        assert_eq!(b.landmarks.indices(), &[50, 51, 52, 53, 54]);
        for r in &b.runs {
            assert_eq!(r.test.pair_ratios.len(), 45);
            assert_eq!(r.train.pair_ratios.len(), 45);
            assert_eq!(r.per_point.len(), 10);
            assert!(r.per_point.iter().all(|p| p.max_rel_error >= p.mean_rel_error));
        }
    }
}
