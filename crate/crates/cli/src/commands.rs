//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use mixwass::analysis::export::{write_density_csv, write_loss_history_csv, DensityOptions};
use mixwass::analysis::{
    distortion_report, min_valid_delta, pac_distortion_from_delta, pac_fraction_curve, pac_probability_bound,
    pac_theta_from_distortion, DistortionReport,
};
use mixwass::baselines::ReadoutModel;
use mixwass::embed::{constructive_embed, initialize_bias};
use mixwass::metric::graph::{gen_binary_tree, gen_two_hop, graph_geodesics, GraphSpec, TwoHopKind};
use mixwass::metric::sphere::sphere_sample;
use mixwass::metric::LandmarkSet;
use mixwass::model::{complexity_report, pt_forward_1d, Architecture, PTParams, SpaceStats, TheoremExtras};
use mixwass::trainer::experiments::{PointError, TrainingPlan};
use mixwass::trainer::{
    all_pairs, gradcheck_suite, run_dimension_sweep, run_sphere_experiment, run_tree_experiment, train_run,
    ExperimentBundle, HeadKind, HeadSpec, LossForm, ModelFile, RunResult, Scale, SphereSetup, TrainConfig, TreeSetup,
};
use mixwass::transport::mw2;
use mixwass::{MetricSpace, Mixture1D, Model};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::{read_json, read_space, CliError, CliResult, MixtureFile, OutDir};
use crate::{Common, Format, ScaleArg};

#[derive(Subcommand, Debug)]
pub enum Dataset {
    /// Full binary tree with unit edges.
    Tree {
        #[arg(long, default_value_t = 5)]
        depth: u32,
    },
    /// Graph of diameter at most two.
    TwoHop {
        #[arg(long, value_enum)]
        kind: TwoHopArg,
        /// Leaves, rim length, triangles, or left part size.
        #[arg(long)]
        size: usize,
        /// Right part size of the complete bipartite graph.
        #[arg(long)]
        size2: Option<usize>,
    },
    /// Uniform sample of the sphere S^N (N from --dim, default 2).
    Sphere {
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum TwoHopArg {
    Star,
    Wheel,
    Bipartite,
    Friendship,
}

#[derive(Subcommand, Debug)]
pub enum Experiment {
    /// Binary tree: mixtures vs the Fisher-Rao plane vs H^15.
    Tree,
    /// S^2 with 13 landmarks and a mixture head; exports densities.
    S2,
    /// S^N (N from --dim, default 10): mixtures vs R^15 vs H^15.
    Sphere,
    /// Dimension-vs-error table over several sphere dimensions.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 5, 10])]
        dims: Vec<usize>,
    },
    /// One model on a user-supplied space, trained on all points.
    Custom {
        /// Distance matrix (.csv) or space (.json).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = HeadArg::Gm)]
        head: HeadArg,
        /// TrainConfig JSON; the head kind is taken from --head.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LossArg::Squared)]
        loss: LossArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum HeadArg {
    Gm,
    Euclidean,
    Hyperbolic,
    FisherRao,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LossArg {
    Squared,
    Absolute,
}

fn scale(c: &Common) -> Scale {
    match c.scale {
        ScaleArg::Paper => Scale::Paper,
        ScaleArg::Desk => Scale::Desk,
    }
}

fn space_file(c: &Common) -> &'static str {
    match c.format {
        Format::Csv => "space.csv",
        Format::Json => "space.json",
    }
}

fn write_space(out: &OutDir, c: &Common, space: &MetricSpace) -> CliResult<()> {
    match c.format {
        Format::Csv => out.write(space_file(c), |w| space.write_csv(w)),
        Format::Json => out.json(space_file(c), space),
    }
}

fn write_graph(out: &OutDir, g: &GraphSpec) -> CliResult<()> {
    out.write("graph.txt", |w| g.write_edge_list(w))
}

pub fn gen(c: &Common, dataset: Dataset) -> CliResult<()> {
    let out = OutDir::create(&c.out, c.format)?;
    match dataset {
        Dataset::Tree { depth } => {
            if depth > 14 {
                return Err(CliError::Invalid(format!("tree depth {depth} is too large (at most 14)")));
            }
            let g = gen_binary_tree(depth);
            write_space(&out, c, &graph_geodesics(&g)?)?;
            write_graph(&out, &g)
        }
        Dataset::TwoHop { kind, size, size2 } => {
            let kind = match kind {
                TwoHopArg::Star => TwoHopKind::Star { leaves: size },
                TwoHopArg::Wheel => TwoHopKind::Wheel { rim: size },
                TwoHopArg::Friendship => TwoHopKind::Friendship { triangles: size },
                TwoHopArg::Bipartite => TwoHopKind::CompleteBipartite {
                    left: size,
                    right: size2.ok_or_else(|| CliError::Invalid("bipartite graphs need --size2".into()))?,
                },
            };
            let g = gen_two_hop(kind)?;
            write_space(&out, c, &graph_geodesics(&g)?)?;
            write_graph(&out, &g)
        }
        Dataset::Sphere { points } => {
            let set = sphere_sample::<f64>(c.dim.unwrap_or(2), points, c.seed)?;
            write_space(&out, c, &set.metric_space()?)?;
            match c.format {
                Format::Json => out.json("points.json", &set),
                Format::Csv => out.write("points.csv", |w| {
                    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
                    for p in &set.points {
                        wr.write_record(p.iter().map(f64::to_string))?;
                    }
                    wr.flush()?;
                    Ok(())
                }),
            }
        }
    }
}

/// Summary statistics of a distortion report, without the per-pair ratios.
#[derive(Serialize)]
struct ReportRow {
    pairs: usize,
    mean_rel_error: f64,
    max_rel_error: f64,
    scale_s: f64,
    distortion_d: f64,
}

impl ReportRow {
    fn new(r: &DistortionReport<f64>) -> Self {
        Self {
            pairs: r.pair_ratios.len(),
            mean_rel_error: r.mean_rel_error,
            max_rel_error: r.max_rel_error,
            scale_s: r.scale_s,
            distortion_d: r.distortion_d,
        }
    }
}

fn mixture_distances(space: &MetricSpace, mixtures: &[Mixture1D]) -> CliResult<Vec<(usize, usize, f64)>> {
    let idx: Vec<usize> = (0..space.len()).collect();
    all_pairs(&idx).into_iter().map(|(i, j)| Ok((i, j, mw2(&mixtures[i], &mixtures[j])?.0))).collect()
}

pub fn embed(c: &Common, input: &Path) -> CliResult<()> {
    let space = read_space(input)?;
    let out = OutDir::create(&c.out, c.format)?;
    let mixtures = constructive_embed(&space, c.alpha)?;
    let bias = initialize_bias(&space.snowflake(c.alpha)?.to_rows())?;
    out.json("embedding.json", &MixtureFile { points: (0..space.len()).collect(), mixtures: mixtures.clone() })?;
    out.write("bias.csv", |w| bias.write_csv(w))?;
    let report = distortion_report(&space, &mixture_distances(&space, &mixtures)?, c.alpha)?;
    out.table("report", &[ReportRow::new(&report)])
}

fn apply_overrides(plan: &mut TrainingPlan, c: &Common) -> CliResult<()> {
    if let Some(it) = c.iters {
        plan.iterations = it;
    }
    if let Some(lr) = c.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(CliError::Invalid(format!("learning rate must be positive, got {lr}")));
        }
        let ratio = plan.lr_final / plan.lr_initial;
        plan.lr_initial = lr;
        plan.lr_final = lr * ratio;
    }
    if c.k == 0 {
        return Err(CliError::Invalid("--k must be positive".into()));
    }
    for h in &mut plan.heads {
        if h.head_kind == HeadKind::GmMixture {
            h.mixture_count = c.k;
        }
    }
    if c.alpha != 1.0 {
        eprintln!("note: experiments train with alpha = 1; --alpha applies to embed and report");
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    head: String,
    head_kind: HeadKind,
    param_count: usize,
    train_mean_rel_error: f64,
    train_max_rel_error: f64,
    test_mean_rel_error: f64,
    test_max_rel_error: f64,
    final_loss: f64,
}

#[derive(Serialize)]
struct Split<'a> {
    train: &'a [usize],
    test: &'a [usize],
    landmarks: &'a [usize],
}

fn write_run(out: &OutDir, run: &RunResult, space: &MetricSpace, export_points: &[usize]) -> CliResult<()> {
    let dir = out.sub(&run.head.name)?;
    dir.write("loss.csv", |w| write_loss_history_csv(w, &run.loss_history, &run.lr_history))?;
    dir.json("model.json", &run.model.to_file())?;
    dir.json("config.json", &run.config)?;
    dir.table("train_report", &[ReportRow::new(&run.train)])?;
    dir.table("test_report", &[ReportRow::new(&run.test)])?;
    if !run.per_point.is_empty() {
        dir.table("per_point", &run.per_point)?;
    }
    if let Model::Mixture(p) = &run.model {
        if p.output_dim() == 1 && !export_points.is_empty() {
            let mixtures =
                export_points.iter().map(|&x| pt_forward_1d(p, space, x)).collect::<mixwass::Result<Vec<_>>>()?;
            dir.json("mixtures.json", &MixtureFile { points: export_points.to_vec(), mixtures })?;
        }
    }
    Ok(())
}

fn write_bundle(out: &OutDir, b: &ExperimentBundle, export_points: &[usize]) -> CliResult<()> {
    out.json("split.json", &Split { train: &b.train_indices, test: &b.test_indices, landmarks: b.landmarks.indices() })?;
    let rows: Vec<SummaryRow> = b
        .runs
        .iter()
        .map(|r| SummaryRow {
            head: r.head.name.clone(),
            head_kind: r.head.head_kind,
            param_count: r.param_count,
            train_mean_rel_error: r.train.mean_rel_error,
            train_max_rel_error: r.train.max_rel_error,
            test_mean_rel_error: r.test.mean_rel_error,
            test_max_rel_error: r.test.max_rel_error,
            final_loss: r.loss_history.last().copied().unwrap_or(f64::NAN),
        })
        .collect();
    for r in &rows {
        println!(
            "{:>4}  params {:>6}  train mean {:.4} max {:.4}  test mean {:.4} max {:.4}",
            r.head, r.param_count, r.train_mean_rel_error, r.train_max_rel_error, r.test_mean_rel_error, r.test_max_rel_error
        );
    }
    out.table("summary", &rows)?;
    for run in &b.runs {
        write_run(out, run, &b.space, export_points)?;
    }
    Ok(())
}

pub fn train(c: &Common, experiment: Experiment) -> CliResult<()> {
    let out = OutDir::create(&c.out, c.format)?;
    match experiment {
        Experiment::Tree => {
            let mut setup = TreeSetup::new(scale(c));
            apply_overrides(&mut setup.plan, c)?;
            if let Some(l) = c.landmarks {
                setup.landmark_count = l;
            }
            let b = run_tree_experiment(&setup, c.seed)?;
            write_space(&out, c, &b.space)?;
            let all: Vec<usize> = (0..b.space.len()).collect();
            write_bundle(&out, &b, &all)
        }
        Experiment::S2 | Experiment::Sphere => {
            let mut setup = match experiment {
                Experiment::S2 => SphereSetup::visualization(scale(c)),
                _ => SphereSetup::sweep(c.dim.unwrap_or(10), scale(c)),
            };
            apply_overrides(&mut setup.plan, c)?;
            if let Some(l) = c.landmarks {
                setup.landmark_count = l;
            }
            let b = run_sphere_experiment(&setup, c.seed)?;
            let export = b.test_indices.clone();
            write_bundle(&out, &b, &export)
        }
        Experiment::Sweep { dims } => {
            if c.iters.is_some() || c.lr.is_some() || c.landmarks.is_some() || c.k != 5 {
                return Err(CliError::Invalid("the sweep uses the fixed setups; use `train sphere` to override".into()));
            }
            let rows = run_dimension_sweep(&dims, scale(c), c.seed)?;
            for r in &rows {
                println!("N = {:>2}  {:>4}  train {:.4}  test {:.4}", r.sphere_dim, r.head, r.train_mean_rel_error, r.test_mean_rel_error);
            }
            out.table("sweep", &rows)
        }
        Experiment::Custom { input, head, config, loss } => custom(c, &out, &input, head, config.as_deref(), loss),
    }
}

fn custom(c: &Common, out: &OutDir, input: &Path, head: HeadArg, config: Option<&Path>, loss: LossArg) -> CliResult<()> {
    let space = read_space(input)?;
    let n = space.len();
    let head_kind = match head {
        HeadArg::Gm => HeadKind::GmMixture,
        HeadArg::Euclidean => HeadKind::EuclideanD,
        HeadArg::Hyperbolic => HeadKind::HyperbolicD,
        HeadArg::FisherRao => HeadKind::FisherRao,
    };
    let mut cfg = match config {
        Some(p) => read_json::<TrainConfig>(p)?,
        None => TrainConfig {
            iterations: 500,
            lr_initial: 3e-3,
            lr_final: 3e-4,
            alpha: c.alpha,
            loss_form: match loss {
                LossArg::Squared => LossForm::Squared,
                LossArg::Absolute => LossForm::Absolute,
            },
            ..TrainConfig::default()
        },
    };
    cfg.head_kind = head_kind;
    cfg.seed = c.seed;
    if let Some(it) = c.iters {
        cfg.iterations = it;
    }
    if let Some(lr) = c.lr {
        cfg.lr_final *= lr / cfg.lr_initial;
        cfg.lr_initial = lr;
    }
    cfg.validate()?;
    let l = c.landmarks.unwrap_or(20).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut lm = order[..l].to_vec();
    lm.sort_unstable();
    let landmarks = LandmarkSet::new(lm, n)?;
    let arch = Architecture { trunk: vec![64, 64], weight_hidden: vec![], head_hidden: vec![] };
    let dim = c.dim.unwrap_or(if head_kind == HeadKind::GmMixture { 1 } else { 15 });
    let model = match head_kind.readout() {
        None => Model::Mixture(PTParams::init(landmarks.clone(), c.k, dim, &arch, &mut rng)?),
        Some(kind) => Model::Readout(ReadoutModel::init(kind, landmarks.clone(), &arch.trunk, dim, &mut rng)?),
    };
    let points: Vec<usize> = (0..n).collect();
    let report = train_run(&model, &space, &points, &cfg)?;
    let trained = report.final_params;
    let emb = trained.embedded_distances(&space, &all_pairs(&points))?;
    let dist = distortion_report(&space, &emb, cfg.alpha)?;
    let name = match head_kind {
        HeadKind::GmMixture => "GM".to_string(),
        HeadKind::EuclideanD => format!("R{dim}"),
        HeadKind::HyperbolicD => format!("H{dim}"),
        HeadKind::FisherRao => "H2".to_string(),
    };
    let run = RunResult {
        head: HeadSpec { name, head_kind, dim, mixture_count: if head_kind == HeadKind::GmMixture { c.k } else { 0 } },
        config: cfg,
        param_count: trained.param_count(),
        train: dist.clone(),
        test: dist,
        per_point: Vec::<PointError>::new(),
        loss_history: report.loss_history,
        lr_history: report.lr_history,
        model: trained,
    };
    let bundle = ExperimentBundle { space, train_indices: points.clone(), test_indices: Vec::new(), landmarks, runs: vec![run] };
    write_bundle(out, &bundle, &points)
}

#[derive(Serialize)]
struct PacRow {
    n: usize,
    delta: Option<f64>,
    min_valid_delta: f64,
    distortion: f64,
    theta: f64,
    probability_bound: f64,
    probability_intro: f64,
    probability_proof: f64,
}

fn pac_row(n: usize, delta: Option<f64>, distortion: f64) -> CliResult<PacRow> {
    let theta = pac_theta_from_distortion(distortion)?;
    let nf = n as f64;
    let e = std::f64::consts::E;
    Ok(PacRow {
        n,
        delta,
        min_valid_delta: min_valid_delta(n),
        distortion,
        theta,
        probability_bound: pac_probability_bound(n, theta),
        probability_intro: nf.powf(-4.0 * e / (1.0 + distortion)),
        probability_proof: nf.powf(-4.0 * e / distortion),
    })
}

pub fn pac(c: &Common, n: usize, delta: Option<f64>, distortion: Option<f64>) -> CliResult<()> {
    if n < 2 {
        return Err(CliError::Invalid(format!("--n must be at least 2, got {n}")));
    }
    let rows = match (delta, distortion) {
        (Some(d), _) => vec![pac_row(n, Some(d), pac_distortion_from_delta(n, d)?)?],
        (None, Some(dd)) => vec![pac_row(n, None, dd)?],
        (None, None) => [0.3, 0.5, 0.9]
            .into_iter()
            .filter(|&d| d > min_valid_delta(n))
            .map(|d| pac_row(n, Some(d), pac_distortion_from_delta(n, d)?))
            .collect::<CliResult<_>>()?,
    };
    OutDir::create(&c.out, c.format)?.table("pac", &rows)
}

pub fn density(c: &Common, input: &Path, points: usize, sigma_transform: bool) -> CliResult<()> {
    let file: MixtureFile = read_json(input)?;
    if file.points.len() != file.mixtures.len() {
        return Err(CliError::Invalid("mixture file has mismatched points and mixtures".into()));
    }
    let named: Vec<(String, Mixture1D)> =
        file.points.iter().zip(file.mixtures).map(|(p, m)| (p.to_string(), m)).collect();
    let out = OutDir::create(&c.out, c.format)?;
    out.write("density.csv", |w| write_density_csv(w, &named, DensityOptions { points, sigma_transform }))
}

#[derive(Serialize)]
struct CurveRow {
    distortion: f64,
    fraction: f64,
}

pub fn report(c: &Common, input: &Path, model: Option<&Path>, embedding: Option<&Path>) -> CliResult<()> {
    let space = read_space(input)?;
    let n = space.len();
    let idx: Vec<usize> = (0..n).collect();
    let out = OutDir::create(&c.out, c.format)?;
    let (emb, mixture_model) = match (model, embedding) {
        (Some(p), _) => {
            let m = Model::from_file(read_json::<ModelFile<f64>>(p)?, n)?;
            (m.embedded_distances(&space, &all_pairs(&idx))?, if let Model::Mixture(pt) = m { Some(pt) } else { None })
        }
        (None, Some(p)) => {
            let file: MixtureFile = read_json(p)?;
            let mut by_point: Vec<Option<Mixture1D>> = vec![None; n];
            for (&x, m) in file.points.iter().zip(file.mixtures) {
                *by_point.get_mut(x).ok_or(mixwass::Error::IndexOutOfRange { index: x, len: n })? = Some(m);
            }
            let mixtures: Vec<Mixture1D> = by_point
                .into_iter()
                .collect::<Option<_>>()
                .ok_or_else(|| CliError::Invalid("embedding does not cover every point".into()))?;
            (mixture_distances(&space, &mixtures)?, None)
        }
        (None, None) => return Err(CliError::Invalid("report needs --model or --embedding".into())),
    };
    let rep = distortion_report(&space, &emb, c.alpha)?;
    out.table("report", &[ReportRow::new(&rep)])?;
    let mut grid = vec![1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0];
    if rep.distortion_d.is_finite() {
        grid.push(rep.distortion_d);
    }
    let curve = pac_fraction_curve(&rep, &grid)?;
    let rows: Vec<CurveRow> =
        curve.distortion.iter().zip(&curve.fraction).map(|(&d, &f)| CurveRow { distortion: d, fraction: f }).collect();
    out.table("pac_curve", &rows)?;
    if let Some(pt) = mixture_model {
        let (aspect, diameter) = space.aspect_ratio_and_diameter()?;
        let extras = TheoremExtras {
            alpha: Some(c.alpha),
            distortion: (rep.distortion_d > 2.0 && rep.distortion_d.is_finite()).then_some(rep.distortion_d),
            ..TheoremExtras::default()
        };
        out.json("complexity.json", &complexity_report(&pt, SpaceStats { n, aspect, diameter }, &extras)?)?;
    }
    Ok(())
}

pub fn gradcheck(c: &Common, configs: usize) -> CliResult<()> {
    if configs == 0 {
        return Err(CliError::Invalid("--configs must be positive".into()));
    }
    let s = gradcheck_suite(configs, c.seed)?;
    let out = OutDir::create(&c.out, c.format)?;
    out.table("gradcheck", &s.cases)?;
    println!("max relative error {:.3e} (linear configs {:.3e})", s.max_rel_error, s.linear_max_rel_error);
    if s.max_rel_error > 1e-4 || s.linear_max_rel_error > 1e-9 {
        return Err(CliError::Numeric(format!(
            "gradient check failed: {:.3e} (limit 1e-4), linear {:.3e} (limit 1e-9)",
            s.max_rel_error, s.linear_max_rel_error
        )));
    }
    Ok(())
}
