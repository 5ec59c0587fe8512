//! Pipeline commands behind the `gpshape` binary. Each `cmd_*` function does
//! the work of one subcommand and returns a summary, so the pipeline can also
//! be driven from code.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gpshape::geometry::{normalize_to_unit_sphere, sample_surface, unit_sphere_normalization, Normalization, Point3};
use gpshape::io::{self, QueryBudget, RunConfig};
use gpshape::kernels::{Kernel, KernelKind};
use gpshape::metrics::{self, MetricsReport};
use gpshape::mixture::{self, ReconstructedCloud, ShapeModel};
use gpshape::partition::{self, ReferenceSet};
use log::{info, warn};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values.
    Usage(String),
    Core(gpshape::Error),
}

impl CliError {
    /// 2 for usage and file problems, 1 for failures in the computation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_file_error() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Usage(_) => None,
            CliError::Core(e) => Some(e),
        }
    }
}

impl From<gpshape::Error> for CliError {
    fn from(e: gpshape::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(gpshape::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads the config file (or defaults), then applies `overrides` in order.
pub fn build_config(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (key, value) in overrides {
        cfg.set(key, value)
            .map_err(|e| CliError::Usage(format!("--{key} {value}: {e}")))?;
    }
    cfg.validate().map_err(|e| match e {
        e if e.is_file_error() => CliError::Core(e),
        e => CliError::Usage(e.to_string()),
    })?;
    Ok(cfg)
}

/// Output paths written by [`cmd_sample`].
#[derive(Debug, Clone)]
pub struct SampleOutputs {
    pub dense: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub normalization: PathBuf,
    pub dense_points: usize,
}

/// Normalizes the mesh into the unit sphere, ray-casts a dense cloud and
/// draws disjoint train and test subsets from it.
pub fn cmd_sample(mesh_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<SampleOutputs> {
    let mesh = io::load_mesh(mesh_path)?;
    let norm = unit_sphere_normalization(mesh.vertices())?;
    let mesh = mesh.map_vertices(|p| norm.apply(p));
    let dense = sample_surface(&mesh, cfg.cameras, cfg.rays_per_camera)?;
    info!("{} surface points from {} cameras", dense.len(), cfg.cameras);
    let (train, test) = io::split(&dense, cfg.train_size, cfg.test_size, cfg.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let out = SampleOutputs {
        dense: out_dir.join("dense.xyz"),
        train: out_dir.join("train.xyz"),
        test: out_dir.join("test.xyz"),
        normalization: out_dir.join("normalization.json"),
        dense_points: dense.len(),
    };
    io::write_xyz(&out.dense, &dense)?;
    io::write_xyz(&out.train, &train)?;
    io::write_xyz(&out.test, &test)?;
    io::save_normalization(&out.normalization, &norm)?;
    Ok(out)
}

/// Brings a cloud into the unit sphere. Clouds already inside it are used
/// as they are.
fn training_frame(points: &[Point3]) -> Result<(Vec<Point3>, Normalization)> {
    if points.iter().all(|p| p.norm() <= 1.0) {
        return Ok((points.to_vec(), Normalization::IDENTITY));
    }
    info!("cloud extends beyond the unit sphere; normalizing");
    Ok(normalize_to_unit_sphere(points)?)
}

#[derive(Debug, Clone)]
pub struct ClusterSummary {
    pub refs: ReferenceSet,
    pub counts: Vec<usize>,
    pub occlusion: Vec<f64>,
}

/// Places reference points and writes their centers, in the cloud's frame.
pub fn cmd_cluster(cloud: &Path, cfg: &RunConfig, out_centers: &Path) -> Result<ClusterSummary> {
    let raw = io::load_point_cloud(cloud)?;
    let (points, norm) = training_frame(&raw)?;
    let refs = cfg.reference_set(&points)?;
    let part = partition::assign(&points, &refs);
    let counts = part.primary_counts();
    let occlusion = partition::occlusion_fractions(&points, &refs, &part, None);
    for (k, (c, o)) in counts.iter().zip(&occlusion).enumerate() {
        info!("cluster {k}: {c} points, {:.1}% occluded", o * 100.0);
    }
    let centers: Vec<Point3> = refs.centers().iter().map(|&c| norm.invert(c)).collect();
    io::write_xyz(out_centers, &centers)?;
    Ok(ClusterSummary {
        refs,
        counts,
        occlusion,
    })
}

fn fit(points: &[Point3], refs: &ReferenceSet, cfg: &RunConfig, norm: Normalization) -> Result<ShapeModel> {
    let mut opts = cfg.train_options()?;
    opts.normalization = norm;
    Ok(mixture::train(points, refs, &opts)?)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub counts: Vec<usize>,
    pub lml: Vec<f64>,
    pub seconds: f64,
}

/// Trains a model on `train_cloud` and writes it to `out_model`.
pub fn cmd_train(train_cloud: &Path, cfg: &RunConfig, out_model: &Path) -> Result<TrainSummary> {
    let raw = io::load_point_cloud(train_cloud)?;
    let (points, norm) = training_frame(&raw)?;
    let start = Instant::now();
    let refs = cfg.reference_set(&points)?;
    let model = fit(&points, &refs, cfg, norm)?;
    let seconds = start.elapsed().as_secs_f64();
    io::save_model(out_model, &model)?;
    let summary = TrainSummary {
        counts: model.member_counts(),
        lml: model.regressors().iter().map(|g| g.log_marginal_likelihood()).collect(),
        seconds,
    };
    for (k, (c, l)) in summary.counts.iter().zip(&summary.lml).enumerate() {
        info!("cluster {k}: {c} training samples, lml {l:.4}");
    }
    info!("trained {} clusters in {seconds:.2}s", model.num_clusters());
    Ok(summary)
}

/// Reconstructed cloud in the model's unit-sphere frame.
pub fn reconstruct_model(model: &ShapeModel, cfg: &RunConfig) -> Result<ReconstructedCloud> {
    let budget = match cfg.budget {
        QueryBudget::Uniform => mixture::uniform_budget(model, cfg.queries),
        QueryBudget::Proportional => mixture::proportional_budget(model, cfg.queries),
    };
    Ok(mixture::reconstruct_with_budget(model, &budget)?)
}

/// Writes the reconstructed cloud in the frame of the training file.
pub fn cmd_reconstruct(model_path: &Path, cfg: &RunConfig, out_cloud: &Path) -> Result<usize> {
    let model = io::load_model(model_path)?;
    let cloud = mixture::de_normalize(&reconstruct_model(&model, cfg)?, &model);
    io::save_point_cloud(out_cloud, &cloud.points)?;
    Ok(cloud.len())
}

/// Writes `x y z likelihood` per input point and returns the mean likelihood.
pub fn cmd_likelihood(model_path: &Path, cloud: &Path, out: &Path) -> Result<f64> {
    use rayon::prelude::*;
    let model = io::load_model(model_path)?;
    let points = io::load_point_cloud(cloud)?;
    let norm = model.normalization();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&p| mixture::point_likelihood(norm.apply(p), &model))
        .collect();
    let file = fs::File::create(out).map_err(|e| io_error(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (p, l) in points.iter().zip(&values) {
        writeln!(w, "{} {} {} {l}", p.x, p.y, p.z).map_err(|e| io_error(out, e))?;
    }
    w.flush().map_err(|e| io_error(out, e))?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn evaluate_model(model: &ShapeModel, test: &[Point3], cfg: &RunConfig) -> Result<(MetricsReport, Vec<Point3>, Vec<Point3>)> {
    let norm = model.normalization();
    let gt: Vec<Point3> = test.iter().map(|&p| norm.apply(p)).collect();
    let est = reconstruct_model(model, cfg)?.points;
    if est.is_empty() {
        return Err(gpshape::Error::EmptyInput("reconstruction").into());
    }
    let report = metrics::evaluate(&gt, &est, cfg.tau)?;
    Ok((report, gt, est))
}

/// Reconstructs, compares with the test cloud in the unit-sphere frame and
/// writes a JSON report plus, optionally, a per-point error heatmap.
pub fn cmd_eval(
    model_path: &Path,
    test_cloud: &Path,
    cfg: &RunConfig,
    out_report: &Path,
    out_heatmap: Option<&Path>,
) -> Result<MetricsReport> {
    let model = io::load_model(model_path)?;
    let test = io::load_point_cloud(test_cloud)?;
    let (report, gt, est) = evaluate_model(&model, &test, cfg)?;
    io::write_json_line(out_report, &report)?;
    if let Some(h) = out_heatmap {
        let errors = metrics::error_heatmap(&gt, &est)?;
        io::write_heatmap_ply(h, &test, &errors)?;
    }
    Ok(report)
}

/// One ablation experiment; `metrics` is `None` when it failed.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub label: String,
    pub metrics: Option<MetricsReport>,
    pub train_seconds: f64,
}

fn run_experiment(
    label: String,
    points: &[Point3],
    norm: Normalization,
    test: &[Point3],
    refs: Result<ReferenceSet>,
    cfg: &RunConfig,
) -> AblationRow {
    let start = Instant::now();
    let result = refs
        .and_then(|refs| fit(points, &refs, cfg, norm))
        .map(|model| (start.elapsed().as_secs_f64(), model))
        .and_then(|(secs, model)| Ok((secs, evaluate_model(&model, test, cfg)?.0)));
    match result {
        Ok((secs, report)) => {
            info!("{label}: chamfer {:.6}, F {:.4}, {secs:.1}s", report.chamfer, report.fscore);
            AblationRow {
                label,
                metrics: Some(report),
                train_seconds: secs,
            }
        }
        Err(e) => {
            warn!("{label}: {e}");
            AblationRow {
                label,
                metrics: None,
                train_seconds: start.elapsed().as_secs_f64(),
            }
        }
    }
}

fn write_csv(path: &Path, first: &str, rows: &[AblationRow]) -> Result<()> {
    let mut text = format!("{first},chamfer,precision,recall,fscore,train_seconds\n");
    for r in rows {
        match &r.metrics {
            Some(m) => text += &format!(
                "{},{},{},{},{},{:.3}\n",
                r.label, m.chamfer, m.precision, m.recall, m.fscore, r.train_seconds
            ),
            None => text += &format!("{},error,error,error,error,error\n", r.label),
        }
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn load_pair(train: &Path, test: &Path) -> Result<(Vec<Point3>, Normalization, Vec<Point3>)> {
    let raw = io::load_point_cloud(train)?;
    let (points, norm) = training_frame(&raw)?;
    Ok((points, norm, io::load_point_cloud(test)?))
}

/// One model per entry of `k_list`; a failing K gives an error row.
pub fn cmd_ablate_k(
    train: &Path,
    test: &Path,
    k_list: &[usize],
    cfg: &RunConfig,
    out_csv: &Path,
) -> Result<Vec<AblationRow>> {
    if k_list.is_empty() {
        return Err(CliError::Usage("empty K list".into()));
    }
    let (points, norm, test) = load_pair(train, test)?;
    let rows: Vec<AblationRow> = k_list
        .iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.k = k;
            let refs = c.reference_set(&points).map_err(CliError::from);
            run_experiment(k.to_string(), &points, norm, &test, refs, &c)
        })
        .collect();
    write_csv(out_csv, "k", &rows)?;
    Ok(rows)
}

/// One model per kernel, all sharing the same reference points.
pub fn cmd_ablate_kernel(
    train: &Path,
    test: &Path,
    kernels: &[KernelKind],
    cfg: &RunConfig,
    out_csv: &Path,
) -> Result<Vec<AblationRow>> {
    if kernels.is_empty() {
        return Err(CliError::Usage("empty kernel list".into()));
    }
    let (points, norm, test) = load_pair(train, test)?;
    let refs = cfg.reference_set(&points)?;
    let rows: Vec<AblationRow> = kernels
        .iter()
        .map(|&kind| {
            let mut c = cfg.clone();
            c.kernel = kind;
            // overrides belong to the configured kernel and may not apply here
            if kind != cfg.kernel {
                c.hyperparameters.clear();
            }
            run_experiment(kind.to_string(), &points, norm, &test, Ok(refs.clone()), &c)
        })
        .collect();
    write_csv(out_csv, "kernel", &rows)?;
    Ok(rows)
}

fn describe_kernel(k: &Kernel) -> String {
    let params: Vec<String> = k.params().iter().map(|(n, v)| format!("{n}={v:.6}")).collect();
    format!("{} ({}) {}", k.kind(), k.mode(), params.join(" "))
}

/// Human-readable model summary.
pub fn cmd_inspect(model_path: &Path) -> Result<String> {
    let model = io::load_model(model_path)?;
    let norm = model.normalization();
    let meta = model.meta();
    let mut out = String::new();
    out += &format!("K = {}\n", model.num_clusters());
    out += &format!("reference source: {}\n", model.refs().source().name());
    out += &format!("kernel template: {}\n", describe_kernel(model.kernel_template()));
    out += &format!(
        "normalization: center ({}, {}, {}) scale {}\n",
        norm.center.x, norm.center.y, norm.center.z, norm.scale
    );
    out += &format!(
        "training: {} points, overlap {}, seed {}\n",
        meta.n_points, meta.overlap_fraction, meta.seed
    );
    for (k, gp) in model.regressors().iter().enumerate() {
        let c = model.refs().centers()[k];
        out += &format!(
            "cluster {k}: center ({:.4}, {:.4}, {:.4}) samples {} mean {:.4} jitter {:e} lml {:.4} kernel {}\n",
            c.x,
            c.y,
            c.z,
            gp.training().len(),
            gp.training().target_mean(),
            gp.jitter(),
            gp.log_marginal_likelihood(),
            describe_kernel(gp.kernel())
        );
    }
    Ok(out)
}
