//! Run configuration: a flat `key = value` file. Command-line flags are
//! applied afterwards through [`RunConfig::set`], so they win.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::gp::OptimizerConfig;
use crate::kernels::{DistanceMode, Kernel, KernelKind};
use crate::metrics::DEFAULT_TAU;
use crate::mixture::TrainOptions;
use crate::partition::{self, ReferenceSet, DEFAULT_OVERLAP_FRACTION};

use super::cloud::load_xyz;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clustering {
    KMeans,
    Em,
    /// Centers read from an XYZ file.
    Manual(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryBudget {
    #[default]
    Uniform,
    /// In proportion to each cluster's training-set size.
    Proportional,
}

impl FromStr for QueryBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "even" => Ok(QueryBudget::Uniform),
            "proportional" => Ok(QueryBudget::Proportional),
            other => Err(Error::InvalidArgument(format!("unknown budget '{other}'"))),
        }
    }
}

impl fmt::Display for QueryBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryBudget::Uniform => "uniform",
            QueryBudget::Proportional => "proportional",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelKind,
    pub distance_mode: DistanceMode,
    /// Explicit hyperparameter values in natural scale. Any override turns off
    /// the median-distance lengthscale initialization.
    pub hyperparameters: Vec<(String, f64)>,
    pub k: usize,
    pub clustering: Clustering,
    pub overlap_fraction: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub train_size: usize,
    pub test_size: usize,
    /// Total reconstruction queries over all clusters.
    pub queries: usize,
    pub budget: QueryBudget,
    pub tau: f64,
    pub cameras: usize,
    pub rays_per_camera: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelKind::RationalQuadratic,
            distance_mode: DistanceMode::ParamEuclidean,
            hyperparameters: Vec::new(),
            k: 8,
            clustering: Clustering::KMeans,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            train_size: 10_000,
            test_size: 30_000,
            queries: 30_000,
            budget: QueryBudget::Uniform,
            tau: DEFAULT_TAU,
            cameras: 64,
            rays_per_camera: 4096,
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: invalid value '{value}'")))
}

fn positive(key: &str, value: &str) -> Result<usize> {
    let n: usize = number(key, value)?;
    if n == 0 {
        return Err(Error::InvalidArgument(format!("{key} must be positive")));
    }
    Ok(n)
}

impl RunConfig {
    /// Reads a config file. A relative `centers` path is taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        let base = path.parent().unwrap_or(Path::new(""));
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let value = if key == "centers" && Path::new(value).is_relative() {
                base.join(value).to_string_lossy().into_owned()
            } else {
                value.to_string()
            };
            cfg.set(key, &value)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let opt = &mut self.optimizer;
        match key {
            "kernel" => self.kernel = value.parse()?,
            "distance_mode" => self.distance_mode = value.parse()?,
            "lengthscale" | "alpha" | "period" | "variance" | "offset" => {
                let v: f64 = number(key, value)?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("{key} must be positive")));
                }
                self.hyperparameters.retain(|(k, _)| k != key);
                self.hyperparameters.push((key.to_string(), v));
            }
            "k" => self.k = positive(key, value)?,
            "clustering" => {
                self.clustering = match value.to_ascii_lowercase().as_str() {
                    "kmeans" | "k-means" => Clustering::KMeans,
                    "em" | "gmm" => Clustering::Em,
                    "manual" => match &self.clustering {
                        Clustering::Manual(p) => Clustering::Manual(p.clone()),
                        _ => Clustering::Manual(PathBuf::new()),
                    },
                    other => {
                        return Err(Error::InvalidArgument(format!("unknown clustering '{other}'")))
                    }
                }
            }
            "centers" => self.clustering = Clustering::Manual(PathBuf::from(value)),
            "overlap" | "overlap_fraction" => self.overlap_fraction = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "learning_rate" | "initial_lr" => opt.initial_lr = number(key, value)?,
            "plateau_patience" => opt.plateau_patience = number(key, value)?,
            "lr_decay" => opt.lr_decay = number(key, value)?,
            "max_iters" => opt.max_iters = number(key, value)?,
            "min_lr" => opt.min_lr = number(key, value)?,
            "adam_beta1" => opt.adam_beta1 = number(key, value)?,
            "adam_beta2" => opt.adam_beta2 = number(key, value)?,
            "adam_eps" => opt.adam_eps = number(key, value)?,
            "train_size" => self.train_size = positive(key, value)?,
            "test_size" => self.test_size = positive(key, value)?,
            "queries" => self.queries = positive(key, value)?,
            "budget" => self.budget = value.parse()?,
            "tau" => self.tau = number(key, value)?,
            "cameras" => self.cameras = positive(key, value)?,
            "rays" | "rays_per_camera" => self.rays_per_camera = positive(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidArgument("overlap fraction must lie in [0, 1)".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        self.kernel()?;
        if let Clustering::Manual(p) = &self.clustering {
            if p.as_os_str().is_empty() {
                return Err(Error::InvalidArgument("manual clustering needs a centers file".into()));
            }
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "centers file not found"),
                ));
            }
        }
        Ok(())
    }

    /// Initial kernel with the configured overrides applied.
    pub fn kernel(&self) -> Result<Kernel> {
        let mut kernel = Kernel::new(self.kernel, self.distance_mode);
        for (name, v) in &self.hyperparameters {
            kernel.set_param(name, *v)?;
        }
        Ok(kernel)
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            kernel: self.kernel()?,
            optimizer: self.optimizer,
            overlap_fraction: self.overlap_fraction,
            median_lengthscale: self.hyperparameters.is_empty(),
            seed: self.seed,
            ..TrainOptions::default()
        })
    }

    /// Places the reference points for `points` (already normalized).
    pub fn reference_set(&self, points: &[Point3]) -> Result<ReferenceSet> {
        match &self.clustering {
            Clustering::KMeans => partition::kmeans(points, self.k, self.seed),
            Clustering::Em => partition::em_gmm(points, self.k, self.seed),
            Clustering::Manual(path) => ReferenceSet::manual(load_xyz(path)?),
        }
    }
}
