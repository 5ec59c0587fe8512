//! File formats and data preparation helpers.

mod cloud;
mod config;
mod model;

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use cloud::{
    load_mesh, load_point_cloud, load_xyz, save_point_cloud, viridis, write_heatmap_ply, write_obj,
    write_ply, write_xyz, CloudFormat, PlyEncoding,
};
pub use config::{Clustering, QueryBudget, RunConfig};
pub use model::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};

use crate::error::{Error, Result};
use crate::geometry::{Normalization, Point3};

/// `n` points drawn uniformly without replacement.
pub fn subsample(points: &[Point3], n: usize, seed: u64) -> Result<Vec<Point3>> {
    Ok(split(points, n, 0, seed)?.0)
}

/// Two disjoint random subsets of sizes `n_train` and `n_test`.
pub fn split(
    points: &[Point3],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<Point3>, Vec<Point3>)> {
    let total = n_train
        .checked_add(n_test)
        .filter(|&t| t <= points.len())
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "cannot draw {n_train} + {n_test} points from {}",
                points.len()
            ))
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = index::sample(&mut rng, points.len(), total).into_vec();
    let pick = |r: &[usize]| r.iter().map(|&i| points[i]).collect();
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

pub fn save_normalization(path: impl AsRef<Path>, norm: &Normalization) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(norm).expect("normalization serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_normalization(path: impl AsRef<Path>) -> Result<Normalization> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Writes `value` as one line of JSON.
pub fn write_json_line<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize report: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
