//! Binary model container. All numbers are little-endian; floats are stored
//! as raw f64 bits so training data survives exactly.
//!
//! ```text
//! magic "GPSHAPE\0", u32 version
//! normalization: center (3 f64), scale (f64)
//! reference source (u8), template kernel, n_points (u64), overlap (f64), seed (u64)
//! K (u32), then per cluster:
//!   center (3 f64), weight matrix (9 f64 row-major), kernel, jitter (f64),
//!   target mean (f64), M (u64), M (phi, theta) pairs, M targets
//! kernel: kind (u8), fixed param (f64), distance mode (u8), n (u32), n log-params
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Normalization, Point3, SphericalDirection};
use crate::gp::{GpRegressor, TrainingSet};
use crate::kernels::{DistanceMode, Kernel, KernelKind};
use crate::mixture::{ShapeModel, TrainingMeta};
use crate::partition::{ReferenceSet, ReferenceSource};

pub const MAGIC: &[u8; 8] = b"GPSHAPE\0";
pub const FORMAT_VERSION: u32 = 1;

// Upper bound on counts read from a file, so a corrupt header cannot request
// an absurd allocation.
const MAX_COUNT: u64 = 1 << 32;

pub fn save_model(path: impl AsRef<Path>, model: &ShapeModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ShapeModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

pub fn encode_model(model: &ShapeModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    let norm = model.normalization();
    w.point(norm.center);
    w.f64(norm.scale);
    w.u8(model.refs().source().tag());
    w.kernel(model.kernel_template());
    let meta = model.meta();
    w.u64(meta.n_points as u64);
    w.f64(meta.overlap_fraction);
    w.u64(meta.seed);
    w.u32(model.num_clusters() as u32);
    let refs = model.refs();
    for (k, gp) in model.regressors().iter().enumerate() {
        w.point(refs.centers()[k]);
        let q = &refs.weight_matrices()[k];
        for r in 0..3 {
            for c in 0..3 {
                w.f64(q[(r, c)]);
            }
        }
        w.kernel(gp.kernel());
        w.f64(gp.jitter());
        let training = gp.training();
        w.f64(training.target_mean());
        w.u64(training.len() as u64);
        for s in training.inputs() {
            w.f64(s.phi);
            w.f64(s.theta);
        }
        for &t in training.targets() {
            w.f64(t);
        }
    }
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Result<ShapeModel> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::ModelFormat("bad magic: not a gpshape model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let normalization = Normalization {
        center: r.point()?,
        scale: r.f64()?,
    };
    let source_tag = r.u8()?;
    let source = ReferenceSource::from_tag(source_tag)
        .ok_or_else(|| Error::ModelFormat(format!("unknown reference source tag {source_tag}")))?;
    let template = r.kernel()?;
    let meta = TrainingMeta {
        n_points: r.count()?,
        overlap_fraction: r.f64()?,
        seed: r.u64()?,
    };
    let k = r.u32()? as usize;
    if k == 0 {
        return Err(Error::ModelFormat("model has no clusters".into()));
    }
    let mut centers = Vec::new();
    let mut matrices = Vec::new();
    let mut regressors = Vec::new();
    for cluster in 0..k {
        centers.push(r.point()?);
        let mut q = Matrix3::zeros();
        for row in 0..3 {
            for col in 0..3 {
                q[(row, col)] = r.f64()?;
            }
        }
        matrices.push(q);
        let kernel = r.kernel()?;
        let jitter = r.f64()?;
        let mean = r.f64()?;
        let m = r.count()?;
        // each sample needs 24 bytes; reject before allocating
        if r.remaining() < m.saturating_mul(24) {
            return Err(truncated());
        }
        let mut inputs = Vec::with_capacity(m);
        for _ in 0..m {
            let phi = r.f64()?;
            let theta = r.f64()?;
            inputs.push(SphericalDirection::new(phi, theta));
        }
        let targets = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let training = TrainingSet::with_mean(inputs, targets, mean)
            .map_err(|e| Error::ModelFormat(format!("cluster {cluster}: {e}")))?;
        let gp = GpRegressor::new(kernel, training, jitter)
            .map_err(|e| Error::ModelFormat(format!("cluster {cluster}: {e}")))?;
        regressors.push(gp);
    }
    if r.remaining() != 0 {
        return Err(Error::ModelFormat(format!("{} trailing bytes", r.remaining())));
    }
    let refs = ReferenceSet::new(centers, matrices, source)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    ShapeModel::from_parts(refs, regressors, normalization, template, meta)
        .map_err(|e| Error::ModelFormat(e.to_string()))
}

fn truncated() -> Error {
    Error::ModelFormat("truncated file".into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn point(&mut self, p: Point3) {
        self.f64(p.x);
        self.f64(p.y);
        self.f64(p.z);
    }

    fn kernel(&mut self, k: &Kernel) {
        self.u8(k.kind().tag());
        self.f64(k.kind().fixed_param());
        self.u8(k.mode().tag());
        self.u32(k.num_params() as u32);
        for &p in k.log_params() {
            self.f64(p);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.remaining() < n {
            return Err(truncated());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_COUNT {
            return Err(Error::ModelFormat(format!("implausible count {n}")));
        }
        Ok(n as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn point(&mut self) -> Result<Point3> {
        Ok(Point3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn kernel(&mut self) -> Result<Kernel> {
        let tag = self.u8()?;
        let fixed = self.f64()?;
        let kind = KernelKind::from_tag(tag, fixed)
            .ok_or_else(|| Error::ModelFormat(format!("unknown kernel tag {tag} ({fixed})")))?;
        let mode_tag = self.u8()?;
        let mode = DistanceMode::from_tag(mode_tag)
            .ok_or_else(|| Error::ModelFormat(format!("unknown distance mode tag {mode_tag}")))?;
        let kernel = Kernel::new(kind, mode);
        let n = self.u32()? as usize;
        if n != kernel.num_params() {
            return Err(Error::ModelFormat(format!(
                "{kind} kernel has {} parameters, file has {n}",
                kernel.num_params()
            )));
        }
        let params = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::ModelFormat("non-finite kernel parameter".into()));
        }
        Ok(kernel.with_log_params(&params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fibonacci_sphere;
    use crate::gp::OptimizerConfig;
    use crate::mixture::{train, TrainOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_center_model() -> ShapeModel {
        let points: Vec<Point3> = fibonacci_sphere(300)
            .unwrap()
            .into_iter()
            .map(|u| u.as_point() * 0.8)
            .collect();
        let refs = ReferenceSet::manual(vec![
            Point3::new(-0.2, 0.0, 0.0),
            Point3::new(0.2, 0.0, 0.0),
            Point3::new(0.0, 0.3, 0.1),
        ])
        .unwrap();
        let opts = TrainOptions {
            optimizer: OptimizerConfig {
                max_iters: 5,
                ..OptimizerConfig::default()
            },
            normalization: Normalization {
                center: Point3::new(1.0, 2.0, 3.0),
                scale: 2.5,
            },
            seed: 7,
            ..TrainOptions::default()
        };
        train(&points, &refs, &opts).unwrap()
    }

    #[test]
    fn round_trip_predictions() {
        let model = two_center_model();
        let bytes = encode_model(&model);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back.num_clusters(), 3);
        assert_eq!(back.refs(), model.refs());
        assert_eq!(back.normalization(), model.normalization());
        assert_eq!(back.meta(), model.meta());
        assert_eq!(back.kernel_template(), model.kernel_template());
        assert_eq!(encode_model(&back), bytes);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = SphericalDirection::new(
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            for (a, b) in model.regressors().iter().zip(back.regressors()) {
                let (pa, pb) = (a.predict_unclamped(s), b.predict_unclamped(s));
                assert!((pa.mean - pb.mean).abs() <= 1e-12);
                assert!((pa.variance - pb.variance).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode_model(&two_center_model());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::ModelFormat(m)) if m.contains("magic")));

        let mut bad = bytes.clone();
        bad[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            decode_model(&bad),
            Err(Error::ModelVersion { found: 2, expected: 1 })
        ));

        for cut in [0, 5, 12, 60, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_model(&bytes[..cut]), Err(Error::ModelFormat(_))));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_model(&long), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.gpm");
        let model = two_center_model();
        save_model(&p, &model).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back.member_counts(), model.member_counts());
        assert!(matches!(load_model(dir.path().join("none.gpm")), Err(Error::Io { .. })));
    }
}
