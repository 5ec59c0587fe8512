//! The shape model: one GP distance field per reference point, blended by
//! softmax weights, and reconstruction of a point cloud from it.

use std::f64::consts::PI;

use log::info;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    fibonacci_sphere, from_spherical, to_spherical, Normalization, Point3, SphericalDirection,
};
use crate::gp::{fit_with_report, FitReport, GpRegressor, OptimizerConfig, TrainingSet};
use crate::kernels::Kernel;
use crate::partition::{assign, expand_overlap, Partition, ReferenceSet, DEFAULT_OVERLAP_FRACTION};

/// Directions closer than this in both angles are merged.
const DIRECTION_DEDUP: f64 = 1e-9;
const VARIANCE_FLOOR: f64 = 1e-10;
/// Training points may exceed the unit sphere by this much.
const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub kernel: Kernel,
    pub optimizer: OptimizerConfig,
    pub overlap_fraction: f64,
    /// Start each fit with the median pairwise input distance as lengthscale.
    pub median_lengthscale: bool,
    /// Stored with the model; maps the unit-sphere frame back to input units.
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            kernel: Kernel::rational_quadratic(1.0, 1.0),
            optimizer: OptimizerConfig::default(),
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
            median_lengthscale: true,
            normalization: Normalization::IDENTITY,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub n_points: usize,
    pub overlap_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ShapeModel {
    refs: ReferenceSet,
    regressors: Vec<GpRegressor>,
    normalization: Normalization,
    kernel_template: Kernel,
    meta: TrainingMeta,
}

impl ShapeModel {
    pub fn from_parts(
        refs: ReferenceSet,
        regressors: Vec<GpRegressor>,
        normalization: Normalization,
        kernel_template: Kernel,
        meta: TrainingMeta,
    ) -> Result<Self> {
        if regressors.len() != refs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} reference points but {} regressors",
                refs.len(),
                regressors.len()
            )));
        }
        if !(normalization.scale > 0.0) || !normalization.scale.is_finite() {
            return Err(Error::InvalidArgument("normalization scale must be positive".into()));
        }
        Ok(ShapeModel {
            refs,
            regressors,
            normalization,
            kernel_template,
            meta,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.refs.len()
    }

    pub fn refs(&self) -> &ReferenceSet {
        &self.refs
    }

    pub fn regressors(&self) -> &[GpRegressor] {
        &self.regressors
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn kernel_template(&self) -> &Kernel {
        &self.kernel_template
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Training-set size per cluster.
    pub fn member_counts(&self) -> Vec<usize> {
        self.regressors.iter().map(|g| g.training().len()).collect()
    }

    pub fn total_lml(&self) -> f64 {
        self.regressors.iter().map(|g| g.log_marginal_likelihood()).sum()
    }
}

/// Training set for one reference point. Repeated directions keep the
/// smallest distance, as only the first surface crossing is visible.
pub fn directional_training_set(points: &[Point3], center: Point3) -> Result<TrainingSet> {
    let mut samples: Vec<(SphericalDirection, f64)> = points
        .iter()
        .filter_map(|&p| to_spherical(p, center).ok())
        .map(|s| (s.direction, s.distance))
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyInput("directional samples"));
    }
    samples.sort_by(|a, b| {
        a.0.phi
            .total_cmp(&b.0.phi)
            .then(a.0.theta.total_cmp(&b.0.theta))
            .then(a.1.total_cmp(&b.1))
    });
    let mut kept: Vec<(SphericalDirection, f64)> = Vec::with_capacity(samples.len());
    for s in samples {
        let dup = kept.iter().rev().take_while(|k| s.0.phi - k.0.phi <= DIRECTION_DEDUP).any(|k| {
            (s.0.theta - k.0.theta).abs() <= DIRECTION_DEDUP
        });
        if !dup {
            kept.push(s);
        }
    }
    let (inputs, targets) = kept.into_iter().unzip();
    TrainingSet::new(inputs, targets)
}

/// Per-cluster training point indices for `points` under `refs`.
pub fn partition_for_training(
    points: &[Point3],
    refs: &ReferenceSet,
    overlap_fraction: f64,
) -> Result<Partition> {
    let primary = assign(points, refs);
    expand_overlap(&primary, points, refs, overlap_fraction)
}

pub fn train(points: &[Point3], refs: &ReferenceSet, opts: &TrainOptions) -> Result<ShapeModel> {
    train_with_reports(points, refs, opts).map(|(m, _)| m)
}

/// Trains one regressor per cluster, in parallel across clusters.
pub fn train_with_reports(
    points: &[Point3],
    refs: &ReferenceSet,
    opts: &TrainOptions,
) -> Result<(ShapeModel, Vec<FitReport>)> {
    if points.is_empty() {
        return Err(Error::EmptyInput("training points"));
    }
    if let Some(p) = points.iter().find(|p| !(p.norm() <= 1.0 + NORM_SLACK)) {
        return Err(Error::InvalidArgument(format!(
            "training points must be normalized to the unit sphere, found norm {}",
            p.norm()
        )));
    }
    opts.optimizer.validate()?;
    let partition = partition_for_training(points, refs, opts.overlap_fraction)?;
    if let Some(k) = partition.primary_counts().iter().position(|&m| m == 0) {
        return Err(Error::EmptyCluster { cluster: k });
    }
    let fits: Vec<Result<(GpRegressor, FitReport)>> = partition
        .overlap_members()
        .par_iter()
        .enumerate()
        .map(|(k, members)| {
            let pts: Vec<Point3> = members.iter().map(|&i| points[i]).collect();
            let center = refs.centers()[k];
            let training = directional_training_set(&pts, center)
                .map_err(|_| Error::EmptyCluster { cluster: k })?;
            let mut kernel = opts.kernel.clone();
            if opts.median_lengthscale {
                kernel.init_lengthscale_median(training.inputs());
            }
            let (gp, report) = fit_with_report(training, kernel, &opts.optimizer)?;
            info!(
                "cluster {k}: {} samples, lml {:.3}, {} iterations, jitter {:e}",
                gp.training().len(),
                report.final_lml,
                report.iterations,
                report.jitter
            );
            Ok((gp, report))
        })
        .collect();
    let mut regressors = Vec::with_capacity(refs.len());
    let mut reports = Vec::with_capacity(refs.len());
    for f in fits {
        let (g, r) = f?;
        regressors.push(g);
        reports.push(r);
    }
    let model = ShapeModel::from_parts(
        refs.clone(),
        regressors,
        opts.normalization,
        opts.kernel.clone(),
        TrainingMeta {
            n_points: points.len(),
            overlap_fraction: opts.overlap_fraction,
            seed: opts.seed,
        },
    )?;
    Ok((model, reports))
}

/// Softmax weight of each reference point at `p`.
pub fn mixture_weights(p: Point3, refs: &ReferenceSet) -> Vec<f64> {
    refs.weights(p)
}

fn gaussian_density(x: f64, mean: f64, variance: f64) -> f64 {
    let v = variance.max(VARIANCE_FLOOR);
    (-(x - mean) * (x - mean) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// Mixture density of the distance of `p` from each center under that
/// center's GP. Components whose center coincides with `p` are dropped and
/// the remaining weights renormalized; the result is 0 if none remain.
pub fn point_likelihood(p: Point3, model: &ShapeModel) -> f64 {
    let w = model.refs.weights(p);
    let mut total = 0.0;
    let mut weight = 0.0;
    for (k, gp) in model.regressors.iter().enumerate() {
        let Ok(s) = to_spherical(p, model.refs.centers()[k]) else {
            continue;
        };
        let pred = gp.predict(s.direction);
        total += w[k] * gaussian_density(s.distance, pred.mean, pred.variance);
        weight += w[k];
    }
    if weight > 0.0 {
        total / weight
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructedCloud {
    pub points: Vec<Point3>,
    pub variances: Vec<f64>,
    pub source_cluster: Vec<usize>,
}

impl ReconstructedCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Same number of queries for every cluster.
pub fn reconstruct(model: &ShapeModel, queries_per_cluster: usize) -> Result<ReconstructedCloud> {
    reconstruct_with_budget(model, &vec![queries_per_cluster; model.num_clusters()])
}

/// Splits `total` queries evenly over clusters (the remainder goes to the
/// first clusters).
pub fn uniform_budget(model: &ShapeModel, total: usize) -> Vec<usize> {
    let k = model.num_clusters();
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

/// Splits `total` queries in proportion to each cluster's training-set size.
pub fn proportional_budget(model: &ShapeModel, total: usize) -> Vec<usize> {
    let counts = model.member_counts();
    let sum: usize = counts.iter().sum();
    let mut budget: Vec<usize> = counts.iter().map(|&c| c * total / sum).collect();
    let mut rest = total - budget.iter().sum::<usize>();
    for b in budget.iter_mut() {
        if rest == 0 {
            break;
        }
        *b += 1;
        rest -= 1;
    }
    budget
}

/// Queries each cluster's GP on a Fibonacci grid of directions and keeps a
/// candidate only if its own center is the highest-weight center there.
/// Candidates with a non-positive predicted distance are dropped.
pub fn reconstruct_with_budget(model: &ShapeModel, budget: &[usize]) -> Result<ReconstructedCloud> {
    if budget.len() != model.num_clusters() {
        return Err(Error::InvalidArgument(format!(
            "query budget has {} entries for {} clusters",
            budget.len(),
            model.num_clusters()
        )));
    }
    let parts: Vec<Result<ReconstructedCloud>> = (0..model.num_clusters())
        .into_par_iter()
        .map(|k| {
            let mut out = ReconstructedCloud::default();
            if budget[k] == 0 {
                return Ok(out);
            }
            let dirs: Vec<SphericalDirection> =
                fibonacci_sphere(budget[k])?.into_iter().map(|u| u.direction()).collect();
            let center = model.refs.centers()[k];
            let preds = model.regressors[k].predict_batch(&dirs);
            for (d, pred) in dirs.iter().zip(preds) {
                if !(pred.mean > 0.0) {
                    continue;
                }
                let p = from_spherical(*d, pred.mean, center);
                if model.refs.nearest(p) == k {
                    out.points.push(p);
                    out.variances.push(pred.variance);
                    out.source_cluster.push(k);
                }
            }
            Ok(out)
        })
        .collect();
    let mut cloud = ReconstructedCloud::default();
    for part in parts {
        let part = part?;
        cloud.points.extend(part.points);
        cloud.variances.extend(part.variances);
        cloud.source_cluster.extend(part.source_cluster);
    }
    Ok(cloud)
}

/// Maps a reconstruction back to the original model frame. Variances are
/// scaled by `scale^2`.
pub fn de_normalize(cloud: &ReconstructedCloud, model: &ShapeModel) -> ReconstructedCloud {
    let n = model.normalization;
    ReconstructedCloud {
        points: cloud.points.iter().map(|&p| n.invert(p)).collect(),
        variances: cloud.variances.iter().map(|v| v * n.scale * n.scale).collect(),
        source_cluster: cloud.source_cluster.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVector;
    use crate::partition::ReferenceSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_cloud(n: usize) -> Vec<Point3> {
        fibonacci_sphere(n).unwrap().into_iter().map(UnitVector::as_point).collect()
    }

    fn quick_opts() -> TrainOptions {
        TrainOptions {
            optimizer: OptimizerConfig {
                max_iters: 40,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn weights_hand_example() {
        let refs =
            ReferenceSet::manual(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)])
                .unwrap();
        let w = mixture_weights(Point3::ORIGIN, &refs);
        let (a, b) = ((-1.0f64).exp(), (-4.0f64).exp());
        assert!((w[0] - a / (a + b)).abs() < 1e-15);
        assert!((w[0] - 0.9526).abs() < 1e-4);
        assert!((w[1] - 0.0474).abs() < 1e-4);
        let eq = mixture_weights(Point3::new(1.5, 3.0, 0.0), &refs);
        assert_eq!(eq[0], eq[1]);
        assert_eq!(eq[0], 0.5);
    }

    #[test]
    fn weights_survive_far_points() {
        let refs = ReferenceSet::manual(vec![Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let w = mixture_weights(Point3::new(1e4, 0.0, 0.0), &refs);
        assert!(w.iter().all(|x| x.is_finite()));
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn dedup_keeps_nearest_hit() {
        let c = Point3::ORIGIN;
        let pts = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 0.0, 0.5),
            Point3::new(1.0, 0.0, 0.0),
            c,
        ];
        let t = directional_training_set(&pts, c).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.targets()[0], 0.5);
        assert_eq!(t.targets()[1], 1.0);
    }

    #[test]
    fn sphere_model_recovers_unit_radius() {
        let pts = sphere_cloud(300);
        let refs = ReferenceSet::manual(vec![Point3::ORIGIN]).unwrap();
        let model = train(&pts, &refs, &quick_opts()).unwrap();
        for t in model.regressors()[0].training().targets() {
            assert!((t - 1.0).abs() < 1e-12);
        }
        let cloud = reconstruct(&model, 1000).unwrap();
        assert_eq!(cloud.len(), 1000);
        for p in &cloud.points {
            assert!((p.norm() - 1.0).abs() < 0.01);
        }
        let on = point_likelihood(Point3::new(0.0, 0.6, 0.8), &model);
        let off = point_likelihood(Point3::new(0.0, 0.0, 0.5), &model);
        assert!(on >= 100.0 * off, "{on} vs {off}");
        assert_eq!(point_likelihood(Point3::ORIGIN, &model), 0.0);
    }

    #[test]
    fn single_component_likelihood_is_gaussian() {
        let pts = sphere_cloud(100);
        let refs = ReferenceSet::manual(vec![Point3::new(0.1, 0.0, 0.0)]).unwrap();
        let model = train(&pts, &refs, &quick_opts()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let s = to_spherical(p, refs.centers()[0]).unwrap();
            let pred = model.regressors()[0].predict(s.direction);
            let want = gaussian_density(s.distance, pred.mean, pred.variance);
            let got = point_likelihood(p, &model);
            assert!((got - want).abs() <= 1e-12 * want.max(1.0));
            assert!(got.is_finite() && got >= 0.0);
        }
    }

    #[test]
    fn reconstruction_obeys_construction_identity() {
        let pts = sphere_cloud(400);
        let refs = ReferenceSet::manual(vec![
            Point3::new(0.0, 0.0, 0.3),
            Point3::new(0.0, 0.0, -0.3),
        ])
        .unwrap();
        let model = train(&pts, &refs, &quick_opts()).unwrap();
        let cloud = reconstruct(&model, 300).unwrap();
        let dirs: Vec<SphericalDirection> =
            fibonacci_sphere(300).unwrap().into_iter().map(|u| u.direction()).collect();
        for k in 0..2 {
            let c = refs.centers()[k];
            let expected: Vec<(Point3, f64)> = model.regressors()[k]
                .predict_batch(&dirs)
                .iter()
                .zip(&dirs)
                .map(|(pred, d)| (from_spherical(*d, pred.mean, c), pred.mean))
                .filter(|(p, _)| refs.nearest(*p) == k)
                .collect();
            let got: Vec<Point3> = cloud
                .points
                .iter()
                .zip(&cloud.source_cluster)
                .filter(|(_, &s)| s == k)
                .map(|(p, _)| *p)
                .collect();
            assert_eq!(got.len(), expected.len());
            for (p, (q, mu)) in got.iter().zip(&expected) {
                assert_eq!(p, q);
                assert!((p.distance(c) - mu).abs() < 1e-12);
            }
        }
        assert_eq!(cloud, reconstruct(&model, 300).unwrap());
        assert!(reconstruct(&model, 1).unwrap().len() <= 2);
    }

    #[test]
    fn empty_cluster_is_named() {
        let pts = sphere_cloud(50);
        let refs = ReferenceSet::manual(vec![Point3::ORIGIN, Point3::new(50.0, 0.0, 0.0)]).unwrap();
        let err = train(&pts, &refs, &quick_opts()).unwrap_err();
        assert!(matches!(err, Error::EmptyCluster { cluster: 1 }));
    }

    #[test]
    fn unnormalized_points_are_rejected() {
        let pts = vec![Point3::new(2.0, 0.0, 0.0)];
        let refs = ReferenceSet::manual(vec![Point3::ORIGIN]).unwrap();
        assert!(train(&pts, &refs, &quick_opts()).is_err());
    }

    #[test]
    fn de_normalize_inverts() {
        let refs = ReferenceSet::with_identity(vec![Point3::ORIGIN], ReferenceSource::Manual).unwrap();
        let pts = sphere_cloud(20);
        let mut opts = quick_opts();
        opts.normalization = Normalization {
            center: Point3::new(1.0, 0.0, 0.0),
            scale: 2.0,
        };
        opts.optimizer.max_iters = 2;
        let model = train(&pts, &refs, &opts).unwrap();
        let cloud = ReconstructedCloud {
            points: vec![Point3::new(0.0, 0.0, 1.0)],
            variances: vec![1.0],
            source_cluster: vec![0],
        };
        let out = de_normalize(&cloud, &model);
        assert_eq!(out.points[0], Point3::new(1.0, 0.0, 2.0));
        assert_eq!(out.variances[0], 4.0);
    }

    #[test]
    fn budgets_sum_to_total() {
        let pts = sphere_cloud(60);
        let refs = ReferenceSet::manual(vec![
            Point3::new(0.0, 0.0, 0.5),
            Point3::new(0.0, 0.0, -0.2),
            Point3::new(0.3, 0.0, 0.0),
        ])
        .unwrap();
        let mut opts = quick_opts();
        opts.optimizer.max_iters = 2;
        let model = train(&pts, &refs, &opts).unwrap();
        assert_eq!(uniform_budget(&model, 100), vec![34, 33, 33]);
        assert_eq!(proportional_budget(&model, 100).iter().sum::<usize>(), 100);
    }
}
