//! Reconstruction quality metrics: Chamfer distance and precision, recall
//! and F-score at a distance threshold.

mod kdtree;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub use kdtree::KdTree;

/// Evaluation threshold for unit-sphere normalized shapes.
pub const DEFAULT_TAU: f64 = 0.01;

/// Squared distance from every point of `from` to its nearest point in `to`.
pub fn nearest_distances_squared(from: &[Point3], to: &[Point3]) -> Vec<f64> {
    let tree = KdTree::new(to);
    from.par_iter()
        .map(|&p| tree.nearest_distance_squared(p).unwrap_or(f64::INFINITY))
        .collect()
}

fn check(gt: &[Point3], est: &[Point3]) -> Result<()> {
    if gt.is_empty() {
        return Err(Error::EmptyInput("ground-truth point set"));
    }
    if est.is_empty() {
        return Err(Error::EmptyInput("estimated point set"));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fraction_within(d2: &[f64], tau: f64) -> f64 {
    d2.iter().filter(|d| d.sqrt() < tau).count() as f64 / d2.len() as f64
}

/// Mean squared nearest-neighbour distance from `gt` to `est` plus the same
/// from `est` to `gt`.
pub fn chamfer(gt: &[Point3], est: &[Point3]) -> Result<f64> {
    check(gt, est)?;
    Ok(mean(&nearest_distances_squared(gt, est)) + mean(&nearest_distances_squared(est, gt)))
}

/// Fraction of `est` points strictly closer than `tau` to `gt`.
pub fn precision(gt: &[Point3], est: &[Point3], tau: f64) -> Result<f64> {
    check(gt, est)?;
    check_tau(tau)?;
    Ok(fraction_within(&nearest_distances_squared(est, gt), tau))
}

/// Fraction of `gt` points strictly closer than `tau` to `est`.
pub fn recall(gt: &[Point3], est: &[Point3], tau: f64) -> Result<f64> {
    check(gt, est)?;
    check_tau(tau)?;
    Ok(fraction_within(&nearest_distances_squared(gt, est), tau))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn fscore(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Distance from each ground-truth point to the nearest estimated point.
pub fn error_heatmap(gt: &[Point3], est: &[Point3]) -> Result<Vec<f64>> {
    check(gt, est)?;
    Ok(nearest_distances_squared(gt, est)
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub chamfer: f64,
    pub chamfer_x1e3: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tau: f64,
    pub n_gt: usize,
    pub n_est: usize,
}

/// All metrics at once, sharing the two nearest-neighbour passes.
pub fn evaluate(gt: &[Point3], est: &[Point3], tau: f64) -> Result<MetricsReport> {
    check(gt, est)?;
    check_tau(tau)?;
    let gt_to_est = nearest_distances_squared(gt, est);
    let est_to_gt = nearest_distances_squared(est, gt);
    let chamfer = mean(&gt_to_est) + mean(&est_to_gt);
    let precision = fraction_within(&est_to_gt, tau);
    let recall = fraction_within(&gt_to_est, tau);
    Ok(MetricsReport {
        chamfer,
        chamfer_x1e3: chamfer * 1e3,
        precision,
        recall,
        fscore: fscore(precision, recall),
        tau,
        n_gt: gt.len(),
        n_est: est.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn brute_nn(from: &[Point3], to: &[Point3]) -> Vec<f64> {
        from.iter()
            .map(|p| to.iter().map(|q| p.distance_squared(*q)).fold(f64::INFINITY, f64::min))
            .collect()
    }

    #[test]
    fn hand_cases() {
        let o = [Point3::ORIGIN];
        let x = [Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer(&o, &x).unwrap(), 2.0);
        let est = [Point3::new(0.005, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(precision(&o, &est, 0.01).unwrap(), 0.5);
        assert_eq!(recall(&o, &est, 0.01).unwrap(), 1.0);
        assert_eq!(fscore(1.0, 1.0), 1.0);
        assert_eq!(fscore(1.0, 0.0), 0.0);
        assert_eq!(fscore(0.0, 0.0), 0.0);
        assert!((fscore(0.9, 0.6) - 0.72).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_strict() {
        let o = [Point3::ORIGIN];
        let est = [Point3::new(0.5, 0.0, 0.0)];
        assert_eq!(precision(&o, &est, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn identical_and_disjoint_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cloud(&mut rng, 300);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(precision(&a, &a[..100], 0.01).unwrap(), 1.0);
        assert_eq!(recall(&a[..100], &a, 0.01).unwrap(), 1.0);
        assert!(error_heatmap(&a, &a).unwrap().iter().all(|&e| e == 0.0));
        let far: Vec<Point3> = a.iter().map(|&p| p + Point3::new(10.0, 0.0, 0.0)).collect();
        assert_eq!(recall(&a, &far, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let n = rng.random_range(1..600);
            let m = rng.random_range(1..600);
            let gt = cloud(&mut rng, n);
            let est = cloud(&mut rng, m);
            let g2e = brute_nn(&gt, &est);
            let e2g = brute_nn(&est, &gt);
            assert_eq!(nearest_distances_squared(&gt, &est), g2e);
            let want = mean(&g2e) + mean(&e2g);
            assert_eq!(chamfer(&gt, &est).unwrap(), want);
            assert_eq!(chamfer(&est, &gt).unwrap(), mean(&e2g) + mean(&g2e));
            let r = evaluate(&gt, &est, 0.05).unwrap();
            assert_eq!(r.chamfer, want);
            assert_eq!(r.precision, fraction_within(&e2g, 0.05));
            assert_eq!(r.recall, fraction_within(&g2e, 0.05));
            assert_eq!(recall(&gt, &est, 0.05).unwrap(), precision(&est, &gt, 0.05).unwrap());
        }
    }

    #[test]
    fn heatmap_marks_single_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = cloud(&mut rng, 200);
        let mut est = gt.clone();
        let shift = Point3::new(0.0, 0.0, 1e-3);
        est[17] = est[17] + shift;
        let h = error_heatmap(&gt, &est).unwrap();
        let nonzero: Vec<usize> = (0..h.len()).filter(|&i| h[i] > 0.0).collect();
        assert_eq!(nonzero, vec![17]);
        assert!(h[17] <= 1e-3 + 1e-15);
        let d = nearest_distances_squared(&gt, &est);
        for (hi, di) in h.iter().zip(&d) {
            assert_eq!(*hi, di.sqrt());
        }
    }

    #[test]
    fn empty_inputs_are_errors() {
        let a = [Point3::ORIGIN];
        assert!(chamfer(&a, &[]).is_err());
        assert!(precision(&[], &a, 0.1).is_err());
        assert!(recall(&a, &a, 0.0).is_err());
        assert!(error_heatmap(&[], &a).is_err());
    }
}
