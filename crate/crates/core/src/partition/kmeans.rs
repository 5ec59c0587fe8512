//! Lloyd's algorithm with k-means++ seeding.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ReferenceSet, ReferenceSource};
use crate::error::{Error, Result};
use crate::geometry::Point3;

const MAX_ITERS: usize = 300;
const TOLERANCE: f64 = 1e-6;

/// k-means centers with identity weight matrices.
pub fn kmeans(points: &[Point3], k: usize, seed: u64) -> Result<ReferenceSet> {
    kmeans_with_trace(points, k, seed).map(|(r, _)| r)
}

/// Also returns the inertia after each assignment step.
pub fn kmeans_with_trace(points: &[Point3], k: usize, seed: u64) -> Result<(ReferenceSet, Vec<f64>)> {
    let (centers, trace) = lloyd(points, k, seed)?;
    Ok((ReferenceSet::with_identity(centers, ReferenceSource::KMeans)?, trace))
}

pub(super) fn lloyd(points: &[Point3], k: usize, seed: u64) -> Result<(Vec<Point3>, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("number of clusters must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut trace = Vec::new();
    for iter in 0..MAX_ITERS {
        let mut inertia = 0.0;
        for (l, &p) in labels.iter_mut().zip(points) {
            let (best, d) = nearest(&centers, p);
            *l = best;
            inertia += d;
        }
        trace.push(inertia);

        let mut sums = vec![Point3::ORIGIN; k];
        let mut counts = vec![0usize; k];
        for (&l, &p) in labels.iter().zip(points) {
            sums[l] = sums[l] + p;
            counts[l] += 1;
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c] / counts[c] as f64
            } else {
                let far = farthest_point(points, &labels, &centers);
                debug!("k-means: cluster {c} emptied, reseeding at point {far}");
                labels[far] = c;
                points[far]
            };
            moved = moved.max(next.distance(centers[c]));
            centers[c] = next;
        }
        if moved < TOLERANCE {
            debug!("k-means converged after {} iterations", iter + 1);
            break;
        }
    }
    Ok((centers, trace))
}

fn nearest(centers: &[Point3], p: Point3) -> (usize, f64) {
    let mut best = (0, p.distance_squared(centers[0]));
    for (i, c) in centers.iter().enumerate().skip(1) {
        let d = p.distance_squared(*c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn farthest_point(points: &[Point3], labels: &[usize], centers: &[Point3]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (&p, &l)) in points.iter().zip(labels).enumerate() {
        let d = p.distance_squared(centers[l]);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn seed_plus_plus(points: &[Point3], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_squared(centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // rounding can leave the target past the last positive entry
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance_squared(c));
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, n: usize, centers: &[Point3], sd: f64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sd).unwrap();
        (0..n)
            .map(|i| {
                let c = centers[i % centers.len()];
                c + Point3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                )
            })
            .collect()
    }

    #[test]
    fn single_cluster_is_centroid() {
        let pts = blobs(1, 300, &[Point3::new(1.0, 2.0, 3.0)], 1.0);
        let refs = kmeans(&pts, 1, 0).unwrap();
        let mut sum = Point3::ORIGIN;
        for p in &pts {
            sum = sum + *p;
        }
        let centroid = sum / pts.len() as f64;
        assert!(refs.centers()[0].distance(centroid) < 1e-12);
    }

    #[test]
    fn separates_two_blobs() {
        let truth = [Point3::new(-10.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0)];
        let pts = blobs(2, 400, &truth, 1.0);
        let refs = kmeans(&pts, 2, 7).unwrap();
        for t in truth {
            assert!(refs.centers().iter().any(|c| c.distance(t) < 0.5));
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let pts = blobs(3, 12, &[Point3::ORIGIN], 1.0);
        let (refs, trace) = kmeans_with_trace(&pts, 12, 1).unwrap();
        assert_eq!(*trace.last().unwrap(), 0.0);
        for p in &pts {
            assert!(refs.centers().contains(p));
        }
    }

    #[test]
    fn inertia_never_increases() {
        let pts = blobs(4, 1000, &[Point3::ORIGIN, Point3::new(2.0, 1.0, 0.0)], 1.0);
        for seed in 0..5 {
            let (_, trace) = kmeans_with_trace(&pts, 6, seed).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let pts = blobs(5, 500, &[Point3::ORIGIN], 1.0);
        assert_eq!(kmeans(&pts, 5, 9).unwrap(), kmeans(&pts, 5, 9).unwrap());
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point3::ORIGIN; 3];
        assert!(kmeans(&pts, 4, 0).is_err());
        assert!(kmeans(&pts, 0, 0).is_err());
        // duplicates still give k centers
        assert_eq!(kmeans(&pts, 3, 0).unwrap().len(), 3);
    }
}
