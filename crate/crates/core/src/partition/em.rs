//! Gaussian mixture fitted by expectation maximization, full covariances.

use log::{debug, warn};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::kmeans::lloyd;
use super::{ReferenceSet, ReferenceSource};
use crate::error::{Error, Result};
use crate::geometry::Point3;

const MAX_ITERS: usize = 200;
const TOLERANCE: f64 = 1e-7;
/// Lower bound on covariance eigenvalues.
const VARIANCE_FLOOR: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub means: Vec<Point3>,
    pub covariances: Vec<Matrix3<f64>>,
    pub mixing: Vec<f64>,
    /// Total log-likelihood at each E-step.
    pub log_likelihood: Vec<f64>,
}

impl GmmFit {
    /// Component means as centers, with `Q_k = Sigma_k^-1 / 2`.
    pub fn reference_set(&self) -> Result<ReferenceSet> {
        let q = self
            .covariances
            .iter()
            .map(|s| {
                let inv = s.try_inverse().expect("floored covariance is invertible");
                let q = inv * 0.5;
                (q + q.transpose()) * 0.5
            })
            .collect();
        ReferenceSet::new(self.means.clone(), q, ReferenceSource::Em)
    }
}

pub fn em_gmm(points: &[Point3], k: usize, seed: u64) -> Result<ReferenceSet> {
    fit_gmm(points, k, seed)?.reference_set()
}

/// EM initialized from k-means with the same seed.
pub fn fit_gmm(points: &[Point3], k: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("number of clusters must be positive".into()));
    }
    if points.len() < 4 * k {
        return Err(Error::InvalidArgument(format!(
            "EM with {k} components needs at least {} points, got {}",
            4 * k,
            points.len()
        )));
    }
    let n = points.len();
    let (mut means, _) = lloyd(points, k, seed)?;
    let mut resp = vec![0.0; n * k];
    for (i, &p) in points.iter().enumerate() {
        let mut best = 0;
        for c in 1..k {
            if p.distance_squared(means[c]) < p.distance_squared(means[best]) {
                best = c;
            }
        }
        resp[i * k + best] = 1.0;
    }
    let mut covariances = vec![Matrix3::identity(); k];
    let mut mixing = vec![1.0 / k as f64; k];
    m_step(points, &resp, k, &mut means, &mut covariances, &mut mixing);

    let mut trace = Vec::new();
    for iter in 0..MAX_ITERS {
        let ll = e_step(points, &means, &covariances, &mixing, &mut resp);
        let done = trace.last().is_some_and(|&prev: &f64| ll - prev < TOLERANCE);
        trace.push(ll);
        if done {
            debug!("EM converged after {} iterations", iter + 1);
            break;
        }
        m_step(points, &resp, k, &mut means, &mut covariances, &mut mixing);
    }
    Ok(GmmFit {
        means,
        covariances,
        mixing,
        log_likelihood: trace,
    })
}

fn to_vec(p: Point3) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

/// Fills responsibilities and returns the total log-likelihood.
fn e_step(
    points: &[Point3],
    means: &[Point3],
    covariances: &[Matrix3<f64>],
    mixing: &[f64],
    resp: &mut [f64],
) -> f64 {
    let k = means.len();
    let comps: Vec<(Matrix3<f64>, f64)> = covariances
        .iter()
        .zip(mixing)
        .map(|(s, &w)| {
            let chol = s.cholesky().expect("floored covariance is positive definite");
            let l = chol.l();
            let log_det = 2.0 * (0..3).map(|i| l[(i, i)].ln()).sum::<f64>();
            let inv = chol.inverse();
            (inv, w.ln() - 0.5 * log_det - 1.5 * LN_2PI)
        })
        .collect();
    let mut total = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        for c in 0..k {
            let d = to_vec(p - means[c]);
            row[c] = comps[c].1 - 0.5 * d.dot(&(comps[c].0 * d));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
        let lse = max + sum.ln();
        for x in row.iter_mut() {
            *x = (*x - lse).exp();
        }
        total += lse;
    }
    total
}

fn m_step(
    points: &[Point3],
    resp: &[f64],
    k: usize,
    means: &mut [Point3],
    covariances: &mut [Matrix3<f64>],
    mixing: &mut [f64],
) {
    let n = points.len();
    for c in 0..k {
        let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
        if nk < 1e-10 {
            warn!("EM component {c} collapsed; keeping its previous parameters");
            mixing[c] = 1e-10 / n as f64;
            continue;
        }
        let mut mean = Vector3::zeros();
        for (i, &p) in points.iter().enumerate() {
            mean += to_vec(p) * resp[i * k + c];
        }
        mean /= nk;
        let mut cov = Matrix3::zeros();
        for (i, &p) in points.iter().enumerate() {
            let d = to_vec(p) - mean;
            cov += d * d.transpose() * resp[i * k + c];
        }
        cov /= nk;
        means[c] = Point3::new(mean.x, mean.y, mean.z);
        covariances[c] = floor_eigenvalues(cov, c);
        mixing[c] = nk / n as f64;
    }
    let total: f64 = mixing.iter().sum();
    for w in mixing.iter_mut() {
        *w /= total;
    }
}

fn floor_eigenvalues(cov: Matrix3<f64>, component: usize) -> Matrix3<f64> {
    let cov = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);
    if eig.eigenvalues.min() >= VARIANCE_FLOOR {
        return cov;
    }
    warn!("EM component {component} is degenerate; flooring its covariance");
    let floored = eig.eigenvalues.map(|v| v.max(VARIANCE_FLOOR));
    let m = eig.eigenvectors * Matrix3::from_diagonal(&floored) * eig.eigenvectors.transpose();
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blob(rng: &mut ChaCha8Rng, n: usize, c: Point3, sd: [f64; 3]) -> Vec<Point3> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                c + Point3::new(
                    sd[0] * normal.sample(rng),
                    sd[1] * normal.sample(rng),
                    sd[2] * normal.sample(rng),
                )
            })
            .collect()
    }

    #[test]
    fn single_component_is_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = blob(&mut rng, 500, Point3::new(1.0, -1.0, 2.0), [1.0, 0.5, 2.0]);
        let fit = fit_gmm(&pts, 1, 3).unwrap();
        let n = pts.len() as f64;
        let mean = pts.iter().fold(Vector3::zeros(), |a, p| a + to_vec(*p)) / n;
        let cov = pts.iter().fold(Matrix3::zeros(), |a, p| {
            let d = to_vec(*p) - mean;
            a + d * d.transpose()
        }) / n;
        assert!((to_vec(fit.means[0]) - mean).abs().max() < 1e-8);
        assert!((fit.covariances[0] - cov).abs().max() < 1e-8);
        let refs = fit.reference_set().unwrap();
        let back = (refs.weight_matrices()[0] * 2.0).try_inverse().unwrap();
        assert!((back - cov).abs().max() < 1e-8);
    }

    #[test]
    fn recovers_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Point3::new(-3.0, 0.0, 0.0);
        let b = Point3::new(3.0, 1.0, 0.0);
        let mut pts = blob(&mut rng, 400, a, [1.0; 3]);
        pts.extend(blob(&mut rng, 400, b, [1.0; 3]));
        let fit = fit_gmm(&pts, 2, 5).unwrap();
        // three standard errors of a 400-sample mean with unit variance
        let tol = 3.0 * (3.0f64).sqrt() / 20.0;
        for t in [a, b] {
            assert!(fit.means.iter().any(|m| m.distance(t) < tol), "{:?}", fit.means);
        }
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = blob(&mut rng, 300, Point3::ORIGIN, [1.0, 0.2, 0.2]);
        pts.extend(blob(&mut rng, 300, Point3::new(1.0, 1.0, 0.0), [0.3, 1.0, 0.3]));
        pts.extend(blob(&mut rng, 300, Point3::new(0.0, 2.0, 1.0), [0.5; 3]));
        for seed in 0..3 {
            let fit = fit_gmm(&pts, 3, seed).unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn degenerate_component_is_floored() {
        // a flat sheet has zero variance along z
        let pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new((i % 10) as f64, (i / 10) as f64, 0.0))
            .collect();
        let refs = em_gmm(&pts, 1, 0).unwrap();
        let q = refs.weight_matrices()[0];
        assert!((q[(2, 2)] - 0.5 / VARIANCE_FLOOR).abs() < 1e-3);
    }

    #[test]
    fn needs_four_points_per_component() {
        let pts = vec![Point3::ORIGIN; 7];
        assert!(fit_gmm(&pts, 2, 0).is_err());
    }
}
