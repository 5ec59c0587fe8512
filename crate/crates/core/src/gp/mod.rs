//! Exact Gaussian process regression of distance over direction.
//!
//! Targets are centered by their mean before fitting; predictions add the
//! mean back, so far from the data the posterior reverts to the average
//! distance rather than to zero.

mod linalg;
mod optim;

use faer::Mat;
use log::{debug, warn};

use crate::error::{Error, Result};
use crate::geometry::SphericalDirection;
use crate::kernels::{Feature, Kernel};

pub use linalg::{Cholesky, BASE_JITTER, MAX_JITTER};
pub use optim::OptimizerConfig;
use optim::{Adam, Plateau};

/// Log-hyperparameters are kept inside `[-LOG_PARAM_BOUND, LOG_PARAM_BOUND]`
/// during fitting (roughly 1e-4 to 1e4 in natural scale).
pub const LOG_PARAM_BOUND: f64 = 9.2;

/// Minimum increase in log marginal likelihood that counts as progress.
const IMPROVEMENT_THRESHOLD: f64 = 1e-6;

const PREDICT_CHUNK: usize = 1024;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<SphericalDirection>,
    targets: Vec<f64>,
    target_mean: f64,
}

impl TrainingSet {
    pub fn new(inputs: Vec<SphericalDirection>, targets: Vec<f64>) -> Result<Self> {
        let mean = if targets.is_empty() {
            0.0
        } else {
            targets.iter().sum::<f64>() / targets.len() as f64
        };
        TrainingSet::with_mean(inputs, targets, mean)
    }

    /// Like [`TrainingSet::new`] but with a stored mean, used when loading
    /// a model so predictions reproduce exactly.
    pub fn with_mean(
        inputs: Vec<SphericalDirection>,
        targets: Vec<f64>,
        target_mean: f64,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("training set"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(t) = targets.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "training distances must be finite and non-negative, got {t}"
            )));
        }
        if inputs
            .iter()
            .any(|s| !(s.phi.is_finite() && s.theta.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite training direction".into()));
        }
        if !target_mean.is_finite() {
            return Err(Error::InvalidArgument("non-finite target mean".into()));
        }
        Ok(TrainingSet {
            inputs,
            targets,
            target_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[SphericalDirection] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    fn centered(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t - self.target_mean).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Summary of one hyperparameter fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub initial_lml: f64,
    pub final_lml: f64,
    pub final_lr: f64,
    pub jitter: f64,
}

/// A conditioned GP: kernel, training data and the cached factorization of
/// `K + jitter I`.
#[derive(Debug, Clone)]
pub struct GpRegressor {
    kernel: Kernel,
    training: TrainingSet,
    features: Vec<Feature>,
    jitter: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

struct Evaluation {
    lml: f64,
    grad: Vec<f64>,
    jitter: f64,
}

impl GpRegressor {
    /// Conditions `kernel` on `training`. The jitter starts at `jitter` and is
    /// escalated tenfold until the factorization succeeds or passes
    /// [`MAX_JITTER`].
    pub fn new(kernel: Kernel, training: TrainingSet, jitter: f64) -> Result<Self> {
        if !(jitter > 0.0) {
            return Err(Error::InvalidArgument("jitter must be positive".into()));
        }
        let features = kernel.features(training.inputs());
        let k = kernel.gram_features(&features);
        let (chol, jitter) = Cholesky::factor_with_jitter(&k, jitter)?;
        let alpha = chol.solve(&training.centered());
        Ok(GpRegressor {
            kernel,
            training,
            features,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    /// Jitter actually added to the Gram diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = self.training.centered();
        lml_from(&self.chol, &self.alpha, &y)
    }

    /// Gradient of the log marginal likelihood with respect to each
    /// log-hyperparameter, at the cached jitter.
    pub fn lml_gradient(&self) -> Vec<f64> {
        let np = self.kernel.num_params();
        let grads = gram_and_grads(&self.kernel, &self.features).1;
        let kinv = self.chol.inverse_lower();
        let mut out = vec![0.0; np];
        accumulate_trace(&kinv, &self.alpha, &grads, &mut out);
        out
    }

    pub fn predict(&self, x: SphericalDirection) -> Prediction {
        self.predict_batch(&[x])[0]
    }

    /// Posterior without clamping the variance at zero.
    pub fn predict_unclamped(&self, x: SphericalDirection) -> Prediction {
        self.predict_batch_unclamped(&[x])[0]
    }

    pub fn predict_batch(&self, xs: &[SphericalDirection]) -> Vec<Prediction> {
        let mut out = self.predict_batch_unclamped(xs);
        for p in &mut out {
            p.variance = p.variance.max(0.0);
        }
        out
    }

    pub fn predict_batch_unclamped(&self, xs: &[SphericalDirection]) -> Vec<Prediction> {
        let prepared = self.kernel.prepared();
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(PREDICT_CHUNK) {
            let q: Vec<Feature> = self.kernel.features(chunk);
            // column j holds k(Psi, x_j)
            let mut v = self.kernel.cross_features(&self.features, &q);
            let means: Vec<f64> = (0..q.len())
                .map(|j| {
                    let col = v.col_as_slice(j);
                    let dot: f64 = col.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
                    self.training.target_mean + dot
                })
                .collect();
            self.chol.solve_lower_in_place(v.as_mut());
            for (j, mean) in means.into_iter().enumerate() {
                let explained: f64 = v.col_as_slice(j).iter().map(|a| a * a).sum();
                let prior = prepared.value(&q[j], &q[j]);
                out.push(Prediction {
                    mean,
                    variance: prior - explained,
                });
            }
        }
        out
    }
}

fn lml_from(chol: &Cholesky, alpha: &[f64], y: &[f64]) -> f64 {
    let quad: f64 = y.iter().zip(alpha).map(|(a, b)| a * b).sum();
    let m = y.len() as f64;
    -0.5 * quad - 0.5 * chol.log_det() - 0.5 * m * LN_2PI
}

/// Lower triangles of the Gram matrix and of every `dK / d log h`, in one
/// pass. The strict upper triangles are left at zero.
fn gram_and_grads(kernel: &Kernel, f: &[Feature]) -> (Mat<f64>, Vec<Mat<f64>>) {
    let n = f.len();
    let np = kernel.num_params();
    let p = kernel.prepared();
    let mut k = Mat::<f64>::zeros(n, n);
    let mut grads = vec![Mat::<f64>::zeros(n, n); np];
    let mut g = [0.0; 2];
    for j in 0..n {
        for i in j..n {
            k[(i, j)] = p.value_and_grad(&f[i], &f[j], Some(&mut g[..np]));
            for (m, &gv) in grads.iter_mut().zip(&g[..np]) {
                m[(i, j)] = gv;
            }
        }
    }
    (k, grads)
}

/// Adds `0.5 tr((alpha alpha^T - K^-1) dK_p)` to `out[p]`. Only lower
/// triangles are read.
fn accumulate_trace(kinv: &Mat<f64>, alpha: &[f64], grads: &[Mat<f64>], out: &mut [f64]) {
    let n = alpha.len();
    for (o, dk) in out.iter_mut().zip(grads) {
        let mut diag = 0.0;
        let mut off = 0.0;
        for j in 0..n {
            let kinv_col = kinv.col_as_slice(j);
            let dk_col = dk.col_as_slice(j);
            diag += (alpha[j] * alpha[j] - kinv_col[j]) * dk_col[j];
            for i in (j + 1)..n {
                off += (alpha[i] * alpha[j] - kinv_col[i]) * dk_col[i];
            }
        }
        *o += 0.5 * diag + off;
    }
}

fn evaluate(kernel: &Kernel, f: &[Feature], y: &[f64], jitter: f64) -> Result<Evaluation> {
    let (k, grads) = gram_and_grads(kernel, f);
    let (chol, jitter) = Cholesky::factor_with_jitter(&k, jitter)?;
    let alpha = chol.solve(y);
    let lml = lml_from(&chol, &alpha, y);
    let kinv = chol.inverse_lower();
    let mut grad = vec![0.0; kernel.num_params()];
    accumulate_trace(&kinv, &alpha, &grads, &mut grad);
    Ok(Evaluation { lml, grad, jitter })
}

/// Fits the hyperparameters of `kernel_init` by maximizing the log marginal
/// likelihood and returns the regressor at the best hyperparameters seen.
pub fn fit(training: TrainingSet, kernel_init: Kernel, cfg: &OptimizerConfig) -> Result<GpRegressor> {
    fit_with_report(training, kernel_init, cfg).map(|(g, _)| g)
}

pub fn fit_with_report(
    training: TrainingSet,
    kernel_init: Kernel,
    cfg: &OptimizerConfig,
) -> Result<(GpRegressor, FitReport)> {
    cfg.validate()?;
    warn_if_inconsistent(&training);
    let features = kernel_init.features(training.inputs());
    let y = training.centered();
    let np = kernel_init.num_params();

    let first = evaluate(&kernel_init, &features, &y, BASE_JITTER)?;
    let initial_lml = first.lml;
    let mut best = (first.lml, kernel_init.log_params().to_vec(), first.jitter);

    let mut kernel = kernel_init;
    let mut params = kernel.log_params().to_vec();
    let mut adam = Adam::new(np, cfg);
    let mut plateau = Plateau::new(cfg, IMPROVEMENT_THRESHOLD);
    let mut iterations = 0;
    let mut current = Some(first);

    if np > 0 {
        while iterations < cfg.max_iters && plateau.lr() >= cfg.min_lr {
            iterations += 1;
            let eval = match current.take() {
                Some(e) => e,
                None => {
                    kernel.set_log_params(&params);
                    match evaluate(&kernel, &features, &y, BASE_JITTER) {
                        Ok(e) => e,
                        Err(Error::Factorization { .. }) => {
                            // back off to the best point with a smaller step
                            debug!("factorization failed at {params:?}, backing off");
                            params.clone_from(&best.1);
                            plateau.force_decay();
                            adam = Adam::new(np, cfg);
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            if eval.lml.is_finite() && eval.lml > best.0 {
                best = (eval.lml, params.clone(), eval.jitter);
            }
            plateau.observe(-eval.lml);
            let descent: Vec<f64> = eval.grad.iter().map(|g| -g).collect();
            adam.step(&mut params, &descent, plateau.lr());
            for p in &mut params {
                *p = p.clamp(-LOG_PARAM_BOUND, LOG_PARAM_BOUND);
            }
        }
    }

    kernel.set_log_params(&best.1);
    let gp = GpRegressor::new(kernel, training, best.2)?;
    let report = FitReport {
        iterations,
        initial_lml,
        final_lml: gp.log_marginal_likelihood(),
        final_lr: plateau.lr(),
        jitter: gp.jitter,
    };
    debug!(
        "fit: {} iterations, lml {:.4} -> {:.4}, jitter {:e}",
        report.iterations, report.initial_lml, report.final_lml, report.jitter
    );
    Ok((gp, report))
}

fn warn_if_inconsistent(training: &TrainingSet) {
    let inputs = training.inputs();
    let first = inputs[0];
    let same_input = inputs
        .iter()
        .all(|s| (s.phi - first.phi).abs() < 1e-12 && (s.theta - first.theta).abs() < 1e-12);
    let t0 = training.targets()[0];
    let distinct_targets = training.targets().iter().any(|&t| (t - t0).abs() > 1e-12);
    if inputs.len() > 1 && same_input && distinct_targets {
        warn!("all training inputs are identical but targets differ; jitter absorbs the conflict");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DistanceMode, KernelKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::{PI, TAU};

    fn random_dirs(rng: &mut ChaCha8Rng, n: usize) -> Vec<SphericalDirection> {
        (0..n)
            .map(|_| SphericalDirection::new(rng.random_range(0.0..PI), rng.random_range(0.0..TAU)))
            .collect()
    }

    fn smooth_targets(dirs: &[SphericalDirection]) -> Vec<f64> {
        dirs.iter()
            .map(|s| 1.0 + 0.2 * s.phi.cos() + 0.1 * (s.theta).sin() * s.phi.sin())
            .collect()
    }

    #[test]
    fn single_point_lml() {
        let s = SphericalDirection::new(1.0, 2.0);
        let t = TrainingSet::new(vec![s], vec![0.0]).unwrap();
        let gp = GpRegressor::new(Kernel::rational_quadratic(1.0, 1.0), t, 1e-6).unwrap();
        let want = -0.5 * (1.0f64 + 1e-6).ln() - 0.5 * (2.0 * PI).ln();
        assert!((gp.log_marginal_likelihood() - want).abs() < 1e-14);
    }

    #[test]
    fn two_point_closed_form() {
        let a = SphericalDirection::new(0.4, 1.0);
        let b = SphericalDirection::new(1.1, 2.5);
        let kernel = Kernel::rational_quadratic(0.7, 1.3);
        let targets = vec![1.2, 0.8];
        let t = TrainingSet::new(vec![a, b], targets.clone()).unwrap();
        let gp = GpRegressor::new(kernel.clone(), t, 1e-6).unwrap();
        assert_eq!(gp.jitter(), 1e-6);

        let mean = 1.0;
        let y = [targets[0] - mean, targets[1] - mean];
        let kaa = kernel.eval(a, a) + 1e-6;
        let kbb = kernel.eval(b, b) + 1e-6;
        let kab = kernel.eval(a, b);
        let det = kaa * kbb - kab * kab;
        let inv = [[kbb / det, -kab / det], [-kab / det, kaa / det]];
        let quad = y[0] * (inv[0][0] * y[0] + inv[0][1] * y[1])
            + y[1] * (inv[1][0] * y[0] + inv[1][1] * y[1]);
        let lml = -0.5 * quad - 0.5 * det.ln() - (2.0 * PI).ln();
        assert!((gp.log_marginal_likelihood() - lml).abs() < 1e-10);

        let x = SphericalDirection::new(0.9, 1.7);
        let kx = [kernel.eval(x, a), kernel.eval(x, b)];
        let w = [
            inv[0][0] * kx[0] + inv[0][1] * kx[1],
            inv[1][0] * kx[0] + inv[1][1] * kx[1],
        ];
        let mu = mean + w[0] * y[0] + w[1] * y[1];
        let var = kernel.eval(x, x) - (w[0] * kx[0] + w[1] * kx[1]);
        let p = gp.predict(x);
        assert!((p.mean - mu).abs() < 1e-10);
        assert!((p.variance - var).abs() < 1e-10);
    }

    #[test]
    fn factor_reproduces_jittered_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dirs = random_dirs(&mut rng, 60);
        let t = TrainingSet::new(dirs.clone(), smooth_targets(&dirs)).unwrap();
        let kernel = Kernel::rational_quadratic(0.8, 1.0);
        let gp = GpRegressor::new(kernel.clone(), t, BASE_JITTER).unwrap();
        let l = gp.cholesky().lower();
        let llt = l * l.transpose();
        let k = kernel.gram(&dirs);
        for i in 0..60 {
            for j in 0..60 {
                let want = k.get(i, j) + if i == j { gp.jitter() } else { 0.0 };
                assert!((llt[(i, j)] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn interpolates_training_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dirs = random_dirs(&mut rng, 120);
        let targets = smooth_targets(&dirs);
        let t = TrainingSet::new(dirs.clone(), targets.clone()).unwrap();
        let gp = GpRegressor::new(Kernel::rational_quadratic(0.5, 1.0), t, BASE_JITTER).unwrap();
        for (p, want) in gp.predict_batch(&dirs).iter().zip(&targets) {
            assert!((p.mean - want).abs() < 1e-3);
            assert!(p.variance < 1e-3);
        }
        for x in random_dirs(&mut rng, 200) {
            let p = gp.predict_unclamped(x);
            assert!(p.variance >= -1e-8);
            assert!(p.mean.is_finite());
        }
    }

    #[test]
    fn reverts_to_prior_far_from_data() {
        let dirs = vec![SphericalDirection::new(0.1, 0.1), SphericalDirection::new(0.2, 0.1)];
        let t = TrainingSet::new(dirs, vec![1.0, 3.0]).unwrap();
        let gp = GpRegressor::new(Kernel::rbf(0.05), t, BASE_JITTER).unwrap();
        let p = gp.predict(SphericalDirection::new(3.0, 6.0));
        assert!((p.mean - 2.0).abs() < 1e-12);
        assert!((p.variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dirs = random_dirs(&mut rng, 80);
        let t = TrainingSet::new(dirs.clone(), smooth_targets(&dirs)).unwrap();
        let gp = GpRegressor::new(Kernel::rational_quadratic(0.6, 2.0), t, BASE_JITTER).unwrap();
        let xs = random_dirs(&mut rng, 100);
        let batch = gp.predict_batch(&xs);
        for (x, b) in xs.iter().zip(&batch) {
            let s = gp.predict(*x);
            assert!((s.mean - b.mean).abs() < 1e-12);
            assert!((s.variance - b.variance).abs() < 1e-12);
        }
        assert!(gp.predict_batch(&[]).is_empty());
        assert_eq!(gp.predict(xs[0]), gp.predict(xs[0]));
    }

    #[test]
    fn more_data_never_increases_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let dirs = random_dirs(&mut rng, 30);
            let targets = smooth_targets(&dirs);
            let kernel = Kernel::rational_quadratic(0.7, 1.0);
            let small = TrainingSet::new(dirs[..29].to_vec(), targets[..29].to_vec()).unwrap();
            let big = TrainingSet::new(dirs.clone(), targets.clone()).unwrap();
            let small = GpRegressor::new(kernel.clone(), small, BASE_JITTER).unwrap();
            let big = GpRegressor::new(kernel, big, BASE_JITTER).unwrap();
            for x in random_dirs(&mut rng, 50) {
                assert!(big.predict(x).variance <= small.predict(x).variance + 1e-8);
            }
        }
    }

    fn fd_lml(kernel: &Kernel, t: &TrainingSet, jitter: f64, i: usize, h: f64) -> f64 {
        let mut lp = kernel.log_params().to_vec();
        lp[i] += h;
        let up = GpRegressor::new(kernel.clone().with_log_params(&lp), t.clone(), jitter)
            .unwrap()
            .log_marginal_likelihood();
        lp[i] -= 2.0 * h;
        let down = GpRegressor::new(kernel.clone().with_log_params(&lp), t.clone(), jitter)
            .unwrap()
            .log_marginal_likelihood();
        (up - down) / (2.0 * h)
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dirs = random_dirs(&mut rng, 25);
        let t = TrainingSet::new(dirs.clone(), smooth_targets(&dirs)).unwrap();
        for kind in KernelKind::ABLATION_SET {
            let kernel = Kernel::new(kind, DistanceMode::ParamEuclidean).with_log_params(
                &[-0.3, 0.2][..kind.param_names().len()],
            );
            // large enough jitter that no escalation happens under perturbation
            let gp = GpRegressor::new(kernel.clone(), t.clone(), 1e-3).unwrap();
            assert_eq!(gp.jitter(), 1e-3, "{kind}");
            let g = gp.lml_gradient();
            for (i, gi) in g.iter().enumerate() {
                let fd = fd_lml(&kernel, &t, 1e-3, i, 1e-5);
                let rel = (gi - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-4, "{kind} param {i}: {gi} vs {fd}");
            }
        }
    }

    #[test]
    fn single_point_fit() {
        let s = SphericalDirection::new(0.5, 0.5);
        let t = TrainingSet::new(vec![s], vec![0.7]).unwrap();
        let gp = fit(t, Kernel::rational_quadratic(1.0, 1.0), &OptimizerConfig::default()).unwrap();
        assert!((gp.predict(s).mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fit_never_lowers_lml() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dirs = random_dirs(&mut rng, 60);
        let t = TrainingSet::new(dirs.clone(), smooth_targets(&dirs)).unwrap();
        let init = Kernel::rational_quadratic(3.0, 1.0);
        let before = GpRegressor::new(init.clone(), t.clone(), BASE_JITTER)
            .unwrap()
            .log_marginal_likelihood();
        let (gp, report) = fit_with_report(t, init, &OptimizerConfig::default()).unwrap();
        assert!(gp.log_marginal_likelihood() >= before - 1e-9);
        assert!((report.initial_lml - before).abs() < 1e-9);
        assert!(report.iterations > 0);
    }

    #[test]
    fn recovers_rq_lengthscale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dirs = random_dirs(&mut rng, 250);
        let truth = Kernel::rational_quadratic(0.5, 1.0);
        let k = truth.gram(&dirs).into_mat();
        let (chol, _) = Cholesky::factor_with_jitter(&k, 1e-8).unwrap();
        let z: Vec<f64> = (0..dirs.len()).map(|_| rng.sample(StandardNormal)).collect();
        let l = chol.lower();
        let targets: Vec<f64> = (0..dirs.len())
            .map(|i| 5.0 + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let t = TrainingSet::new(dirs, targets).unwrap();
        let gp = fit(t, Kernel::rational_quadratic(1.0, 1.0), &OptimizerConfig::default()).unwrap();
        let fitted = gp.kernel().param("lengthscale").unwrap();
        assert!(fitted > 0.25 && fitted < 1.0, "lengthscale {fitted}");
    }

    #[test]
    fn rejects_bad_training_sets() {
        let s = SphericalDirection::new(0.5, 0.5);
        assert!(TrainingSet::new(vec![], vec![]).is_err());
        assert!(TrainingSet::new(vec![s], vec![]).is_err());
        assert!(TrainingSet::new(vec![s], vec![-1.0]).is_err());
        assert!(TrainingSet::new(vec![s], vec![f64::NAN]).is_err());
    }

    #[test]
    fn identical_inputs_still_fit() {
        let s = SphericalDirection::new(0.5, 0.5);
        let t = TrainingSet::new(vec![s; 3], vec![1.0, 1.1, 0.9]).unwrap();
        let gp = fit(t, Kernel::rbf(1.0), &OptimizerConfig::default()).unwrap();
        assert!((gp.predict(s).mean - 1.0).abs() < 1e-2);
    }
}
