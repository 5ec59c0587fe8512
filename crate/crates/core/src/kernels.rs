//! Covariance functions over direction parameters.
//!
//! Every kernel works on a feature vector derived from a [`SphericalDirection`]:
//! the raw `(phi, theta)` pair for [`DistanceMode::ParamEuclidean`] or the
//! bearing vector `u(phi, theta)` for [`DistanceMode::BearingEuclidean`].
//! Hyperparameters are stored as logarithms so that gradient steps can never
//! make them non-positive.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::SphericalDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaternSmoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternSmoothness {
    pub fn nu(self) -> f64 {
        match self {
            MaternSmoothness::Half => 0.5,
            MaternSmoothness::ThreeHalves => 1.5,
            MaternSmoothness::FiveHalves => 2.5,
        }
    }

    pub fn from_nu(nu: f64) -> Option<Self> {
        match nu {
            x if x == 0.5 => Some(MaternSmoothness::Half),
            x if x == 1.5 => Some(MaternSmoothness::ThreeHalves),
            x if x == 2.5 => Some(MaternSmoothness::FiveHalves),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    RationalQuadratic,
    Rbf,
    Matern(MaternSmoothness),
    Periodic,
    Linear,
    Polynomial { degree: u32 },
}

impl KernelKind {
    /// The six kernels of the ablation study, Matérn at nu = 2.5 and cubic polynomial.
    pub const ABLATION_SET: [KernelKind; 6] = [
        KernelKind::Polynomial { degree: 3 },
        KernelKind::Periodic,
        KernelKind::Linear,
        KernelKind::Rbf,
        KernelKind::RationalQuadratic,
        KernelKind::Matern(MaternSmoothness::FiveHalves),
    ];

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            KernelKind::RationalQuadratic => &["lengthscale", "alpha"],
            KernelKind::Rbf | KernelKind::Matern(_) => &["lengthscale"],
            KernelKind::Periodic => &["lengthscale", "period"],
            KernelKind::Linear => &["variance"],
            KernelKind::Polynomial { .. } => &["offset"],
        }
    }

    pub fn is_stationary(self) -> bool {
        matches!(
            self,
            KernelKind::RationalQuadratic
                | KernelKind::Rbf
                | KernelKind::Matern(_)
                | KernelKind::Periodic
        )
    }

    /// Numeric tag used by the model file.
    pub fn tag(self) -> u8 {
        match self {
            KernelKind::RationalQuadratic => 0,
            KernelKind::Rbf => 1,
            KernelKind::Matern(_) => 2,
            KernelKind::Periodic => 3,
            KernelKind::Linear => 4,
            KernelKind::Polynomial { .. } => 5,
        }
    }

    /// The fixed (non-optimized) parameter: Matérn nu or polynomial degree.
    pub fn fixed_param(self) -> f64 {
        match self {
            KernelKind::Matern(nu) => nu.nu(),
            KernelKind::Polynomial { degree } => degree as f64,
            _ => 0.0,
        }
    }

    pub fn from_tag(tag: u8, fixed: f64) -> Option<Self> {
        Some(match tag {
            0 => KernelKind::RationalQuadratic,
            1 => KernelKind::Rbf,
            2 => KernelKind::Matern(MaternSmoothness::from_nu(fixed)?),
            3 => KernelKind::Periodic,
            4 => KernelKind::Linear,
            5 if fixed >= 1.0 && fixed.fract() == 0.0 && fixed <= u32::MAX as f64 => {
                KernelKind::Polynomial {
                    degree: fixed as u32,
                }
            }
            _ => return None,
        })
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::RationalQuadratic => write!(f, "rq"),
            KernelKind::Rbf => write!(f, "rbf"),
            KernelKind::Matern(MaternSmoothness::Half) => write!(f, "matern12"),
            KernelKind::Matern(MaternSmoothness::ThreeHalves) => write!(f, "matern32"),
            KernelKind::Matern(MaternSmoothness::FiveHalves) => write!(f, "matern"),
            KernelKind::Periodic => write!(f, "periodic"),
            KernelKind::Linear => write!(f, "linear"),
            KernelKind::Polynomial { degree: 3 } => write!(f, "poly"),
            KernelKind::Polynomial { degree } => write!(f, "poly{degree}"),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "rq" | "rational_quadratic" | "rationalquadratic" => KernelKind::RationalQuadratic,
            "rbf" | "se" | "gaussian" => KernelKind::Rbf,
            "matern" | "matern52" => KernelKind::Matern(MaternSmoothness::FiveHalves),
            "matern32" => KernelKind::Matern(MaternSmoothness::ThreeHalves),
            "matern12" => KernelKind::Matern(MaternSmoothness::Half),
            "periodic" => KernelKind::Periodic,
            "linear" => KernelKind::Linear,
            "poly" | "polynomial" => KernelKind::Polynomial { degree: 3 },
            other => {
                let degree = other
                    .strip_prefix("polynomial")
                    .or_else(|| other.strip_prefix("poly"))
                    .and_then(|d| d.parse::<u32>().ok())
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown kernel '{s}'")))?;
                KernelKind::Polynomial { degree }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistanceMode {
    /// Euclidean distance between raw `(phi, theta)` pairs.
    #[default]
    ParamEuclidean,
    /// Chordal distance between bearing vectors.
    BearingEuclidean,
}

impl DistanceMode {
    pub fn tag(self) -> u8 {
        match self {
            DistanceMode::ParamEuclidean => 0,
            DistanceMode::BearingEuclidean => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DistanceMode::ParamEuclidean),
            1 => Some(DistanceMode::BearingEuclidean),
            _ => None,
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::ParamEuclidean => "param",
            DistanceMode::BearingEuclidean => "bearing",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "param" | "parameuclidean" | "param_euclidean" => Ok(DistanceMode::ParamEuclidean),
            "bearing" | "beareuclidean" | "bearingeuclidean" | "bearing_euclidean" | "chordal" => {
                Ok(DistanceMode::BearingEuclidean)
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown distance mode '{other}'"
            ))),
        }
    }
}

/// Kernel input after mapping a direction through the distance mode. The
/// third coordinate is zero in parameter mode.
pub type Feature = [f64; 3];

pub fn feature(s: SphericalDirection, mode: DistanceMode) -> Feature {
    match mode {
        DistanceMode::ParamEuclidean => [s.phi, s.theta, 0.0],
        DistanceMode::BearingEuclidean => {
            let u = s.bearing();
            [u.x(), u.y(), u.z()]
        }
    }
}

fn sq_dist(a: &Feature, b: &Feature) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

fn dot(a: &Feature, b: &Feature) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn input_distance(a: SphericalDirection, b: SphericalDirection, mode: DistanceMode) -> f64 {
    sq_dist(&feature(a, mode), &feature(b, mode)).sqrt()
}

/// Symmetric kernel matrix `[k(psi_i, psi_j)]`.
#[derive(Debug, Clone)]
pub struct GramMatrix(pub Mat<f64>);

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.0
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    mode: DistanceMode,
    log_params: Vec<f64>,
}

impl Kernel {
    /// Kernel with every continuous hyperparameter set to 1.
    pub fn new(kind: KernelKind, mode: DistanceMode) -> Self {
        if let KernelKind::Polynomial { degree } = kind {
            assert!(degree >= 1, "polynomial degree must be at least 1");
        }
        Kernel {
            kind,
            mode,
            log_params: vec![0.0; kind.param_names().len()],
        }
    }

    pub fn rational_quadratic(lengthscale: f64, alpha: f64) -> Self {
        Kernel::new(KernelKind::RationalQuadratic, DistanceMode::ParamEuclidean)
            .with_param("lengthscale", lengthscale)
            .with_param("alpha", alpha)
    }

    pub fn rbf(lengthscale: f64) -> Self {
        Kernel::new(KernelKind::Rbf, DistanceMode::ParamEuclidean)
            .with_param("lengthscale", lengthscale)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: DistanceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn num_params(&self) -> usize {
        self.log_params.len()
    }

    pub fn log_params(&self) -> &[f64] {
        &self.log_params
    }

    pub fn set_log_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.log_params.len());
        self.log_params.copy_from_slice(values);
    }

    pub fn with_log_params(mut self, values: &[f64]) -> Self {
        self.set_log_params(values);
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.kind
            .param_names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.log_params[i].exp())
    }

    /// Named hyperparameters in their natural (positive) scale.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        self.kind
            .param_names()
            .iter()
            .zip(&self.log_params)
            .map(|(&n, &v)| (n, v.exp()))
            .collect()
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "hyperparameter {name} must be positive and finite, got {value}"
            )));
        }
        let i = self
            .kind
            .param_names()
            .iter()
            .position(|&n| n == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("kernel {} has no parameter '{name}'", self.kind))
            })?;
        self.log_params[i] = value.ln();
        Ok(())
    }

    /// Panicking variant of [`Kernel::set_param`] for literal construction.
    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.set_param(name, value).expect("valid hyperparameter");
        self
    }

    pub fn has_lengthscale(&self) -> bool {
        self.kind.param_names().contains(&"lengthscale")
    }

    pub fn feature(&self, s: SphericalDirection) -> Feature {
        feature(s, self.mode)
    }

    pub fn features(&self, inputs: &[SphericalDirection]) -> Vec<Feature> {
        inputs.iter().map(|&s| feature(s, self.mode)).collect()
    }

    pub fn eval(&self, a: SphericalDirection, b: SphericalDirection) -> f64 {
        self.eval_features(&self.feature(a), &self.feature(b))
    }

    pub fn eval_features(&self, a: &Feature, b: &Feature) -> f64 {
        self.prepared().value(a, b)
    }

    /// Kernel value and, when `grad` is given, its derivatives with respect to
    /// each log-hyperparameter.
    pub fn value_and_grad(&self, a: &Feature, b: &Feature, grad: Option<&mut [f64]>) -> f64 {
        self.prepared().value_and_grad(a, b, grad)
    }

    /// Snapshot with the hyperparameters already exponentiated, for tight loops.
    pub fn prepared(&self) -> Prepared {
        let mut natural = [0.0; 2];
        for (n, l) in natural.iter_mut().zip(&self.log_params) {
            *n = l.exp();
        }
        Prepared {
            kind: self.kind,
            natural,
        }
    }

    pub fn gram(&self, inputs: &[SphericalDirection]) -> GramMatrix {
        let f = self.features(inputs);
        GramMatrix(self.gram_features(&f))
    }

    pub fn gram_features(&self, f: &[Feature]) -> Mat<f64> {
        let n = f.len();
        let p = self.prepared();
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = p.value(&f[i], &f[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// `[k(x_i, y_j)]`, one row per `x`.
    pub fn cross_features(&self, xs: &[Feature], ys: &[Feature]) -> Mat<f64> {
        let p = self.prepared();
        Mat::from_fn(xs.len(), ys.len(), |i, j| p.value(&xs[i], &ys[j]))
    }

    /// `dK / d log(h)` for every continuous hyperparameter `h`.
    pub fn grad_hyperparams(&self, inputs: &[SphericalDirection]) -> Vec<Mat<f64>> {
        let f = self.features(inputs);
        let n = f.len();
        let np = self.num_params();
        let mut out = vec![Mat::<f64>::zeros(n, n); np];
        let p = self.prepared();
        let mut g = vec![0.0; np];
        for j in 0..n {
            for i in j..n {
                p.value_and_grad(&f[i], &f[j], Some(&mut g));
                for (m, &v) in out.iter_mut().zip(&g) {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        out
    }

    /// Sets the lengthscale to the median pairwise input distance (at most
    /// 400 evenly strided inputs are used). Leaves kernels without a
    /// lengthscale untouched.
    pub fn init_lengthscale_median(&mut self, inputs: &[SphericalDirection]) {
        if !self.has_lengthscale() || inputs.len() < 2 {
            return;
        }
        let stride = inputs.len().div_ceil(400);
        let f: Vec<Feature> = inputs.iter().step_by(stride).map(|&s| self.feature(s)).collect();
        let mut d: Vec<f64> = Vec::with_capacity(f.len() * (f.len() - 1) / 2);
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                d.push(sq_dist(&f[i], &f[j]).sqrt());
            }
        }
        let d: Vec<f64> = d.into_iter().filter(|&x| x > 0.0).collect();
        if d.is_empty() {
            return;
        }
        let mut d = d;
        let mid = d.len() / 2;
        let (_, median, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
        let median = *median;
        let _ = self.set_param("lengthscale", median);
    }
}

/// A kernel with its hyperparameters in natural scale.
#[derive(Debug, Clone, Copy)]
pub struct Prepared {
    kind: KernelKind,
    natural: [f64; 2],
}

impl Prepared {
    pub fn value(&self, a: &Feature, b: &Feature) -> f64 {
        self.value_and_grad(a, b, None)
    }

    pub fn value_and_grad(&self, a: &Feature, b: &Feature, grad: Option<&mut [f64]>) -> f64 {
        let p = &self.natural;
        match self.kind {
            KernelKind::RationalQuadratic => {
                let l = p[0];
                let alpha = p[1];
                let r2 = sq_dist(a, b);
                let x = r2 / (2.0 * alpha * l * l);
                let log_base = x.ln_1p();
                let k = (-alpha * log_base).exp();
                if let Some(g) = grad {
                    let base = 1.0 + x;
                    g[0] = k / base * r2 / (l * l);
                    g[1] = k * alpha * (x / base - log_base);
                }
                k
            }
            KernelKind::Rbf => {
                let l = p[0];
                let r2 = sq_dist(a, b);
                let k = (-0.5 * r2 / (l * l)).exp();
                if let Some(g) = grad {
                    g[0] = k * r2 / (l * l);
                }
                k
            }
            KernelKind::Matern(nu) => {
                let l = p[0];
                let r = sq_dist(a, b).sqrt();
                let (k, dk) = match nu {
                    MaternSmoothness::Half => {
                        let s = r / l;
                        let e = (-s).exp();
                        (e, s * e)
                    }
                    MaternSmoothness::ThreeHalves => {
                        let s = 3.0_f64.sqrt() * r / l;
                        let e = (-s).exp();
                        ((1.0 + s) * e, s * s * e)
                    }
                    MaternSmoothness::FiveHalves => {
                        let s = 5.0_f64.sqrt() * r / l;
                        let e = (-s).exp();
                        ((1.0 + s + s * s / 3.0) * e, s * s * (1.0 + s) / 3.0 * e)
                    }
                };
                if let Some(g) = grad {
                    g[0] = dk;
                }
                k
            }
            KernelKind::Periodic => {
                // product over coordinates of the 1-D periodic kernel
                let l = p[0];
                let period = p[1];
                let mut s = 0.0;
                let mut ds = 0.0;
                for d in 0..3 {
                    let delta = a[d] - b[d];
                    let x = PI * delta / period;
                    let sx = x.sin();
                    s += sx * sx;
                    ds += (2.0 * x).sin() * delta;
                }
                let k = (-2.0 * s / (l * l)).exp();
                if let Some(g) = grad {
                    g[0] = k * 4.0 * s / (l * l);
                    g[1] = k * 2.0 * PI * ds / (l * l * period);
                }
                k
            }
            KernelKind::Linear => {
                let k = p[0] * dot(a, b);
                if let Some(g) = grad {
                    g[0] = k;
                }
                k
            }
            KernelKind::Polynomial { degree } => {
                let c0 = p[0];
                let base = dot(a, b) + c0;
                let k = base.powi(degree as i32);
                if let Some(g) = grad {
                    g[0] = degree as f64 * base.powi(degree as i32 - 1) * c0;
                }
                k
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_dirs(rng: &mut ChaCha8Rng, n: usize) -> Vec<SphericalDirection> {
        (0..n)
            .map(|_| {
                SphericalDirection::new(rng.random_range(0.0..PI), rng.random_range(0.0..TAU))
            })
            .collect()
    }

    fn all_kernels(mode: DistanceMode) -> Vec<Kernel> {
        vec![
            Kernel::rational_quadratic(0.7, 1.3).with_mode(mode),
            Kernel::rbf(0.6).with_mode(mode),
            Kernel::new(KernelKind::Matern(MaternSmoothness::Half), mode).with_param("lengthscale", 0.8),
            Kernel::new(KernelKind::Matern(MaternSmoothness::ThreeHalves), mode).with_param("lengthscale", 0.8),
            Kernel::new(KernelKind::Matern(MaternSmoothness::FiveHalves), mode).with_param("lengthscale", 0.8),
            Kernel::new(KernelKind::Periodic, mode)
                .with_param("lengthscale", 0.9)
                .with_param("period", 2.5),
            Kernel::new(KernelKind::Linear, mode).with_param("variance", 0.4),
            Kernel::new(KernelKind::Polynomial { degree: 3 }, mode).with_param("offset", 0.5),
        ]
    }

    #[test]
    fn input_distance_examples() {
        let a = SphericalDirection::new(0.4, 1.2);
        assert_eq!(input_distance(a, a, DistanceMode::ParamEuclidean), 0.0);
        assert_eq!(input_distance(a, a, DistanceMode::BearingEuclidean), 0.0);

        let e0 = SphericalDirection::new(PI / 2.0, 0.0);
        let e1 = SphericalDirection::new(PI / 2.0, PI);
        assert!((input_distance(e0, e1, DistanceMode::BearingEuclidean) - 2.0).abs() < 1e-15);

        // both are the north pole, but parameter distance sees the seam
        let p0 = SphericalDirection::new(0.0, 0.0);
        let p1 = SphericalDirection::new(0.0, PI);
        assert_eq!(input_distance(p0, p1, DistanceMode::ParamEuclidean), PI);
        assert!(input_distance(p0, p1, DistanceMode::BearingEuclidean) < 1e-15);
    }

    #[test]
    fn rq_values() {
        let k = Kernel::rational_quadratic(1.0, 1.0);
        let a = SphericalDirection::new(0.3, 2.0);
        assert_eq!(k.eval(a, a), 1.0);
        // d = sqrt(2): (1 + 2/2)^-1
        let b = SphericalDirection::new(1.3, 3.0);
        assert!((k.eval(a, b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rq_approaches_rbf_for_large_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rq = Kernel::rational_quadratic(0.8, 1e6);
        let rbf = Kernel::rbf(0.8);
        let x = random_dirs(&mut rng, 200);
        for w in x.windows(2) {
            assert!((rq.eval(w[0], w[1]) - rbf.eval(w[0], w[1])).abs() < 1e-4);
        }
    }

    #[test]
    fn symmetric_and_stationary_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_dirs(&mut rng, 30);
        for mode in [DistanceMode::ParamEuclidean, DistanceMode::BearingEuclidean] {
            for k in all_kernels(mode) {
                for a in &x {
                    for b in &x {
                        assert_eq!(k.eval(*a, *b), k.eval(*b, *a), "{}", k.kind());
                    }
                }
                if k.kind().is_stationary() {
                    let d0 = k.eval(x[0], x[0]);
                    for a in &x {
                        assert_eq!(k.eval(*a, *a), d0);
                    }
                }
            }
        }
    }

    #[test]
    fn gram_shape_and_diagonal() {
        let k = Kernel::rational_quadratic(0.5, 2.0);
        let a = SphericalDirection::new(1.0, 1.0);
        let g = k.gram(&[a]);
        assert_eq!(g.dim(), 1);
        assert_eq!(g.get(0, 0), k.eval(a, a));
    }

    fn min_max_eig(m: &Mat<f64>) -> (f64, f64) {
        let ev = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        (ev[0], *ev.last().unwrap())
    }

    #[test]
    fn duplicated_input_makes_gram_singular() {
        let k = Kernel::rational_quadratic(0.5, 1.0);
        let a = SphericalDirection::new(1.0, 1.0);
        let b = SphericalDirection::new(2.0, 0.5);
        let (lo, _) = min_max_eig(k.gram(&[a, b, a]).as_mat());
        assert!(lo.abs() < 1e-12);
    }

    #[test]
    fn gram_is_psd_for_every_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [DistanceMode::ParamEuclidean, DistanceMode::BearingEuclidean] {
            for k in all_kernels(mode) {
                for _ in 0..10 {
                    let x = random_dirs(&mut rng, 40);
                    let (lo, hi) = min_max_eig(k.gram(&x).as_mat());
                    assert!(lo >= -1e-8 * hi, "{} {mode}: {lo} vs {hi}", k.kind());
                }
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_dirs(&mut rng, 20);
        let h = 1e-5;
        for mode in [DistanceMode::ParamEuclidean, DistanceMode::BearingEuclidean] {
            for k in all_kernels(mode) {
                let analytic = k.grad_hyperparams(&x);
                for (p, a) in analytic.iter().enumerate() {
                    let mut plus = k.clone();
                    let mut minus = k.clone();
                    let mut lp = k.log_params().to_vec();
                    lp[p] += h;
                    plus.set_log_params(&lp);
                    lp[p] -= 2.0 * h;
                    minus.set_log_params(&lp);
                    let kp = plus.gram(&x);
                    let km = minus.gram(&x);
                    let scale = (0..x.len())
                        .flat_map(|i| (0..x.len()).map(move |j| (i, j)))
                        .map(|(i, j)| a[(i, j)].abs())
                        .fold(1e-12, f64::max);
                    for i in 0..x.len() {
                        for j in 0..x.len() {
                            let fd = (kp.get(i, j) - km.get(i, j)) / (2.0 * h);
                            let err = (fd - a[(i, j)]).abs() / scale;
                            assert!(err < 1e-5, "{} {mode} param {p}: {err}", k.kind());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rbf_gradient_vanishes_for_huge_lengthscale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_dirs(&mut rng, 10);
        let g = Kernel::rbf(1e6).grad_hyperparams(&x);
        for i in 0..10 {
            for j in 0..10 {
                assert!(g[0][(i, j)].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_gradient_is_the_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_dirs(&mut rng, 10);
        let k = Kernel::new(KernelKind::Linear, DistanceMode::ParamEuclidean).with_param("variance", 2.5);
        let g = k.grad_hyperparams(&x);
        let gram = k.gram(&x);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(g[0][(i, j)], gram.get(i, j));
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in KernelKind::ABLATION_SET {
            assert_eq!(kind.to_string().parse::<KernelKind>().unwrap(), kind);
            assert_eq!(KernelKind::from_tag(kind.tag(), kind.fixed_param()), Some(kind));
        }
        assert!("nope".parse::<KernelKind>().is_err());
        assert_eq!(
            "poly5".parse::<KernelKind>().unwrap(),
            KernelKind::Polynomial { degree: 5 }
        );
    }

    #[test]
    fn median_heuristic_sets_lengthscale() {
        let mut k = Kernel::rbf(1.0);
        let x = vec![
            SphericalDirection::new(0.0, 0.0),
            SphericalDirection::new(1.0, 0.0),
            SphericalDirection::new(3.0, 0.0),
        ];
        k.init_lengthscale_median(&x);
        // pairwise distances 1, 3, 2
        assert!((k.param("lengthscale").unwrap() - 2.0).abs() < 1e-12);
    }
}
