//! Reference points and the split of a cloud into per-center training sets.
//!
//! Every center `C_k` comes with a symmetric positive definite matrix `Q_k`;
//! a point's affinity to cluster `k` is `exp(-(P - C_k)^T Q_k (P - C_k))`,
//! normalized over clusters.

mod em;
mod kmeans;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::metrics::KdTree;

pub use em::{em_gmm, fit_gmm, GmmFit};
pub use kmeans::{kmeans, kmeans_with_trace};

pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.15;

/// Only points at or above this percentile of affinity to the borrowing
/// cluster are eligible for overlap.
const OVERLAP_PERCENTILE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    KMeans,
    Em,
    Manual,
}

impl ReferenceSource {
    pub fn tag(self) -> u8 {
        match self {
            ReferenceSource::KMeans => 0,
            ReferenceSource::Em => 1,
            ReferenceSource::Manual => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ReferenceSource::KMeans),
            1 => Some(ReferenceSource::Em),
            2 => Some(ReferenceSource::Manual),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceSource::KMeans => "kmeans",
            ReferenceSource::Em => "em",
            ReferenceSource::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    centers: Vec<Point3>,
    weight_matrices: Vec<Matrix3<f64>>,
    source: ReferenceSource,
}

impl ReferenceSet {
    pub fn new(
        centers: Vec<Point3>,
        weight_matrices: Vec<Matrix3<f64>>,
        source: ReferenceSource,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyInput("reference centers"));
        }
        if centers.len() != weight_matrices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} centers but {} weight matrices",
                centers.len(),
                weight_matrices.len()
            )));
        }
        if let Some(k) = centers.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("center {k} is not finite")));
        }
        for (k, q) in weight_matrices.iter().enumerate() {
            let sym = (q - q.transpose()).abs().max() <= 1e-12 * q.abs().max().max(1.0);
            let min_eig = q.symmetric_eigenvalues().min();
            if !sym || !(min_eig > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight matrix {k} is not symmetric positive definite"
                )));
            }
        }
        Ok(ReferenceSet {
            centers,
            weight_matrices,
            source,
        })
    }

    /// Centers with identity weight matrices.
    pub fn with_identity(centers: Vec<Point3>, source: ReferenceSource) -> Result<Self> {
        let q = vec![Matrix3::identity(); centers.len()];
        ReferenceSet::new(centers, q, source)
    }

    /// User-supplied centers, in normalized model coordinates.
    pub fn manual(centers: Vec<Point3>) -> Result<Self> {
        ReferenceSet::with_identity(centers, ReferenceSource::Manual)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point3] {
        &self.centers
    }

    pub fn weight_matrices(&self) -> &[Matrix3<f64>] {
        &self.weight_matrices
    }

    pub fn source(&self) -> ReferenceSource {
        self.source
    }

    /// `(p - C_k)^T Q_k (p - C_k)`.
    pub fn quadratic_form(&self, k: usize, p: Point3) -> f64 {
        let d = p - self.centers[k];
        let v = Vector3::new(d.x, d.y, d.z);
        v.dot(&(self.weight_matrices[k] * v))
    }

    /// Softmax of the negated quadratic forms, computed with max subtraction.
    pub fn weights(&self, p: Point3) -> Vec<f64> {
        let mut w: Vec<f64> = (0..self.len()).map(|k| -self.quadratic_form(k, p)).collect();
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in &mut w {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in &mut w {
            *x /= sum;
        }
        w
    }

    /// Cluster with the highest weight at `p`; ties go to the lowest index.
    pub fn nearest(&self, p: Point3) -> usize {
        let mut best = 0;
        let mut best_q = self.quadratic_form(0, p);
        for k in 1..self.len() {
            let q = self.quadratic_form(k, p);
            if q < best_q {
                best = k;
                best_q = q;
            }
        }
        best
    }

    /// Best and second-best cluster at `p` (the second equals the first when K = 1).
    fn two_nearest(&self, p: Point3) -> (usize, usize) {
        let mut order: Vec<(f64, usize)> = (0..self.len())
            .map(|k| (self.quadratic_form(k, p), k))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        (order[0].1, order.get(1).map_or(order[0].1, |o| o.1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Primary cluster of each point.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Point indices used to train each cluster, in ascending order.
    pub fn overlap_members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn primary_members(&self, k: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == k)
            .collect()
    }

    pub fn primary_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.members.len()];
        for &a in &self.assignment {
            c[a] += 1;
        }
        c
    }
}

/// Assigns every point to its highest-weight cluster.
pub fn assign(points: &[Point3], refs: &ReferenceSet) -> Partition {
    let assignment: Vec<usize> = points.iter().map(|&p| refs.nearest(p)).collect();
    let mut members = vec![Vec::new(); refs.len()];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    Partition {
        assignment,
        members,
    }
}

/// Lets each cluster `k` borrow boundary points from its neighbours.
///
/// From each other cluster `j`, the candidates are members of `j` whose
/// runner-up cluster is `k` and whose weight for `k` is at least the 80th
/// percentile of that weight over all members of `j`. The
/// `floor(fraction * |j|)` candidates with the highest weight for `k` are added.
pub fn expand_overlap(
    partition: &Partition,
    points: &[Point3],
    refs: &ReferenceSet,
    fraction: f64,
) -> Result<Partition> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "overlap fraction must lie in [0, 1), got {fraction}"
        )));
    }
    if partition.assignment.len() != points.len() || partition.num_clusters() != refs.len() {
        return Err(Error::InvalidArgument("partition does not match points and references".into()));
    }
    let k_count = refs.len();
    let primary: Vec<Vec<usize>> = (0..k_count).map(|k| partition.primary_members(k)).collect();
    let mut members = primary.clone();
    if fraction == 0.0 || k_count == 1 {
        return Ok(Partition {
            assignment: partition.assignment.clone(),
            members,
        });
    }
    let weights: Vec<Vec<f64>> = points.iter().map(|&p| refs.weights(p)).collect();
    let runner_up: Vec<usize> = points.iter().map(|&p| refs.two_nearest(p).1).collect();

    for (j, from) in primary.iter().enumerate() {
        let cap = (fraction * from.len() as f64).floor() as usize;
        if cap == 0 {
            continue;
        }
        for (k, into) in members.iter_mut().enumerate() {
            if k == j {
                continue;
            }
            let mut w: Vec<f64> = from.iter().map(|&i| weights[i][k]).collect();
            w.sort_by(f64::total_cmp);
            let gate = w[((w.len() - 1) as f64 * OVERLAP_PERCENTILE).floor() as usize];
            let mut candidates: Vec<usize> = from
                .iter()
                .copied()
                .filter(|&i| runner_up[i] == k && weights[i][k] >= gate)
                .collect();
            candidates.sort_by(|&a, &b| weights[b][k].total_cmp(&weights[a][k]).then(a.cmp(&b)));
            candidates.truncate(cap);
            into.extend(candidates);
        }
    }
    for m in &mut members {
        m.sort_unstable();
        m.dedup();
    }
    Ok(Partition {
        assignment: partition.assignment.clone(),
        members,
    })
}

/// Per cluster, the fraction of member points whose segment from the center
/// passes through other parts of the cloud before reaching the point.
///
/// A segment counts as blocked when some cloud point lies within `radius` of
/// it farther than `2 * radius` from its endpoint. Such points cannot be seen
/// from the center and make the directional distance field multi-valued.
/// `radius` defaults to twice the mean nearest-neighbour spacing.
pub fn occlusion_fractions(
    points: &[Point3],
    refs: &ReferenceSet,
    partition: &Partition,
    radius: Option<f64>,
) -> Vec<f64> {
    if points.len() < 2 {
        return vec![0.0; refs.len()];
    }
    let tree = KdTree::new(points);
    let radius = radius.unwrap_or_else(|| 2.0 * mean_spacing(points, &tree));
    partition
        .overlap_members()
        .iter()
        .enumerate()
        .map(|(k, members)| {
            if members.is_empty() {
                return 0.0;
            }
            let c = refs.centers()[k];
            let blocked = members
                .iter()
                .filter(|&&i| segment_blocked(&tree, c, points[i], radius))
                .count();
            blocked as f64 / members.len() as f64
        })
        .collect()
}

/// True if some cloud point lies within `radius` of the segment from `c` to
/// `p`, ignoring the last `2 * radius` before `p`.
fn segment_blocked(tree: &KdTree, c: Point3, p: Point3, radius: f64) -> bool {
    let len = p.distance(c);
    let reach = len - 2.0 * radius;
    if reach <= 0.0 {
        return false;
    }
    let step = 0.5 * radius;
    let steps = (reach / step).ceil() as usize;
    (0..=steps).any(|s| {
        let t = (s as f64 * step).min(reach) / len;
        let q = c + (p - c) * t;
        tree.nearest_distance_squared(q).is_some_and(|d| d < radius * radius)
    })
}

fn mean_spacing(points: &[Point3], tree: &KdTree) -> f64 {
    let stride = points.len().div_ceil(2000);
    let d: Vec<f64> = (0..points.len())
        .step_by(stride)
        .filter_map(|i| tree.nearest_excluding(points[i], i))
        .map(|(_, d2)| d2.sqrt())
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}
