use rayon::prelude::*;

use super::{fibonacci_sphere, Point3, UnitVector};
use crate::error::{Error, Result};

/// Hits closer than this to the ray origin are ignored.
pub const RAY_EPSILON: f64 = 1e-9;

const CAMERA_RADIUS: f64 = 1.5;
const DEDUP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates face indices and drops zero-area triangles.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        for (i, f) in faces.into_iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {i} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            let area2 = (b - a).cross(c - a).norm();
            let longest = (b - a)
                .norm_squared()
                .max((c - a).norm_squared())
                .max((c - b).norm_squared());
            if area2 > 1e-12 * longest && area2 > 0.0 {
                kept.push(f);
            }
        }
        Ok(TriangleMesh {
            vertices,
            faces: kept,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(Point3) -> Point3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Concatenates two meshes without merging vertices.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]),
        );
        TriangleMesh { vertices, faces }
    }

    /// Nearest intersection by scanning every triangle.
    pub fn raycast_first_hit(&self, origin: Point3, dir: UnitVector) -> Option<Hit> {
        let d = dir.as_point();
        let mut best: Option<f64> = None;
        for face in 0..self.faces.len() {
            if let Some(t) = intersect(&self.triangle(face), origin, d) {
                if best.map_or(true, |b| t < b) {
                    best = Some(t);
                }
            }
        }
        best.map(|t| Hit {
            point: origin + d * t,
            distance: t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    pub distance: f64,
}

/// Möller–Trumbore ray/triangle test. Returns the ray parameter of the hit.
fn intersect(tri: &[Point3; 3], origin: Point3, dir: Point3) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > RAY_EPSILON).then_some(t)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: Point3) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }

    /// Slab test; returns the entry parameter if the ray meets the box before `t_max`.
    fn entry(&self, origin: Point3, inv_dir: Point3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let o = origin.component(axis);
            let inv = inv_dir.component(axis);
            let mut a = (self.lo.component(axis) - o) * inv;
            let mut b = (self.hi.component(axis) - o) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN from 0 * inf keeps the previous bound
            if a > t0 {
                t0 = a;
            }
            if b < t1 {
                t1 = b;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding-volume hierarchy over a mesh's triangles (median split on the
/// longest centroid axis).
#[derive(Debug, Clone)]
pub struct Bvh<'a> {
    mesh: &'a TriangleMesh,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl<'a> Bvh<'a> {
    pub fn build(mesh: &'a TriangleMesh) -> Self {
        let centroids: Vec<Point3> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh {
            mesh,
            order: (0..mesh.faces.len()).collect(),
            nodes: Vec::new(),
        };
        if !mesh.faces.is_empty() {
            bvh.build_node(&centroids, 0, mesh.faces.len());
        }
        bvh
    }

    fn build_node(&mut self, centroids: &[Point3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &f in &self.order[start..end] {
            for p in self.mesh.triangle(f) {
                bounds.grow(p);
            }
            cbounds.grow(centroids[f]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let extent = cbounds.hi - cbounds.lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a]
                .component(axis)
                .total_cmp(&centroids[b].component(axis))
                .then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf {
            bounds,
            start: 0,
            end: 0,
        });
        let left = self.build_node(centroids, start, mid);
        let right = self.build_node(centroids, mid, end);
        self.nodes[id] = Node::Inner {
            bounds,
            left,
            right,
        };
        id
    }

    pub fn first_hit(&self, origin: Point3, dir: UnitVector) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let d = dir.as_point();
        let inv = Point3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().entry(origin, inv, best).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[start..end] {
                        if let Some(t) = intersect(&self.mesh.triangle(f), origin, d) {
                            if t < best {
                                best = t;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let tl = self.nodes[left].bounds().entry(origin, inv, best);
                    let tr = self.nodes[right].bounds().entry(origin, inv, best);
                    match (tl, tr) {
                        (Some(a), Some(b)) if a <= b => {
                            stack.push(right);
                            stack.push(left);
                        }
                        (Some(_), Some(_)) => {
                            stack.push(left);
                            stack.push(right);
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.is_finite().then(|| Hit {
            point: origin + d * best,
            distance: best,
        })
    }

    fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| *n.bounds())
    }
}

/// Orthonormal frame whose third axis is `w`.
fn frame(w: Point3) -> (Point3, Point3) {
    let helper = if w.z.abs() < 0.9 {
        Point3::new(0.0, 0.0, 1.0)
    } else {
        Point3::new(1.0, 0.0, 0.0)
    };
    let u = helper.cross(w);
    let u = u / u.norm();
    (u, w.cross(u))
}

/// Targets on the unit hemisphere facing `axis`, in golden-spiral order.
fn hemisphere_targets(axis: Point3, n: usize) -> Vec<Point3> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let step = std::f64::consts::TAU * (1.0 - 1.0 / golden);
    let (u, v) = frame(axis);
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (step * i as f64).sin_cos();
            u * (r * c) + v * (r * s) + axis * z
        })
        .collect()
}

/// Ray-casts a dense point cloud from virtual cameras on a Fibonacci grid at
/// radius 1.5, keeping the first intersection of each ray.
///
/// The mesh is expected to lie inside the unit sphere. The result is sorted
/// lexicographically with near-duplicates (1e-9) removed, so it does not
/// depend on the order rays are processed in.
pub fn sample_surface(
    mesh: &TriangleMesh,
    n_cameras: usize,
    rays_per_camera: usize,
) -> Result<Vec<Point3>> {
    if n_cameras == 0 || rays_per_camera == 0 {
        return Err(Error::InvalidArgument(
            "sample_surface needs at least one camera and one ray per camera".into(),
        ));
    }
    if mesh.is_empty() {
        return Err(Error::NoSurfaceHit);
    }
    let bvh = Bvh::build(mesh);
    if let Some(b) = bvh.bounds() {
        let far = b.lo.norm().max(b.hi.norm());
        if far > CAMERA_RADIUS * 1.5 {
            log::warn!("mesh extends to {far:.3}; cameras at radius {CAMERA_RADIUS} may sit inside it");
        }
    }
    let cameras = fibonacci_sphere(n_cameras)?;
    let mut hits: Vec<Point3> = cameras
        .par_iter()
        .flat_map_iter(|cam| {
            let axis = cam.as_point();
            let eye = axis * CAMERA_RADIUS;
            let bvh = &bvh;
            hemisphere_targets(axis, rays_per_camera)
                .into_iter()
                .filter_map(move |t| UnitVector::new(t - eye).and_then(|d| bvh.first_hit(eye, d)))
                .map(|h| h.point)
        })
        .collect();
    if hits.is_empty() {
        return Err(Error::NoSurfaceHit);
    }
    hits.sort_by(Point3::total_cmp);
    hits.dedup_by(|a, b| {
        (a.x - b.x).abs() <= DEDUP_TOLERANCE
            && (a.y - b.y).abs() <= DEDUP_TOLERANCE
            && (a.z - b.z).abs() <= DEDUP_TOLERANCE
    });
    Ok(hits)
}
