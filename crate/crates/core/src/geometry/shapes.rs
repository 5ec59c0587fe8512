//! Procedural meshes used as fixtures: icospheres, boxes, tubes and the
//! two-lobe dumbbell.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{Point3, TriangleMesh};

/// Unit icosphere after `subdivisions` rounds of 4-way face splitting.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(|v| {
        let p = Point3::from(v);
        p / p.norm()
    })
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a] + vertices[b]) * 0.5;
                vertices.push(m / m.norm());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is well formed")
}

/// Sphere of the given radius and center.
pub fn sphere(subdivisions: u32, center: Point3, radius: f64) -> TriangleMesh {
    icosphere(subdivisions).map_vertices(|p| p * radius + center)
}

/// Axis-aligned box centered at the origin with the given half extents.
pub fn cuboid(half: Point3) -> TriangleMesh {
    let v: Vec<Point3> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(v, faces).expect("cuboid is well formed")
}

/// Open cylindrical tube along the x axis.
pub fn tube_x(x0: f64, x1: f64, radius: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((rings + 1) * segments);
    for r in 0..=rings {
        let x = x0 + (x1 - x0) * r as f64 / rings as f64;
        for s in 0..segments {
            let a = TAU * s as f64 / segments as f64;
            vertices.push(Point3::new(x, radius * a.cos(), radius * a.sin()));
        }
    }
    let mut faces = Vec::with_capacity(rings * segments * 2);
    for r in 0..rings {
        for s in 0..segments {
            let a = r * segments + s;
            let b = r * segments + (s + 1) % segments;
            let c = a + segments;
            let d = b + segments;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("tube is well formed")
}

/// Two unit spheres centered at (±1.5, 0, 0) joined by a tube of radius 0.3.
///
/// The tube runs slightly into both spheres so the union has no gaps; the
/// hidden parts are never reached by rays cast from outside.
pub fn dumbbell(subdivisions: u32, tube_segments: usize) -> TriangleMesh {
    sphere(subdivisions, Point3::new(-1.5, 0.0, 0.0), 1.0)
        .merged(&sphere(subdivisions, Point3::new(1.5, 0.0, 0.0), 1.0))
        .merged(&tube_x(-0.6, 0.6, 0.3, tube_segments, 12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        let m = icosphere(3);
        assert_eq!(m.faces().len(), 1280);
        assert_eq!(m.vertices().len(), 642);
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }
}
