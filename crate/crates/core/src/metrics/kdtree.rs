//! Static 3-d tree for nearest-neighbour queries.
//!
//! Points are permuted in place so that every subrange `[lo, hi)` stores its
//! splitting point at `mid = (lo + hi) / 2`, smaller coordinates to the left.

use crate::geometry::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Original index of each stored point.
    index: Vec<usize>,
    /// Split axis of the node stored at each position (unused in leaves).
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut items: Vec<(Point3, usize)> = points.iter().copied().zip(0..).collect();
        let mut axis = vec![0u8; points.len()];
        build(&mut items, 0, &mut axis);
        let (points, index) = items.into_iter().unzip();
        KdTree {
            points,
            index,
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index (into the original slice) and squared distance of the point
    /// nearest to `q`. Ties go to whichever is found first.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), usize::MAX, &mut best);
        Some((self.index[best.0], best.1))
    }

    /// Like [`KdTree::nearest`] but never returns the point with original
    /// index `exclude`.
    pub fn nearest_excluding(&self, q: Point3, exclude: usize) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), exclude, &mut best);
        (best.0 != usize::MAX).then(|| (self.index[best.0], best.1))
    }

    pub fn nearest_distance_squared(&self, q: Point3) -> Option<f64> {
        self.nearest(q).map(|(_, d)| d)
    }

    fn search(&self, q: Point3, lo: usize, hi: usize, exclude: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d = q.distance_squared(self.points[i]);
                if d < best.1 && self.index[i] != exclude {
                    *best = (i, d);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axis[mid] as usize;
        let p = self.points[mid];
        let d = q.distance_squared(p);
        if d < best.1 && self.index[mid] != exclude {
            *best = (mid, d);
        }
        let diff = q.component(axis) - p.component(axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, exclude, best);
        if diff * diff < best.1 {
            self.search(q, far.0, far.1, exclude, best);
        }
    }
}

fn build(items: &mut [(Point3, usize)], offset: usize, axis_out: &mut [u8]) {
    let n = items.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = items[0].0;
    let mut hi = items[0].0;
    for (p, _) in items.iter() {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let spread = hi - lo;
    let axis = if spread.x >= spread.y && spread.x >= spread.z {
        0
    } else if spread.y >= spread.z {
        1
    } else {
        2
    };
    let mid = n / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        a.0.component(axis).total_cmp(&b.0.component(axis))
    });
    axis_out[offset + mid] = axis as u8;
    let (left, rest) = items.split_at_mut(mid);
    build(left, offset, axis_out);
    build(&mut rest[1..], offset + mid + 1, axis_out);
}
