//! Exact nearest-neighbor search over a point slice.
//!
//! The tree answers queries identically to a linear scan, including ties:
//! among equidistant points the lowest index wins. That determinism is what
//! lets callers validate against a brute-force reference bit for bit.

use crate::geom::Point3;

fn coord(p: &Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn dist_sq(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// A kd-tree over borrowed points. Median-split, axes cycled by depth.
pub struct KdTree<'a> {
    points: &'a [Point3],
    // Point indices arranged so that each subtree occupies a contiguous
    // slice with its median at the middle position.
    order: Vec<u32>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        build_recursive(points, &mut order, 0);
        KdTree { points, order }
    }

    /// Index of the nearest point to `query`; ties broken by lowest index.
    pub fn nearest(&self, query: &Point3) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Best {
            dist_sq: f64::INFINITY,
            index: u32::MAX,
        };
        self.search(&self.order, 0, query, &mut best);
        Some(best.index as usize)
    }

    fn search(&self, slice: &[u32], depth: usize, query: &Point3, best: &mut Best) {
        if slice.is_empty() {
            return;
        }
        let mid = slice.len() / 2;
        let idx = slice[mid];
        let p = &self.points[idx as usize];
        best.offer(dist_sq(p, query), idx);

        let axis = depth % 3;
        let delta = coord(query, axis) - coord(p, axis);
        let (near, far) = if delta <= 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(near, depth + 1, query, best);
        // <= so an equidistant, lower-index point on the far side is found.
        if delta * delta <= best.dist_sq {
            self.search(far, depth + 1, query, best);
        }
    }
}

struct Best {
    dist_sq: f64,
    index: u32,
}

impl Best {
    fn offer(&mut self, d: f64, i: u32) {
        if d < self.dist_sq || (d == self.dist_sq && i < self.index) {
            self.dist_sq = d;
            self.index = i;
        }
    }
}

fn build_recursive(points: &[Point3], slice: &mut [u32], depth: usize) {
    if slice.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coord(&points[a as usize], axis)
            .partial_cmp(&coord(&points[b as usize], axis))
            .unwrap()
            .then(a.cmp(&b))
    });
    let (lo, rest) = slice.split_at_mut(mid);
    build_recursive(points, lo, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

/// Linear-scan reference with the same tie rule as the tree.
pub fn nearest_brute_force(points: &[Point3], query: &Point3) -> Option<usize> {
    let mut best = Best {
        dist_sq: f64::INFINITY,
        index: u32::MAX,
    };
    if points.is_empty() {
        return None;
    }
    for (i, p) in points.iter().enumerate() {
        best.offer(dist_sq(p, query), i as u32);
    }
    Some(best.index as usize)
}
