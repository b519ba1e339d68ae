//! Static 3-d tree over a fixed point set with exact radius queries.

use nalgebra::Vector3;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced kd-tree. Points are stored reordered so that every leaf owns a
/// contiguous slice.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut nodes = Vec::with_capacity(2 * pts.len() / LEAF_SIZE + 1);
        if !pts.is_empty() {
            let n = pts.len();
            build_node(&mut pts, 0, n, &mut nodes);
        }
        Self { points: pts, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(|p| Vector3::new(p[0], p[1], p[2]))
    }

    /// Number of points with `|p - center| <= radius`.
    pub fn count_within(&self, center: &Vector3<f64>, radius: f64) -> usize {
        self.count_within_limited(center, radius, usize::MAX, |_| true)
    }

    /// Counts points within `radius` of `center` accepted by `keep`, stopping
    /// as soon as `limit` is reached.
    pub fn count_within_limited<F>(
        &self,
        center: &Vector3<f64>,
        radius: f64,
        limit: usize,
        keep: F,
    ) -> usize
    where
        F: Fn(&[f64; 3]) -> bool,
    {
        let mut count = 0;
        if self.nodes.is_empty() || limit == 0 {
            return 0;
        }
        let c = [center.x, center.y, center.z];
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            match self.nodes[idx] {
                Node::Leaf { start, end } => {
                    for p in &self.points[start..end] {
                        if dist2(p, &c) <= r2 && keep(p) {
                            count += 1;
                            if count >= limit {
                                return count;
                            }
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = c[axis] - value;
                    let (near, far) = if diff <= 0.0 {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    if diff * diff <= r2 {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        count
    }

    /// All points within `radius` of `center`, in storage order.
    pub fn within(&self, center: &Vector3<f64>, radius: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let c = [center.x, center.y, center.z];
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            match self.nodes[idx] {
                Node::Leaf { start, end } => out.extend(
                    self.points[start..end]
                        .iter()
                        .filter(|p| dist2(p, &c) <= r2)
                        .map(|p| Vector3::new(p[0], p[1], p[2])),
                ),
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = c[axis] - value;
                    if diff <= 0.0 || diff * diff <= r2 {
                        stack.push(left);
                    }
                    if diff >= 0.0 || diff * diff <= r2 {
                        stack.push(right);
                    }
                }
            }
        }
        out
    }

    /// Nearest stored point and its distance; `None` on an empty tree.
    pub fn nearest(&self, center: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let c = [center.x, center.y, center.z];
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, &c, &mut best);
        let p = self.points[best.0];
        Some((Vector3::new(p[0], p[1], p[2]), best.1.sqrt()))
    }

    fn nearest_rec(&self, idx: usize, c: &[f64; 3], best: &mut (usize, f64)) {
        match self.nodes[idx] {
            Node::Leaf { start, end } => {
                for (i, p) in self.points[start..end].iter().enumerate() {
                    let d = dist2(p, c);
                    if d < best.1 {
                        *best = (start + i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = c[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, c, best);
                if diff * diff < best.1 {
                    self.nearest_rec(far, c, best);
                }
            }
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_node(pts: &mut [[f64; 3]], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let idx = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return idx;
    }
    let slice = &mut pts[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in slice.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf { start, end });
        return idx;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = slice[mid][axis];
    // Left subtree holds coordinates <= value, right holds >= value.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(pts, start, start + mid, nodes);
    let right = build_node(pts, start + mid, end, nodes);
    nodes[idx] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_count(points: &[Vector3<f64>], c: &Vector3<f64>, r: f64) -> usize {
        points.iter().filter(|p| (*p - c).norm_squared() <= r * r).count()
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::build(&[]);
        assert_eq!(t.count_within(&Vector3::zeros(), 10.0), 0);
        assert!(t.nearest(&Vector3::zeros()).is_none());
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let points: Vec<_> = (0..1000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..100 {
            let c = Vector3::new(
                rng.random_range(-22.0..22.0),
                rng.random_range(-22.0..22.0),
                rng.random_range(-6.0..6.0),
            );
            let r = rng.random_range(0.1..6.0);
            assert_eq!(tree.count_within(&c, r), brute_count(&points, &c, r));
            assert_eq!(tree.within(&c, r).len(), brute_count(&points, &c, r));
            let (_, d) = tree.nearest(&c).unwrap();
            let bd = points
                .iter()
                .map(|p| (p - c).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((d - bd).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_and_limits() {
        let points = vec![Vector3::new(1.0, 1.0, 1.0); 100];
        let tree = KdTree::build(&points);
        assert_eq!(tree.count_within(&Vector3::new(1.0, 1.0, 1.5), 0.5), 100);
        assert_eq!(
            tree.count_within_limited(&Vector3::new(1.0, 1.0, 1.0), 0.1, 5, |_| true),
            5
        );
    }
}
