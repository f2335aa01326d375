//! Exact nearest-neighbor search over 3D points.

use crate::Vec3;

/// Distance used by a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Coordinate-wise L1 norm of the difference.
    L1,
    /// Squared Euclidean distance.
    L2Squared,
}

impl Metric {
    #[inline]
    pub fn eval(self, a: &Vec3, b: &Vec3) -> f64 {
        let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
        match self {
            Metric::L1 => dx.abs() + dy.abs() + dz.abs(),
            Metric::L2Squared => dx * dx + dy * dy + dz * dz,
        }
    }

    /// Lower bound on the distance to any point whose coordinate along one
    /// axis differs by `gap`.
    #[inline]
    fn axis_bound(self, gap: f64) -> f64 {
        match self {
            Metric::L1 => gap.abs(),
            Metric::L2Squared => gap * gap,
        }
    }
}

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// kd-tree over a point set (or a subset of one).
///
/// Queries return the same point a brute-force scan would: the smallest
/// distance, ties resolved toward the lowest original index.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Vec3>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl NnIndex {
    pub fn build(points: &[Vec3]) -> Self {
        let ids: Vec<usize> = (0..points.len()).collect();
        Self::build_subset(points, &ids)
    }

    /// Index over `points[i]` for `i` in `subset`. Query results report the
    /// original indices.
    pub fn build_subset(points: &[Vec3], subset: &[usize]) -> Self {
        let mut ids = subset.to_vec();
        let mut nodes = Vec::new();
        if !ids.is_empty() {
            build_node(points, &mut ids, 0, &mut nodes);
        }
        let pts = ids.iter().map(|&i| points[i]).collect();
        Self {
            points: pts,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Nearest indexed point to `q`: `(original index, distance)`.
    /// `None` when the index is empty.
    pub fn nearest(&self, q: &Vec3, metric: Metric) -> Option<(usize, f64)> {
        if self.ids.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, metric, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, metric: Metric, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d = metric.eval(q, &self.points[k]);
                    let id = self.ids[k];
                    if d < best.1 || (d == best.1 && id < best.0) {
                        *best = (id, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let gap = q[axis] - value;
                let (near, far) = if gap <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, metric, best);
                // Equal bounds are still visited so lower-index ties are found.
                if !(metric.axis_bound(gap) > best.1) {
                    self.search(far, q, metric, best);
                }
            }
        }
    }
}

/// Builds the subtree over `ids[..]`, whose slice starts at absolute offset
/// `offset`, and returns its node index.
fn build_node(points: &[Vec3], ids: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let mut lo = points[ids[0]];
    let mut hi = lo;
    for &i in ids.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let extent = hi - lo;
    let axis = extent.imax();
    if extent[axis] == 0.0 {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[ids[mid]][axis];
    // placeholder, patched once the children exist
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = ids.split_at_mut(mid);
    let left = build_node(points, l, offset, nodes);
    let right = build_node(points, r, offset + mid, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}
