//! Static kd-tree for k-nearest-neighbour queries over point clouds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Point3;

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

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Bounding box of each node's points.
    boxes: Vec<(Point3, Point3)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: Vec<Point3>) -> Self {
        let mut tree = KdTree {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        if !tree.points.is_empty() {
            tree.build(0, tree.points.len());
        }
        tree
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let mut lo = self.points[self.order[start]];
        let mut hi = lo;
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        self.boxes.push((lo, hi));
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `q` as `(index, distance)`, nearest first.
    pub fn nearest(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, &mut heap);
        let mut out: Vec<_> = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| (c.index, c.dist2.sqrt()))
            .collect();
        out.truncate(k);
        out
    }

    pub fn nearest_one(&self, q: &Point3) -> Option<(usize, f64)> {
        self.nearest(q, 1).into_iter().next()
    }

    #[inline]
    fn box_dist2(&self, node: usize, q: &Point3) -> f64 {
        let (lo, hi) = &self.boxes[node];
        let mut d2 = 0.0;
        for a in 0..3 {
            let e = (lo[a] - q[a]).max(q[a] - hi[a]).max(0.0);
            d2 += e * e;
        }
        d2
    }

    fn search(&self, node: usize, q: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = (self.points[i] - q).norm_squared();
                    if heap.len() < k {
                        heap.push(Candidate { dist2, index: i });
                    } else if dist2 < heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
                        heap.pop();
                        heap.push(Candidate { dist2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let (near, far) = if q[axis] < value {
                    (left, right)
                } else {
                    (right, left)
                };
                for child in [near, far] {
                    let worst = if heap.len() < k {
                        f64::INFINITY
                    } else {
                        heap.peek().unwrap().dist2
                    };
                    if self.box_dist2(child, q) < worst {
                        self.search(child, q, k, heap);
                    }
                }
            }
        }
    }
}
