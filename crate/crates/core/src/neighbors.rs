//! Exact k-nearest-neighbour search.
//!
//! Neighbours are ordered by (distance, index): equal distances resolve to
//! the smaller index. The query point itself is always excluded by index,
//! so exact duplicates at distance 0 still count as neighbours.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::par;

/// Search backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// k-d tree for low dimensions, brute force otherwise.
    #[default]
    Auto,
    BruteForce,
    KdTree,
}

const KD_MAX_DIM: usize = 12;
const KD_MIN_POINTS: usize = 64;
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    sq_dist: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(self.index.cmp(&other.index))
    }
}

/// Bounded max-heap keeping the k best candidates.
struct Best {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.sq_dist)
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

enum Node {
    Leaf(Vec<usize>),
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static k-d tree over the rows of an [`EmbeddingMatrix`].
pub struct KdTree<'a> {
    points: &'a EmbeddingMatrix,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a EmbeddingMatrix) -> Self {
        let indices: Vec<usize> = (0..points.rows()).collect();
        let root = Self::build_node(points, indices);
        KdTree { points, root }
    }

    fn build_node(points: &EmbeddingMatrix, mut indices: Vec<usize>) -> Node {
        if indices.len() <= LEAF_SIZE || points.dim() == 0 {
            return Node::Leaf(indices);
        }
        let axis = (0..points.dim())
            .map(|a| {
                let (lo, hi) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = points.row(i)[a];
                    (lo.min(v), hi.max(v))
                });
                (a, hi - lo)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
            .map(|(a, _)| a)
            .unwrap_or(0);
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            points.row(a)[axis].total_cmp(&points.row(b)[axis]).then(a.cmp(&b))
        });
        let value = points.row(indices[mid])[axis];
        let right = indices.split_off(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, indices)),
            right: Box::new(Self::build_node(points, right)),
        }
    }

    /// The `k` nearest rows to `query`, skipping row `exclude` if given.
    fn search(&self, query: &[f64], exclude: Option<usize>, k: usize) -> Vec<Candidate> {
        let mut best = Best::new(k);
        self.visit(&self.root, query, exclude, &mut best);
        best.into_sorted()
    }

    fn visit(&self, node: &Node, query: &[f64], exclude: Option<usize>, best: &mut Best) {
        match node {
            Node::Leaf(indices) => {
                for &i in indices {
                    if Some(i) != exclude {
                        best.offer(Candidate {
                            sq_dist: squared_distance(query, self.points.row(i)),
                            index: i,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.visit(near, query, exclude, best);
                if diff * diff <= best.bound() {
                    self.visit(far, query, exclude, best);
                }
            }
        }
    }
}

fn brute_force(points: &EmbeddingMatrix, query: &[f64], exclude: Option<usize>, k: usize) -> Vec<Candidate> {
    let mut best = Best::new(k);
    for (i, row) in points.iter_rows().enumerate() {
        if Some(i) != exclude {
            best.offer(Candidate {
                sq_dist: squared_distance(query, row),
                index: i,
            });
        }
    }
    best.into_sorted()
}

fn resolve(strategy: Strategy, points: &EmbeddingMatrix) -> Strategy {
    match strategy {
        Strategy::Auto if points.dim() <= KD_MAX_DIM && points.rows() >= KD_MIN_POINTS => Strategy::KdTree,
        Strategy::Auto => Strategy::BruteForce,
        s => s,
    }
}

fn check_k(points: &EmbeddingMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if points.rows() <= k {
        return Err(Error::TooFew {
            what: "k-nearest-neighbour search (k + 1 points)",
            needed: k + 1,
            got: points.rows(),
        });
    }
    Ok(())
}

fn self_neighbors(points: &EmbeddingMatrix, k: usize, strategy: Strategy) -> Result<Vec<Vec<Candidate>>> {
    check_k(points, k)?;
    Ok(match resolve(strategy, points) {
        Strategy::KdTree => {
            let tree = KdTree::build(points);
            par::map_range(points.rows(), |i| tree.search(points.row(i), Some(i), k))
        }
        _ => par::map_range(points.rows(), |i| brute_force(points, points.row(i), Some(i), k)),
    })
}

/// Indices of the `k` nearest other rows of every row, nearest first.
pub fn knn_indices(points: &EmbeddingMatrix, k: usize, strategy: Strategy) -> Result<Vec<Vec<usize>>> {
    Ok(self_neighbors(points, k, strategy)?
        .into_iter()
        .map(|c| c.into_iter().map(|c| c.index).collect())
        .collect())
}

/// Squared distance from every row to its k-th nearest other row.
pub fn kth_neighbor_sq_distances(points: &EmbeddingMatrix, k: usize, strategy: Strategy) -> Result<Vec<f64>> {
    Ok(self_neighbors(points, k, strategy)?
        .into_iter()
        .map(|c| c[k - 1].sq_dist)
        .collect())
}

/// Nearest row of `points` to `query` as `(index, squared distance)`.
pub fn nearest(points: &EmbeddingMatrix, query: &[f64]) -> Option<(usize, f64)> {
    brute_force(points, query, None, 1)
        .first()
        .map(|c| (c.index, c.sq_dist))
}
