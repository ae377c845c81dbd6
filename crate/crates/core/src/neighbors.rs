//! Exact k-nearest-neighbor search under the Euclidean metric.
//!
//! Neighbors are ranked by the total order `(squared distance, dataset index)`,
//! so equidistant points always come back lowest index first. Both the
//! kd-tree ([`NeighborIndex`]) and the linear scan ([`brute_force_knn`])
//! compute squared distances with the same routine, which makes their
//! results comparable entry for entry.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// One retrieved neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Neighbors sorted by distance, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|n| n.index)
    }

    /// The first `k` entries (the k nearest).
    pub fn truncated(&self, k: usize) -> &[Neighbor] {
        &self.entries[..k.min(self.entries.len())]
    }

    fn from_candidates(mut cands: Vec<Candidate>) -> Self {
        cands.sort_unstable();
        NeighborList {
            entries: cands
                .into_iter()
                .map(|c| Neighbor {
                    index: c.index,
                    distance: c.dist_sq.sqrt(),
                })
                .collect(),
        }
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist_sq: f64,
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
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

/// Bounded max-heap keeping the `k` smallest candidates.
struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    /// Squared distance a new point must not exceed to be admitted.
    #[inline]
    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist_sq)
        }
    }

    fn into_list(self) -> NeighborList {
        NeighborList::from_candidates(self.heap.into_vec())
    }
}

fn check_k(data: &Dataset, k: usize, exclude: Option<usize>) -> Result<()> {
    let available = data.len() - usize::from(exclude.is_some_and(|e| e < data.len()));
    if k > available {
        return Err(Error::KTooLarge { k, n: available });
    }
    Ok(())
}

/// Linear-scan k-NN; the correctness oracle for [`NeighborIndex`].
pub fn brute_force_knn(data: &Dataset, q: &[f64], k: usize) -> Result<NeighborList> {
    brute_force_knn_excluding(data, q, k, None)
}

/// [`brute_force_knn`] with one dataset position skipped.
pub fn brute_force_knn_excluding(
    data: &Dataset,
    q: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<NeighborList> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.check_query(q)?;
    check_k(data, k, exclude)?;
    let mut cands: Vec<Candidate> = (0..data.len())
        .filter(|&i| Some(i) != exclude)
        .map(|i| Candidate {
            dist_sq: squared_distance(q, data.point(i)),
            index: i,
        })
        .collect();
    cands.sort_unstable();
    cands.truncate(k);
    Ok(NeighborList::from_candidates(cands))
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug)]
struct KdTree {
    nodes: Vec<Node>,
    /// Dataset positions, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
    /// Features copied in `order` for cache-friendly leaf scans.
    points: Vec<f64>,
}

impl KdTree {
    fn build(data: &Dataset) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..data.len()).collect(),
            points: Vec::new(),
        };
        let n = data.len();
        let mut order = std::mem::take(&mut tree.order);
        tree.build_rec(data, &mut order, 0, n);
        tree.points = order
            .iter()
            .flat_map(|&i| data.point(i).iter().copied())
            .collect();
        tree.order = order;
        tree
    }

    fn build_rec(
        &mut self,
        data: &Dataset,
        order: &mut [usize],
        start: usize,
        end: usize,
    ) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut order[start..end];
        let dim = widest_dimension(data, slice);
        let mid = slice.len() / 2;
        let key = |&i: &usize| (data.point(i)[dim], i);
        slice.select_nth_unstable_by(mid, |a, b| {
            let (va, ia) = key(a);
            let (vb, ib) = key(b);
            va.total_cmp(&vb).then(ia.cmp(&ib))
        });
        let value = data.point(slice[mid])[dim];
        // placeholder, patched once children exist
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_rec(data, order, start, start + mid);
        let right = self.build_rec(data, order, start + mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Points in `left` satisfy `x[dim] <= value`, points in `right` satisfy `x[dim] >= value`.
    fn search(&self, dim_count: usize, q: &[f64], exclude: Option<usize>, top: &mut TopK) {
        let mut stack: Vec<(usize, f64)> = vec![(0, 0.0)];
        while let Some((node, lower)) = stack.pop() {
            if lower > top.bound() {
                continue;
            }
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for slot in start..end {
                        let index = self.order[slot];
                        if Some(index) == exclude {
                            continue;
                        }
                        let p = &self.points[slot * dim_count..(slot + 1) * dim_count];
                        top.offer(Candidate {
                            dist_sq: squared_distance(q, p),
                            index,
                        });
                    }
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[dim] - value;
                    let plane = diff * diff;
                    let (near, far) = if diff <= 0.0 {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    // far side pushed first so the near side is explored first
                    stack.push((far, lower.max(plane)));
                    stack.push((near, lower));
                }
            }
        }
    }
}

fn widest_dimension(data: &Dataset, idx: &[usize]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for d in 0..data.dim() {
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = data.point(i)[d];
                (lo.min(v), hi.max(v))
            });
        if hi - lo > best.1 {
            best = (d, hi - lo);
        }
    }
    best.0
}

/// Immutable kd-tree over a dataset.
///
/// Answers exactly what [`brute_force_knn`] answers, including tie order.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    data: Arc<Dataset>,
    tree: Arc<KdTree>,
}

impl NeighborIndex {
    pub fn build(data: impl Into<Arc<Dataset>>) -> Result<Self> {
        let data = data.into();
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let tree = Arc::new(KdTree::build(&data));
        Ok(NeighborIndex { data, tree })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn shared_data(&self) -> Arc<Dataset> {
        Arc::clone(&self.data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Index over the same points with new labels; the tree is shared.
    pub fn relabeled(&self, data: Arc<Dataset>) -> Result<Self> {
        if data.len() != self.data.len() || data.features() != self.data.features() {
            return Err(Error::Domain(
                "relabeled dataset must have identical features".into(),
            ));
        }
        Ok(NeighborIndex {
            data,
            tree: Arc::clone(&self.tree),
        })
    }

    pub fn query_knn(&self, q: &[f64], k: usize) -> Result<NeighborList> {
        self.query_knn_excluding(q, k, None)
    }

    /// k nearest neighbors of `q`, skipping position `exclude` if given.
    pub fn query_knn_excluding(
        &self,
        q: &[f64],
        k: usize,
        exclude: Option<usize>,
    ) -> Result<NeighborList> {
        self.data.check_query(q)?;
        check_k(&self.data, k, exclude)?;
        if k == 0 {
            return Ok(NeighborList::default());
        }
        let mut top = TopK::new(k);
        self.tree.search(self.data.dim(), q, exclude, &mut top);
        Ok(top.into_list())
    }
}

/// Free-function form of [`NeighborIndex::build`].
pub fn build_index(data: impl Into<Arc<Dataset>>) -> Result<NeighborIndex> {
    NeighborIndex::build(data)
}
