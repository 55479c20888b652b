//! The growing set of true model evaluations and its nearest-neighbor index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use crate::error::{argument, state, Error, Result};
use crate::problem::InputPoint;

/// Points closer than this (Euclidean) to a stored point are not inserted.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Inserts buffered before the kd-tree is rebuilt.
const PENDING_LIMIT: usize = 64;

/// Evaluations `(x_i, y_i)` with k-nearest-neighbor queries. Neighbors are
/// ordered by distance, ties by insertion order.
#[derive(Debug, Clone)]
pub struct EvaluationStore {
    dimension: usize,
    points: Vec<InputPoint>,
    values: Vec<f64>,
    tree: KdTree,
}

impl EvaluationStore {
    pub fn new(dimension: usize) -> Self {
        EvaluationStore { dimension, points: Vec::new(), values: Vec::new(), tree: KdTree::default() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &InputPoint {
        &self.points[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InputPoint, f64)> {
        self.points.iter().zip(self.values.iter().copied())
    }

    /// Adds an evaluation; returns `false` when a stored point is within
    /// [`DUPLICATE_TOLERANCE`] and the insert is skipped.
    pub fn insert(&mut self, x: InputPoint, y: f64) -> Result<bool> {
        if x.len() != self.dimension {
            return Err(argument(format!(
                "store holds {}-dimensional points, got {}",
                self.dimension,
                x.len()
            )));
        }
        if !y.is_finite() {
            return Err(argument("stored values must be finite"));
        }
        if let Some(nearest) = self.nearest_indices(&x, 1).first() {
            if nearest.0.sqrt() <= DUPLICATE_TOLERANCE {
                return Ok(false);
            }
        }
        self.points.push(x);
        self.values.push(y);
        self.tree.pending += 1;
        if self.tree.pending > PENDING_LIMIT {
            self.tree.rebuild(&self.points);
        }
        Ok(true)
    }

    /// Indices of the `n` nearest stored points with their squared distances.
    pub fn nearest(&self, x: &[f64], n: usize) -> Vec<(f64, usize)> {
        self.nearest_indices(x, n).into_iter().map(|c| (c.0, c.1)).collect()
    }

    fn nearest_indices(&self, x: &[f64], n: usize) -> Vec<Candidate> {
        let k = n.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.tree.search(&self.points, x, k, &mut heap);
        for i in self.tree.indexed..self.points.len() {
            offer(&mut heap, k, Candidate(squared_distance(x, &self.points[i]), i));
        }
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    /// Writes the store as CSV with columns `x_1..x_d, y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dimension).map(|i| format!("x_{i}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(csv_error)?;
        for (x, y) in self.iter() {
            let row: Vec<String> = x.iter().chain(std::iter::once(&y)).map(|v| v.to_string()).collect();
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(csv_error)?.clone();
        if header.len() < 2 || header.get(header.len() - 1) != Some("y") {
            return Err(parse_error("expected columns x_1..x_d, y"));
        }
        let mut store = EvaluationStore::new(header.len() - 1);
        for record in r.records() {
            let record = record.map_err(csv_error)?;
            let nums = record
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| parse_error(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let y = nums[nums.len() - 1];
            let x = InputPoint::new(nums[..nums.len() - 1].to_vec())?;
            store.insert(x, y)?;
        }
        Ok(store)
    }
}

fn csv_error(e: csv::Error) -> Error {
    parse_error(e.to_string())
}

fn parse_error(reason: impl Into<String>) -> Error {
    Error::Parse { path: "evaluation store".into(), reason: reason.into() }
}

/// The `n` stored evaluations closest to `x` (the whole store if smaller),
/// nearest first.
pub fn nearest_neighbors(store: &EvaluationStore, x: &[f64], n: usize) -> Result<Vec<(InputPoint, f64)>> {
    if store.is_empty() {
        return Err(state("evaluation store is empty"));
    }
    if x.len() != store.dimension() {
        return Err(argument("query dimension does not match the store"));
    }
    Ok(store
        .nearest(x, n)
        .into_iter()
        .map(|(_, i)| (store.points[i].clone(), store.values[i]))
        .collect())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Squared distance and insertion index, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, c: Candidate) {
    if heap.len() < k {
        heap.push(c);
    } else if let Some(worst) = heap.peek() {
        if c < *worst {
            heap.pop();
            heap.push(c);
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Balanced kd-tree over the first `indexed` points; later points wait in a
/// small linearly scanned buffer until the next rebuild.
#[derive(Debug, Clone, Default)]
struct KdTree {
    nodes: Vec<Node>,
    root: Option<usize>,
    indexed: usize,
    pending: usize,
}

impl KdTree {
    fn rebuild(&mut self, points: &[InputPoint]) {
        self.nodes.clear();
        let mut idx: Vec<usize> = (0..points.len()).collect();
        self.root = self.build(points, &mut idx);
        self.indexed = points.len();
        self.pending = 0;
    }

    fn build(&mut self, points: &[InputPoint], idx: &mut [usize]) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let d = points[idx[0]].len();
        let axis = (0..d)
            .map(|a| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(points[i][a]), hi.max(points[i][a]))
                });
                (a, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(a, _)| a)
            .unwrap_or(0);
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
        let point = idx[mid];
        let slot = self.nodes.len();
        self.nodes.push(Node { point, axis, left: None, right: None });
        let (left, rest) = idx.split_at_mut(mid);
        let left = self.build(points, left);
        let right = self.build(points, &mut rest[1..]);
        self.nodes[slot].left = left;
        self.nodes[slot].right = right;
        Some(slot)
    }

    fn search(&self, points: &[InputPoint], x: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        self.visit(points, x, k, heap, self.root);
    }

    fn visit(&self, points: &[InputPoint], x: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>, node: Option<usize>) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        let p = &points[node.point];
        offer(heap, k, Candidate(squared_distance(x, p), node.point));
        let diff = x[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.visit(points, x, k, heap, near);
        // Equal distances must still be explored so that ties resolve by index.
        let must_visit = heap.len() < k || heap.peek().is_some_and(|w| diff * diff <= w.0);
        if must_visit {
            self.visit(points, x, k, heap, far);
        }
    }
}
