use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{dist2, Point3, Real};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Immutable k-d tree giving exact Euclidean nearest neighbours.
///
/// Ties in distance are resolved towards the lower point index, so results
/// always agree with a sorted linear scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex<T: Real> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

#[inline]
fn cmp_candidate<T: Real>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

impl<T: Real> SpatialIndex<T> {
    pub fn build(points: &[Point3<T>]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build_node(0, points.len());
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| {
                (hi[a] - lo[a])
                    .partial_cmp(&(hi[b] - lo[b]))
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i][axis]
                .partial_cmp(&points[j][axis])
                .unwrap_or(Ordering::Equal)
                .then(i.cmp(&j))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    /// The `k` nearest points to `query` as `(index, distance)`, ascending.
    pub fn knn(&self, query: &Point3<T>, k: usize) -> Result<Vec<(usize, T)>> {
        if k > self.len() {
            return Err(Error::invalid(format!(
                "k={k} exceeds the {} indexed points",
                self.len()
            )));
        }
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(0, query, k, &mut best);
        }
        Ok(best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect())
    }

    /// Like [`knn`](Self::knn) but never returns `exclude` itself.
    pub fn knn_excluding(
        &self,
        query: &Point3<T>,
        k: usize,
        exclude: usize,
    ) -> Result<Vec<(usize, T)>> {
        if k + 1 > self.len() {
            return Err(Error::invalid(format!(
                "k={k} neighbours need at least {} points, have {}",
                k + 1,
                self.len()
            )));
        }
        let mut found = self.knn(query, k + 1)?;
        found.retain(|&(i, _)| i != exclude);
        found.truncate(k);
        Ok(found)
    }

    fn search(&self, node: usize, q: &Point3<T>, k: usize, best: &mut Vec<(T, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (dist2(&self.points[i], q), i);
                    if best.len() < k {
                        let pos = best
                            .binary_search_by(|b| cmp_candidate(b, &cand))
                            .unwrap_or_else(|p| p);
                        best.insert(pos, cand);
                    } else if cmp_candidate(&cand, &best[k - 1]) == Ordering::Less {
                        best.pop();
                        let pos = best
                            .binary_search_by(|b| cmp_candidate(b, &cand))
                            .unwrap_or_else(|p| p);
                        best.insert(pos, cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, best);
                // Equality still descends: an equidistant point may carry a lower index.
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}
