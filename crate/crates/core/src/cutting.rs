//! Patch cutting: split one cloud into `k` size-balanced spatial clusters with
//! farthest-point-seeded Lloyd iterations.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{choose_start_point, farthest_point_sample, PointCloud};
use crate::scalar::{dist2, Point3, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutParams {
    pub k: usize,
    /// Largest allowed ratio between the biggest and smallest cluster.
    /// `f64::INFINITY` disables the balance constraint.
    pub delta: f64,
    pub max_iters: usize,
    /// Reserved for randomised fallbacks; the current algorithm is fully
    /// deterministic and does not consume it.
    pub seed: u64,
}

impl Default for CutParams {
    fn default() -> Self {
        Self {
            k: 8,
            delta: 1.5,
            max_iters: 50,
            seed: 0,
        }
    }
}

impl CutParams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if !(self.delta >= 1.0) {
            return Err(Error::invalid(format!("delta must be >= 1, got {}", self.delta)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        Ok(())
    }
}

/// Per-point cluster labels of one cloud together with cluster statistics.
///
/// `rank` is filled by [`crate::matching::rank_partition`] and maps a local
/// cluster id to the aligned semantic id shared across clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPartition<T: Real> {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point3<T>>,
    pub sizes: Vec<usize>,
    pub k: usize,
    pub delta: f64,
    pub rank: Option<Vec<usize>>,
    /// Sum of squared distances to the cluster means after each accepted
    /// Lloyd step; non-increasing.
    pub objective_history: Vec<T>,
}

impl<T: Real> SemanticPartition<T> {
    /// Assembles a partition from labels, recomputing centroids and sizes.
    pub fn from_labels(points: &[Point3<T>], labels: Vec<usize>, k: usize, delta: f64) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::invalid("label count differs from point count"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for k={k}")));
        }
        let centroids = cluster_means(points, &labels, k);
        let sizes = cluster_sizes(&labels, k);
        let sse = objective(points, &labels, &centroids);
        Ok(Self {
            labels,
            centroids,
            sizes,
            k,
            delta,
            rank: None,
            objective_history: vec![sse],
        })
    }

    /// Aligned semantic id of every point. Requires a ranked partition.
    pub fn semantic_labels(&self) -> Option<Vec<usize>> {
        let rank = self.rank.as_ref()?;
        Some(self.labels.iter().map(|&l| rank[l]).collect())
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

fn cluster_means<T: Real>(points: &[Point3<T>], labels: &[usize], k: usize) -> Vec<Point3<T>> {
    let mut sums = vec![[T::zero(); 3]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        for a in 0..3 {
            sums[l][a] += p[a];
        }
        counts[l] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| {
            if c == 0 {
                s
            } else {
                let n = T::from_usize_lossy(c);
                s.map(|v| v / n)
            }
        })
        .collect()
}

fn objective<T: Real>(points: &[Point3<T>], labels: &[usize], centroids: &[Point3<T>]) -> T {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .fold(T::zero(), |a, b| a + b)
}

/// Integer size window `[lo, hi]` with `hi <= delta * lo` and
/// `k * lo <= n <= k * hi`. Any labelling whose cluster sizes stay inside the
/// window satisfies the balance ratio.
pub fn balance_bounds(n: usize, k: usize, delta: f64) -> Result<(usize, usize)> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if delta.is_infinite() {
        return Ok((0, n));
    }
    let per = n / k;
    // Centre the window geometrically around n/k.
    let target = 2.0 * n as f64 / (k as f64 * (1.0 + delta));
    let mut best: Option<(usize, usize)> = None;
    for lo in 1..=per {
        let hi = ((delta * lo as f64).floor() as usize).min(n);
        if k * hi < n {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, _)) => (lo as f64 - target).abs() < (b as f64 - target).abs(),
        };
        if better {
            best = Some((lo, hi));
        }
    }
    best.ok_or_else(|| Error::InfeasibleBalance {
        delta,
        n,
        k,
        min_delta: n.div_ceil(k) as f64 / per as f64,
    })
}

fn cmp_dist<T: Real>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Capacity-constrained nearest-centroid assignment.
///
/// Points are visited in ascending order of their distance to the nearest
/// centroid and take the nearest centroid that still has room below the upper
/// size bound. Clusters left below the lower bound then pull the cheapest
/// points from clusters that can spare them.
pub fn balanced_assign<T: Real>(points: &[Point3<T>], centroids: &[Point3<T>], delta: f64) -> Result<Vec<usize>> {
    let n = points.len();
    let k = centroids.len();
    let (lo, hi) = balance_bounds(n, k, delta)?;

    let d2: Vec<Vec<T>> = points
        .iter()
        .map(|p| centroids.iter().map(|c| dist2(p, c)).collect())
        .collect();
    let pref: Vec<Vec<usize>> = d2
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| cmp_dist(row[a], row[b]).then(a.cmp(&b)));
            order
        })
        .collect();
    let mut visit: Vec<usize> = (0..n).collect();
    visit.sort_by(|&a, &b| cmp_dist(d2[a][pref[a][0]], d2[b][pref[b][0]]).then(a.cmp(&b)));

    let mut labels = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    for &i in &visit {
        let c = *pref[i]
            .iter()
            .find(|&&c| sizes[c] < hi)
            .expect("k * hi >= n leaves room");
        labels[i] = c;
        sizes[c] += 1;
    }

    for j in 0..k {
        if sizes[j] >= lo {
            continue;
        }
        let mut candidates: Vec<(T, usize)> = (0..n)
            .filter(|&i| labels[i] != j)
            .map(|i| (d2[i][j] - d2[i][labels[i]], i))
            .collect();
        candidates.sort_by(|a, b| cmp_dist(a.0, b.0).then(a.1.cmp(&b.1)));
        for (_, i) in candidates {
            if sizes[j] >= lo {
                break;
            }
            let from = labels[i];
            if sizes[from] > lo {
                sizes[from] -= 1;
                sizes[j] += 1;
                labels[i] = j;
            }
        }
    }
    Ok(labels)
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Only reachable when the balance constraint is disabled.
fn repair_empty<T: Real>(points: &[Point3<T>], labels: &mut [usize], centroids: &mut [Point3<T>]) {
    let k = centroids.len();
    let mut sizes = cluster_sizes(labels, k);
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut pick = None;
        let mut far = T::neg_infinity();
        for (i, p) in points.iter().enumerate() {
            if sizes[labels[i]] > 1 {
                let d = dist2(p, &centroids[labels[i]]);
                if d > far {
                    far = d;
                    pick = Some(i);
                }
            }
        }
        let i = pick.expect("n >= k guarantees a cluster with two points");
        sizes[labels[i]] -= 1;
        labels[i] = j;
        sizes[j] = 1;
        centroids[j] = points[i];
    }
}

/// Splits `cloud` into `params.k` balanced clusters.
///
/// Seeds are the farthest-point sample started at the point farthest from the
/// centroid. Lloyd steps repeat until the labelling is a fixed point, a step
/// would not lower the objective, or `max_iters` is reached.
pub fn cut<T: Real>(cloud: &PointCloud<T>, params: &CutParams) -> Result<SemanticPartition<T>> {
    params.validate()?;
    let points = cloud.points();
    let n = points.len();
    let k = params.k;
    if n < k {
        return Err(Error::invalid(format!("cannot cut {n} points into {k} clusters")));
    }
    let start = choose_start_point(cloud)?;
    let seeds = farthest_point_sample(points, k, start)?;
    let mut centroids: Vec<Point3<T>> = seeds.iter().map(|&i| points[i]).collect();
    let mut labels = balanced_assign(points, &centroids, params.delta)?;
    repair_empty(points, &mut labels, &mut centroids);
    let mut means = cluster_means(points, &labels, k);
    let mut history = vec![objective(points, &labels, &means)];

    for _ in 0..params.max_iters {
        let mut centres = means.clone();
        let mut next = balanced_assign(points, &centres, params.delta)?;
        repair_empty(points, &mut next, &mut centres);
        if next == labels {
            break;
        }
        let current = *history.last().expect("seeded above");
        if objective(points, &next, &centres) > current {
            break;
        }
        labels = next;
        means = cluster_means(points, &labels, k);
        history.push(objective(points, &labels, &means));
    }

    let sizes = cluster_sizes(&labels, k);
    Ok(SemanticPartition {
        labels,
        centroids: means,
        sizes,
        k,
        delta: params.delta,
        rank: None,
        objective_history: history,
    })
}
