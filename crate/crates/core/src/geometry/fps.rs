use crate::error::{Error, Result};
use crate::scalar::{dist2, Point3, Real};

/// Greedy farthest point sampling.
///
/// Starts from `start`; each next index maximises the minimum distance to the
/// already selected set, lowest index on ties. Always returns `k` distinct indices.
pub fn farthest_point_sample<T: Real>(
    points: &[Point3<T>],
    k: usize,
    start: usize,
) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("FPS needs 1 <= k <= n, got k={k}, n={n}")));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let mut selected = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d: Vec<T> = points.iter().map(|p| dist2(p, &points[start])).collect();
    selected.push(start);
    taken[start] = true;
    while selected.len() < k {
        let mut best = usize::MAX;
        let mut best_d = T::neg_infinity();
        for i in 0..n {
            if !taken[i] && min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        selected.push(best);
        taken[best] = true;
        let anchor = points[best];
        for (d, p) in min_d.iter_mut().zip(points) {
            let nd = dist2(p, &anchor);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(selected)
}
