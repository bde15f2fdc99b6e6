use crate::error::{Error, Result};

/// Optimal assignment is used up to this many clusters; beyond it a greedy
/// matching is reported with `exact = false`.
pub const HUNGARIAN_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionAccuracy {
    pub value: f64,
    pub exact: bool,
}

/// Fraction of points labelled correctly under the best bijection between
/// predicted and true cluster ids.
pub fn partition_accuracy(predicted: &[usize], truth: &[usize]) -> Result<PartitionAccuracy> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid("label sequences differ in length"));
    }
    if predicted.is_empty() {
        return Ok(PartitionAccuracy { value: 1.0, exact: true });
    }
    let kp = predicted.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let m = kp.max(kt);
    let mut confusion = vec![vec![0i64; m]; m];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let (matched, exact) = if m <= HUNGARIAN_LIMIT {
        (max_assignment(&confusion), true)
    } else {
        (greedy_assignment(&confusion), false)
    };
    Ok(PartitionAccuracy {
        value: matched as f64 / predicted.len() as f64,
        exact,
    })
}

/// Maximum-weight perfect matching on a square matrix (Kuhn-Munkres with potentials).
fn max_assignment(w: &[Vec<i64>]) -> i64 {
    let n = w.len();
    let big = w.iter().flatten().copied().max().unwrap_or(0);
    // Minimise big - w, 1-based arrays as in the classic formulation.
    let cost = |i: usize, j: usize| big - w[i - 1][j - 1];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| w[p[j] - 1][j - 1]).sum()
}

fn greedy_assignment(w: &[Vec<i64>]) -> i64 {
    let n = w.len();
    let mut cells: Vec<(i64, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (w[i][j], i, j))
        .collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut total = 0;
    for (v, i, j) in cells {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            total += v;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identity_and_relabelling() {
        let t = vec![0, 0, 1, 1, 2, 2, 2];
        assert_eq!(partition_accuracy(&t, &t).unwrap().value, 1.0);
        let relabelled: Vec<usize> = t.iter().map(|&l| [2, 0, 1][l]).collect();
        assert_eq!(partition_accuracy(&relabelled, &t).unwrap().value, 1.0);
        assert!(partition_accuracy(&t, &t[1..]).is_err());
    }

    #[test]
    fn matches_factorial_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let truth: Vec<usize> = (0..60).map(|_| rng.gen_range(0..3)).collect();
            let pred: Vec<usize> = (0..60).map(|_| rng.gen_range(0..3)).collect();
            let best = permutations(3)
                .into_iter()
                .map(|perm| pred.iter().zip(&truth).filter(|(p, t)| perm[**p] == **t).count())
                .max()
                .unwrap();
            let got = partition_accuracy(&pred, &truth).unwrap();
            assert!(got.exact);
            assert!((got.value - best as f64 / 60.0).abs() < 1e-15);
            let swapped = partition_accuracy(&truth, &pred).unwrap();
            assert_eq!(swapped.value, got.value);
        }
    }

    #[test]
    fn rectangular_and_large() {
        let pred = vec![0, 1, 2, 3, 3];
        let truth = vec![0, 0, 1, 1, 1];
        assert!((partition_accuracy(&pred, &truth).unwrap().value - 0.6).abs() < 1e-15);
        let big: Vec<usize> = (0..200).collect();
        let r = partition_accuracy(&big, &big).unwrap();
        assert!(!r.exact);
        assert_eq!(r.value, 1.0);
    }
}
