use crate::error::{Error, Result};
use crate::features::FPFH_DIM;
use crate::memory::MemoryBankSet;
use crate::scalar::Real;

/// Train/test distribution shift, each averaged over dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftStats {
    /// Mean over dimensions of |mean_train - mean_test|.
    pub mean_diff: f64,
    /// Mean over dimensions of |var_train - var_test| (population variance).
    pub var_diff: f64,
}

fn moments<T: Real, R: AsRef<[T]>>(rows: &[R]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = rows.first().ok_or(Error::EmptyInput("row set"))?;
    let dim = first.as_ref().len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::invalid("rows differ in dimension"));
        }
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            let d = v.to_f64_lossy() - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    Ok((mean, var))
}

/// Per-dimension mean and variance differences between two row sets
/// (coordinates as `[T; 3]`, or feature rows as `&[T]`).
pub fn shift_stats<T: Real, R: AsRef<[T]>>(train: &[R], test: &[R]) -> Result<ShiftStats> {
    let (m1, v1) = moments(train)?;
    let (m2, v2) = moments(test)?;
    if m1.len() != m2.len() {
        return Err(Error::invalid("train and test dimensions differ"));
    }
    let dim = m1.len().max(1) as f64;
    Ok(ShiftStats {
        mean_diff: m1.iter().zip(&m2).map(|(a, b)| (a - b).abs()).sum::<f64>() / dim,
        var_diff: v1.iter().zip(&v2).map(|(a, b)| (a - b).abs()).sum::<f64>() / dim,
    })
}

/// Interaction between two memory banks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankPairDiag {
    pub i: usize,
    pub j: usize,
    /// tr(C_i C_j) / (|C_i|_F |C_j|_F) for the mean-centred feature
    /// covariances; 0 when the banks vary in disjoint dimensions.
    pub cross_trace: f64,
    /// Smallest L2 distance between a row of bank i and a row of bank j.
    pub min_distance: f64,
}

fn covariance<T: Real>(bank: &[T]) -> Vec<f64> {
    let rows: Vec<&[T]> = bank.chunks_exact(FPFH_DIM).collect();
    let n = rows.len() as f64;
    let mut mean = [0.0; FPFH_DIM];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; FPFH_DIM * FPFH_DIM];
    for r in &rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v.to_f64_lossy() - m).collect();
        for a in 0..FPFH_DIM {
            for b in 0..FPFH_DIM {
                cov[a * FPFH_DIM + b] += c[a] * c[b];
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n);
    cov
}

fn min_cross_distance<T: Real>(a: &[T], b: &[T]) -> f64 {
    let mut best = f64::INFINITY;
    for ra in a.chunks_exact(FPFH_DIM) {
        for rb in b.chunks_exact(FPFH_DIM) {
            let mut acc = 0.0;
            for (x, y) in ra.iter().zip(rb) {
                let d = x.to_f64_lossy() - y.to_f64_lossy();
                acc += d * d;
                if acc >= best {
                    break;
                }
            }
            best = best.min(acc);
        }
    }
    best.sqrt()
}

/// Pairwise cross-bank diagnostics for every `i < j`. Reported only; real
/// features are not expected to be orthogonal.
pub fn orthogonality_diag<T: Real>(banks: &MemoryBankSet<T>) -> Result<Vec<BankPairDiag>> {
    if banks.k() < 2 {
        return Err(Error::invalid("orthogonality diagnostics need at least two banks"));
    }
    let covs: Vec<Vec<f64>> = (0..banks.k()).map(|i| covariance(banks.bank(i))).collect();
    let fro: Vec<f64> = covs.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut out = Vec::new();
    for i in 0..banks.k() {
        for j in i + 1..banks.k() {
            let tr: f64 = covs[i].iter().zip(&covs[j]).map(|(a, b)| a * b).sum();
            let denom = fro[i] * fro[j];
            out.push(BankPairDiag {
                i,
                j,
                cross_trace: if denom > 0.0 { tr / denom } else { 0.0 },
                min_distance: min_cross_distance(banks.bank(i), banks.bank(j)),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FpfhParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bank(rng: &mut ChaCha8Rng, rows: usize, support: std::ops::Range<usize>) -> Vec<f64> {
        let mut b = vec![0.0; rows * FPFH_DIM];
        for r in 0..rows {
            for d in support.clone() {
                b[r * FPFH_DIM + d] = rng.gen_range(0.0..10.0);
            }
        }
        b
    }

    #[test]
    fn shift_identical_and_translated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<[f64; 3]> = (0..100).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let s = shift_stats(&a, &a).unwrap();
        assert_eq!((s.mean_diff, s.var_diff), (0.0, 0.0));
        let b: Vec<[f64; 3]> = a.iter().map(|p| [p[0] + 2.0, p[1] + 2.0, p[2] + 2.0]).collect();
        let s = shift_stats(&a, &b).unwrap();
        assert!((s.mean_diff - 2.0).abs() < 1e-12);
        assert!(s.var_diff < 1e-12);
    }

    #[test]
    fn shift_matches_direct_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<Vec<f64>> = (0..80).map(|_| (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let b: Vec<Vec<f64>> = (0..50).map(|_| (0..5).map(|_| rng.gen_range(-1.0..4.0)).collect()).collect();
        let stat = |rows: &Vec<Vec<f64>>, d: usize| {
            let n = rows.len() as f64;
            let m = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[d] - m) * (r[d] - m)).sum::<f64>() / n;
            (m, v)
        };
        let (mut md, mut vd) = (0.0, 0.0);
        for d in 0..5 {
            let (m1, v1) = stat(&a, d);
            let (m2, v2) = stat(&b, d);
            md += (m1 - m2).abs() / 5.0;
            vd += (v1 - v2).abs() / 5.0;
        }
        let s = shift_stats(&a, &b).unwrap();
        assert!((s.mean_diff - md).abs() <= 1e-10);
        assert!((s.var_diff - vd).abs() <= 1e-10);
        assert!(shift_stats::<f64, Vec<f64>>(&[], &b).is_err());
    }

    #[test]
    fn disjoint_support_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let banks = MemoryBankSet::from_banks(
            vec![random_bank(&mut rng, 30, 0..11), random_bank(&mut rng, 20, 11..22)],
            FpfhParams::default(),
        )
        .unwrap();
        let d = orthogonality_diag(&banks).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].cross_trace, 0.0);
    }

    #[test]
    fn copied_bank_touches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_bank(&mut rng, 10, 0..33);
        let banks = MemoryBankSet::from_banks(vec![b.clone(), b], FpfhParams::default()).unwrap();
        let d = orthogonality_diag(&banks).unwrap();
        assert_eq!(d[0].min_distance, 0.0);
        assert!((d[0].cross_trace - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = vec![
            random_bank(&mut rng, 15, 0..33),
            random_bank(&mut rng, 9, 0..33),
            random_bank(&mut rng, 12, 5..30),
        ];
        let banks = MemoryBankSet::from_banks(raw.clone(), FpfhParams::default()).unwrap();
        let centred = |b: &Vec<f64>| -> Vec<Vec<f64>> {
            let rows: Vec<&[f64]> = b.chunks(FPFH_DIM).collect();
            let n = rows.len() as f64;
            let mean: Vec<f64> = (0..FPFH_DIM).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
            rows.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect()
        };
        let dotv = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        // tr(C_a C_b) = sum_{x in a, y in b} <x, y>^2 / (n_a n_b).
        let tr = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            let mut s = 0.0;
            for x in a {
                for y in b {
                    s += dotv(x, y).powi(2);
                }
            }
            s / (a.len() * b.len()) as f64
        };
        let diags = orthogonality_diag(&banks).unwrap();
        for d in diags {
            let (a, b) = (centred(&raw[d.i]), centred(&raw[d.j]));
            let want = tr(&a, &b) / (tr(&a, &a).sqrt() * tr(&b, &b).sqrt());
            assert!((d.cross_trace - want).abs() <= 1e-9);
            let mut md = f64::INFINITY;
            for x in raw[d.i].chunks(FPFH_DIM) {
                for y in raw[d.j].chunks(FPFH_DIM) {
                    md = md.min(x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
                }
            }
            assert!((d.min_distance - md).abs() <= 1e-9);
        }
    }
}
