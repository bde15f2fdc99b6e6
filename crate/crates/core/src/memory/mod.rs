//! Separated modelling: one feature memory bank per aligned semantic space,
//! and nearest-neighbour scoring confined to the matching bank.

mod persist;

use rayon::prelude::*;

use crate::cutting::SemanticPartition;
use crate::error::{Error, Result};
use crate::features::{compute_fpfh, FeatureMatrix, FpfhParams, FPFH_DIM};
use crate::geometry::PointCloud;
use crate::scalar::Real;

pub use persist::{read_banks, write_banks, BANK_MAGIC, BANK_VERSION};

/// `k` disjoint banks of 33-dimensional rows, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBankSet<T: Real> {
    banks: Vec<Vec<T>>,
    fpfh: FpfhParams,
}

/// Which bank a score came from and how many rows it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub bank: usize,
    pub comparisons: usize,
}

/// How point scores collapse into one object score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ObjectScore {
    #[default]
    Max,
    /// Mean of the highest `fraction` of point scores.
    TopMean(f64),
}

impl std::str::FromStr for ObjectScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "max" {
            return Ok(ObjectScore::Max);
        }
        if let Some(q) = s.strip_prefix("top_mean:") {
            if let Ok(q) = q.parse::<f64>() {
                if q > 0.0 && q <= 1.0 {
                    return Ok(ObjectScore::TopMean(q));
                }
            }
        }
        Err(Error::invalid(format!("object score must be 'max' or 'top_mean:<fraction in (0,1]>', got '{s}'")))
    }
}

impl std::fmt::Display for ObjectScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectScore::Max => f.write_str("max"),
            ObjectScore::TopMean(q) => write!(f, "top_mean:{q}"),
        }
    }
}

impl ObjectScore {
    pub fn reduce<T: Real>(&self, scores: &[T]) -> T {
        match *self {
            ObjectScore::Max => scores.iter().copied().fold(T::zero(), T::max),
            ObjectScore::TopMean(q) => {
                if scores.is_empty() {
                    return T::zero();
                }
                let mut s = scores.to_vec();
                s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
                let m = ((s.len() as f64 * q).ceil() as usize).clamp(1, s.len());
                s[..m].iter().copied().sum::<T>() / T::from_usize_lossy(m)
            }
        }
    }
}

/// Per-point anomaly scores of one test cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport<T: Real> {
    pub point_scores: Vec<T>,
    pub object_score: T,
    pub semantic_of_point: Vec<usize>,
    /// The bank actually searched for each point; `None` for degenerate rows.
    pub consulted_bank: Vec<Option<usize>>,
    pub degenerate: Vec<bool>,
    pub comparisons_made: u64,
}

impl<T: Real> ScoreReport<T> {
    pub fn comparisons_per_point(&self) -> f64 {
        let scored = self.degenerate.iter().filter(|d| !**d).count();
        if scored == 0 {
            0.0
        } else {
            self.comparisons_made as f64 / scored as f64
        }
    }
}

impl<T: Real> MemoryBankSet<T> {
    /// Builds banks from raw rows. Every bank must be non-empty and every row 33 wide.
    pub fn from_banks(banks: Vec<Vec<T>>, fpfh: FpfhParams) -> Result<Self> {
        if banks.is_empty() {
            return Err(Error::invalid("a bank set needs at least one bank"));
        }
        for (i, b) in banks.iter().enumerate() {
            if b.len() % FPFH_DIM != 0 {
                return Err(Error::invalid(format!("bank {i} length is not a multiple of {FPFH_DIM}")));
            }
            if b.is_empty() {
                return Err(Error::EmptyBank(i));
            }
        }
        Ok(Self { banks, fpfh })
    }

    /// Bank `i` collects the non-degenerate rows of every training point whose
    /// aligned semantic id is `i`.
    pub fn from_features(
        features: &[FeatureMatrix<T>],
        partitions: &[SemanticPartition<T>],
        fpfh: FpfhParams,
    ) -> Result<Self> {
        if features.len() != partitions.len() || features.is_empty() {
            return Err(Error::invalid("need one partition per feature matrix"));
        }
        let k = partitions[0].k;
        let mut banks = vec![Vec::new(); k];
        for (f, p) in features.iter().zip(partitions) {
            if p.k != k {
                return Err(Error::invalid(format!("mixed cluster counts {k} and {}", p.k)));
            }
            if f.len() != p.labels.len() {
                return Err(Error::invalid("feature rows do not match partition labels"));
            }
            let sem = p
                .semantic_labels()
                .ok_or_else(|| Error::PreconditionFailed("partition is not ranked".into()))?;
            for (i, &s) in sem.iter().enumerate() {
                if !f.is_degenerate(i) {
                    banks[s].extend_from_slice(f.row(i));
                }
            }
        }
        Self::from_banks(banks, fpfh)
    }

    /// Computes FPFH for each training cloud (normals required) and files the rows.
    pub fn build(
        clouds: &[PointCloud<T>],
        partitions: &[SemanticPartition<T>],
        fpfh: FpfhParams,
    ) -> Result<Self> {
        let features = clouds
            .iter()
            .map(|c| compute_fpfh(c, &fpfh))
            .collect::<Result<Vec<_>>>()?;
        Self::from_features(&features, partitions, fpfh)
    }

    pub fn k(&self) -> usize {
        self.banks.len()
    }

    pub fn fpfh_params(&self) -> FpfhParams {
        self.fpfh
    }

    pub fn bank(&self, i: usize) -> &[T] {
        &self.banks[i]
    }

    pub fn bank_rows(&self, i: usize) -> impl Iterator<Item = &[T]> {
        self.banks[i].chunks_exact(FPFH_DIM)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.banks.iter().map(|b| b.len() / FPFH_DIM).collect()
    }

    pub fn total_rows(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// L2 distance from `feature` to its nearest row in bank `semantic`.
    /// No other bank is read.
    pub fn score_point(&self, feature: &[T], semantic: usize) -> Result<(T, Probe)> {
        if feature.len() != FPFH_DIM {
            return Err(Error::invalid(format!("feature has {} entries", feature.len())));
        }
        let bank = self
            .banks
            .get(semantic)
            .ok_or_else(|| Error::invalid(format!("semantic id {semantic} >= k={}", self.k())))?;
        if bank.is_empty() {
            return Err(Error::EmptyBank(semantic));
        }
        let best = nearest_sq(bank, feature);
        Ok((
            best.sqrt(),
            Probe {
                bank: semantic,
                comparisons: bank.len() / FPFH_DIM,
            },
        ))
    }

    /// Scores precomputed features given each point's semantic id. Degenerate
    /// rows get score 0 and consult no bank.
    pub fn score_features(
        &self,
        features: &FeatureMatrix<T>,
        semantic_of_point: Vec<usize>,
        object: ObjectScore,
    ) -> Result<ScoreReport<T>> {
        if features.len() != semantic_of_point.len() {
            return Err(Error::invalid("semantic labels do not match feature rows"));
        }
        let results: Vec<(T, Option<Probe>)> = (0..features.len())
            .into_par_iter()
            .map(|i| {
                if features.is_degenerate(i) {
                    Ok((T::zero(), None))
                } else {
                    self.score_point(features.row(i), semantic_of_point[i])
                        .map(|(s, p)| (s, Some(p)))
                }
            })
            .collect::<Result<_>>()?;
        let point_scores: Vec<T> = results.iter().map(|r| r.0).collect();
        let comparisons_made = results
            .iter()
            .filter_map(|r| r.1)
            .map(|p| p.comparisons as u64)
            .sum();
        Ok(ScoreReport {
            object_score: object.reduce(&point_scores),
            point_scores,
            semantic_of_point,
            consulted_bank: results.iter().map(|r| r.1.map(|p| p.bank)).collect(),
            degenerate: features.degenerate_flags().to_vec(),
            comparisons_made,
        })
    }
}

/// Exact minimum squared distance by linear scan with partial-sum early exit.
fn nearest_sq<T: Real>(bank: &[T], q: &[T]) -> T {
    let mut best = T::infinity();
    for row in bank.chunks_exact(FPFH_DIM) {
        let mut acc = T::zero();
        for (chunk_r, chunk_q) in row.chunks_exact(11).zip(q.chunks_exact(11)) {
            for (a, b) in chunk_r.iter().zip(chunk_q) {
                let d = *a - *b;
                acc += d * d;
            }
            if acc >= best {
                break;
            }
        }
        if acc < best {
            best = acc;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern(first: f64) -> Vec<f64> {
        let mut v = vec![0.0; FPFH_DIM];
        v[0] = first;
        v
    }

    #[test]
    fn exact_hit_and_two_row_bank() {
        let bank = [pattern(0.0), pattern(100.0)].concat();
        let set = MemoryBankSet::from_banks(vec![bank], FpfhParams::default()).unwrap();
        assert_eq!(set.score_point(&pattern(100.0), 0).unwrap().0, 0.0);
        let (s, probe) = set.score_point(&pattern(30.0), 0).unwrap();
        assert_eq!(s, 30.0);
        assert_eq!(probe, Probe { bank: 0, comparisons: 2 });
        let (s, _) = set.score_point(&pattern(70.0), 0).unwrap();
        assert_eq!(s, 30.0);
    }

    #[test]
    fn empty_bank_is_an_error() {
        assert!(matches!(
            MemoryBankSet::<f64>::from_banks(vec![pattern(1.0), vec![]], FpfhParams::default()),
            Err(Error::EmptyBank(1))
        ));
    }

    #[test]
    fn linear_scan_oracle_and_confinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mk = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n * FPFH_DIM).map(|_| rng.gen_range(0.0..20.0)).collect()
        };
        let b0 = mk(&mut rng, 200);
        let b1 = mk(&mut rng, 50);
        let set = MemoryBankSet::from_banks(vec![b0.clone(), b1], FpfhParams::default()).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..FPFH_DIM).map(|_| rng.gen_range(0.0..20.0)).collect();
            let oracle = b0
                .chunks(FPFH_DIM)
                .map(|r| r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            let (s, probe) = set.score_point(&q, 0).unwrap();
            assert!((s - oracle).abs() <= 1e-12);
            assert_eq!(probe.bank, 0);
            assert_eq!(probe.comparisons, 200);
        }
    }

    #[test]
    fn adding_rows_never_raises_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bank: Vec<f64> = (0..20 * FPFH_DIM).map(|_| rng.gen_range(0.0..10.0)).collect();
        let queries: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..FPFH_DIM).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let mut prev: Vec<f64> = vec![f64::INFINITY; queries.len()];
        for _ in 0..5 {
            let set = MemoryBankSet::from_banks(vec![bank.clone()], FpfhParams::default()).unwrap();
            for (q, p) in queries.iter().zip(prev.iter_mut()) {
                let s = set.score_point(q, 0).unwrap().0;
                assert!(s <= *p);
                *p = s;
            }
            bank.extend((0..10 * FPFH_DIM).map(|_| rng.gen_range(0.0..10.0)));
        }
    }

    #[test]
    fn object_score_reductions() {
        let s = [0.1f64, 0.9, 0.3, 0.5];
        assert_eq!(ObjectScore::Max.reduce(&s), 0.9);
        assert!((ObjectScore::TopMean(0.5).reduce(&s) - 0.7).abs() < 1e-12);
        for o in [ObjectScore::Max, ObjectScore::TopMean(0.05)] {
            assert_eq!(o.to_string().parse::<ObjectScore>().unwrap(), o);
        }
        assert!("top_mean:2".parse::<ObjectScore>().is_err());
    }
}
