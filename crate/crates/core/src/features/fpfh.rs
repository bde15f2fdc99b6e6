use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::scalar::{cross, dot, norm, scale, sub, Point3, Real};

/// Bins per angle histogram.
pub const BINS_PER_ANGLE: usize = 11;
/// Descriptor length: alpha, phi and theta histograms back to back.
pub const FPFH_DIM: usize = 3 * BINS_PER_ANGLE;

/// Neighbourhood sizes for normal estimation and SPFH pair statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FpfhParams {
    pub normal_k: usize,
    pub feature_k: usize,
}

impl Default for FpfhParams {
    fn default() -> Self {
        Self {
            normal_k: 16,
            feature_k: 16,
        }
    }
}

impl FpfhParams {
    pub fn validate(&self) -> Result<()> {
        if self.normal_k < 3 {
            return Err(Error::invalid(format!("normal_k must be >= 3, got {}", self.normal_k)));
        }
        if self.feature_k < 1 {
            return Err(Error::invalid("feature_k must be >= 1"));
        }
        Ok(())
    }
}

/// N x 33 descriptor matrix, row `i` describing point `i`.
///
/// Each 11-bin block of a row sums to 100. Rows for points without any usable
/// neighbour pair are all zero and flagged as degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Real> {
    data: Vec<T>,
    degenerate: Vec<bool>,
}

impl<T: Real> FeatureMatrix<T> {
    pub(crate) fn from_rows(rows: Vec<[T; FPFH_DIM]>) -> Self {
        let degenerate = rows.iter().map(|r| r.iter().all(|v| *v == T::zero())).collect();
        let data = rows.into_iter().flatten().collect();
        Self { data, degenerate }
    }

    pub fn len(&self) -> usize {
        self.degenerate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degenerate.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * FPFH_DIM..(i + 1) * FPFH_DIM]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(FPFH_DIM)
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }
}

/// Darboux-frame pair angles `(alpha, phi, theta)` of a point pair, or `None`
/// when the pair is coincident or the frame is undefined.
///
/// The source of the frame is whichever endpoint's normal makes the smaller
/// angle with the connecting line. Near-ties within `sqrt(epsilon)` keep `p1`
/// as the source, so the choice does not depend on rounding. `alpha` and `phi` are cosines in [-1, 1],
/// `theta` is in [-pi, pi].
pub fn pair_features<T: Real>(
    p1: &Point3<T>,
    n1: &Point3<T>,
    p2: &Point3<T>,
    n2: &Point3<T>,
) -> Option<(T, T, T)> {
    let mut d = sub(p2, p1);
    let len = norm(&d);
    if len == T::zero() {
        return None;
    }
    let a1 = dot(n1, &d) / len;
    let a2 = dot(n2, &d) / len;
    let (ns, nt, phi) = if a2.abs() - a1.abs() > T::epsilon().sqrt() {
        d = scale(&d, -T::one());
        (n2, n1, -a2)
    } else {
        (n1, n2, a1)
    };
    let v = cross(&d, ns);
    let vl = norm(&v);
    if vl == T::zero() {
        return None;
    }
    let v = scale(&v, T::one() / vl);
    let w = cross(ns, &v);
    let alpha = dot(&v, nt);
    let theta = dot(&w, nt).atan2(dot(ns, nt));
    Some((alpha, phi, theta))
}

#[inline]
fn bin_of<T: Real>(value: T, lo: T, hi: T) -> usize {
    let b = ((value - lo) / (hi - lo) * T::from_usize_lossy(BINS_PER_ANGLE)).floor();
    let b = b.to_isize().unwrap_or(0);
    b.clamp(0, BINS_PER_ANGLE as isize - 1) as usize
}

/// Histogram bins `(alpha, phi, theta)` the pair angles fall into.
pub fn angle_bins<T: Real>(alpha: T, phi: T, theta: T) -> [usize; 3] {
    let pi = T::lit(std::f64::consts::PI);
    [
        bin_of(alpha, -T::one(), T::one()),
        BINS_PER_ANGLE + bin_of(phi, -T::one(), T::one()),
        2 * BINS_PER_ANGLE + bin_of(theta, -pi, pi),
    ]
}

fn renormalize<T: Real>(row: &mut [T; FPFH_DIM]) -> bool {
    let hundred = T::lit(100.0);
    let mut ok = true;
    for block in row.chunks_exact_mut(BINS_PER_ANGLE) {
        let s: T = block.iter().copied().sum();
        if s > T::zero() {
            for v in block.iter_mut() {
                *v = *v * hundred / s;
            }
        } else {
            ok = false;
        }
    }
    if !ok {
        *row = [T::zero(); FPFH_DIM];
    }
    ok
}

/// Fast point feature histograms over kNN neighbourhoods (self excluded).
///
/// FPFH(p) = SPFH(p) + (1/k) * sum_q SPFH(q) / |p - q|, each 11-bin block
/// rescaled to sum to 100.
pub fn compute_fpfh<T: Real>(cloud: &PointCloud<T>, params: &FpfhParams) -> Result<FeatureMatrix<T>> {
    params.validate()?;
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::PreconditionFailed("FPFH requires normals".into()))?;
    let points = cloud.points();
    let n = points.len();
    let k = params.feature_k.min(n.saturating_sub(1));
    let index = SpatialIndex::build(points);
    let neighbours: Vec<Vec<(usize, T)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if k == 0 {
                Vec::new()
            } else {
                index.knn_excluding(&points[i], k, i).expect("k < n")
            }
        })
        .collect();

    let spfh: Vec<[T; FPFH_DIM]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut h = [T::zero(); FPFH_DIM];
            for &(j, _) in &neighbours[i] {
                if let Some((a, f, t)) = pair_features(&points[i], &normals[i], &points[j], &normals[j]) {
                    for b in angle_bins(a, f, t) {
                        h[b] += T::one();
                    }
                }
            }
            renormalize(&mut h);
            h
        })
        .collect();

    let rows: Vec<[T; FPFH_DIM]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut h = spfh[i];
            let nb = &neighbours[i];
            if !nb.is_empty() {
                let inv_k = T::one() / T::from_usize_lossy(nb.len());
                for &(j, d) in nb {
                    if d > T::zero() {
                        let w = inv_k / d;
                        for (acc, v) in h.iter_mut().zip(&spfh[j]) {
                            *acc += w * *v;
                        }
                    }
                }
            }
            renormalize(&mut h);
            h
        })
        .collect();
    Ok(FeatureMatrix::from_rows(rows))
}
