use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud, SpatialIndex};
use crate::scalar::{dot, norm, sub, Point3, Real};

use super::eigen::symmetric_eigen3;

/// Cloud with PCA normals attached, plus per-point flags for neighbourhoods
/// whose covariance has rank below 2.
#[derive(Debug, Clone)]
pub struct NormalEstimate<T: Real> {
    pub cloud: PointCloud<T>,
    pub degenerate: Vec<bool>,
}

/// Estimates one unit normal per point from its `normal_k` nearest neighbours
/// (the point included): the smallest-eigenvalue eigenvector of the
/// neighbourhood covariance, flipped to face away from the cloud centroid.
pub fn estimate_normals<T: Real>(cloud: &PointCloud<T>, normal_k: usize) -> Result<NormalEstimate<T>> {
    if normal_k < 3 {
        return Err(Error::invalid(format!("normal_k must be >= 3, got {normal_k}")));
    }
    if cloud.len() < normal_k {
        return Err(Error::invalid(format!(
            "normal_k={normal_k} exceeds point count {}",
            cloud.len()
        )));
    }
    let ctr = centroid(cloud)?;
    let index = SpatialIndex::build(cloud.points());
    let points = cloud.points();
    let estimates: Vec<(Point3<T>, bool)> = points
        .par_iter()
        .map(|p| {
            let nbrs = index.knn(p, normal_k).expect("k checked above");
            let normal = pca_normal(points, nbrs.iter().map(|&(i, _)| i));
            match normal {
                Some(n) => (orient(n, &sub(p, &ctr)), false),
                None => ([T::zero(), T::zero(), T::one()], true),
            }
        })
        .collect();
    let (normals, degenerate): (Vec<_>, Vec<_>) = estimates.into_iter().unzip();
    Ok(NormalEstimate {
        cloud: cloud.clone().with_normals(normals)?,
        degenerate,
    })
}

fn pca_normal<T: Real>(points: &[Point3<T>], idx: impl Iterator<Item = usize> + Clone) -> Option<Point3<T>> {
    let mut mean = [T::zero(); 3];
    let mut count = T::zero();
    for i in idx.clone() {
        for a in 0..3 {
            mean[a] += points[i][a];
        }
        count += T::one();
    }
    let mean = mean.map(|m| m / count);
    let mut cov = [[T::zero(); 3]; 3];
    for i in idx {
        let d = sub(&points[i], &mean);
        for r in 0..3 {
            for c in r..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    cov[1][0] = cov[0][1];
    cov[2][0] = cov[0][2];
    cov[2][1] = cov[1][2];
    let (vals, vecs) = symmetric_eigen3(cov);
    let scale = vals[2].abs();
    if !(scale > T::zero()) || vals[1] <= scale * T::lit(1e-12) {
        return None;
    }
    let n = vecs[0];
    let l = norm(&n);
    Some(n.map(|c| c / l))
}

/// Outward orientation; when the radial direction is (numerically) tangent,
/// fall back to making the largest-magnitude component positive.
fn orient<T: Real>(n: Point3<T>, radial: &Point3<T>) -> Point3<T> {
    let s = dot(&n, radial);
    let r = norm(radial);
    let flip = if s.abs() > T::lit(1e-9) * r && s != T::zero() {
        s < T::zero()
    } else {
        let mut major = 0;
        for a in 1..3 {
            if n[a].abs() > n[major].abs() {
                major = a;
            }
        }
        n[major] < T::zero()
    };
    if flip {
        n.map(|c| -c)
    } else {
        n
    }
}
