//! Patch matching: align cluster identities across clouds by ordering each
//! cloud's clusters on the distance from cluster centroid to cloud centroid.

use std::cmp::Ordering;

use crate::cutting::SemanticPartition;
use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud};
use crate::scalar::{dist, Real};

/// Per-cloud bijection from local cluster id to shared semantic id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSemantics {
    pub k: usize,
    pub mappings: Vec<Vec<usize>>,
}

/// Stores each cluster's rank: 0 for the cluster whose centroid is nearest the
/// cloud centroid, ascending from there. Ties go to the lower cluster id.
pub fn rank_partition<T: Real>(
    cloud: &PointCloud<T>,
    partition: &SemanticPartition<T>,
) -> Result<SemanticPartition<T>> {
    if partition.labels.len() != cloud.len() {
        return Err(Error::invalid(format!(
            "partition has {} labels, cloud {} points",
            partition.labels.len(),
            cloud.len()
        )));
    }
    let ctr = centroid(cloud)?;
    let d: Vec<T> = partition.centroids.iter().map(|c| dist(c, &ctr)).collect();
    let mut order: Vec<usize> = (0..partition.k).collect();
    order.sort_by(|&a, &b| {
        d[a].partial_cmp(&d[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; partition.k];
    for (r, &cluster) in order.iter().enumerate() {
        rank[cluster] = r;
    }
    let mut ranked = partition.clone();
    ranked.rank = Some(rank);
    Ok(ranked)
}

/// Ranks every partition; semantic space `j` is the union of each cloud's
/// rank-`j` cluster.
pub fn match_across<T: Real>(
    items: &[(&PointCloud<T>, &SemanticPartition<T>)],
) -> Result<(AlignedSemantics, Vec<SemanticPartition<T>>)> {
    let k = items.first().map(|(_, p)| p.k).unwrap_or(0);
    if let Some((_, p)) = items.iter().find(|(_, p)| p.k != k) {
        return Err(Error::invalid(format!("mixed cluster counts {k} and {}", p.k)));
    }
    let ranked = items
        .iter()
        .map(|(c, p)| rank_partition(c, p))
        .collect::<Result<Vec<_>>>()?;
    let mappings = ranked
        .iter()
        .map(|p| p.rank.clone().expect("ranked above"))
        .collect();
    Ok((AlignedSemantics { k, mappings }, ranked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutting::{cut, CutParams};
    use crate::scalar::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn argsort(v: &[f64]) -> Vec<usize> {
        let mut o: Vec<usize> = (0..v.len()).collect();
        o.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap().then(a.cmp(&b)));
        o
    }

    #[test]
    fn single_cluster_and_forced_order() {
        let pts: Vec<Point3<f64>> = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        let cloud = PointCloud::new("a", pts.clone()).unwrap();
        let p = SemanticPartition::from_labels(&pts, vec![0, 0], 1, 1.5).unwrap();
        assert_eq!(rank_partition(&cloud, &p).unwrap().rank, Some(vec![0]));

        // Cloud centroid at origin; cluster 0 centroid at 0.9, cluster 1 at 0.2.
        let mut pts: Vec<Point3<f64>> = vec![[0.9, 0.0, 0.0]; 2];
        pts.extend(vec![[-0.2, 0.0, 0.0]; 9]);
        let labels = [vec![0; 2], vec![1; 9]].concat();
        let cloud = PointCloud::new("b", pts.clone()).unwrap();
        assert!(centroid(&cloud).unwrap()[0].abs() < 1e-15);
        let p = SemanticPartition::from_labels(&pts, labels, 2, 10.0).unwrap();
        assert_eq!(p.centroids[0], [0.9, 0.0, 0.0]);
        assert_eq!(rank_partition(&cloud, &p).unwrap().rank, Some(vec![1, 0]));
    }

    #[test]
    fn random_partition_ranks_follow_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Point3<f64>> = (0..100).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let cloud = PointCloud::new("r", pts.clone()).unwrap();
        let p = SemanticPartition::from_labels(&pts, labels, 5, 10.0).unwrap();
        let ctr = centroid(&cloud).unwrap();
        let d: Vec<f64> = p.centroids.iter().map(|c| dist(c, &ctr)).collect();
        let order = argsort(&d);
        let rank = rank_partition(&cloud, &p).unwrap().rank.unwrap();
        for (r, &c) in order.iter().enumerate() {
            assert_eq!(rank[c], r);
        }
    }

    fn transform(pts: &[Point3<f64>], s: f64, t: Point3<f64>) -> Vec<Point3<f64>> {
        // Rotation by 0.7 rad about z, then uniform scale and translation.
        let (sn, cs) = 0.7f64.sin_cos();
        pts.iter()
            .map(|p| {
                [
                    s * (cs * p[0] - sn * p[1]) + t[0],
                    s * (sn * p[0] + cs * p[1]) + t[1],
                    s * p[2] + t[2],
                ]
            })
            .collect()
    }

    #[test]
    fn ranks_invariant_under_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Point3<f64>> = (0..300)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3)])
            .collect();
        let a = PointCloud::new("a", pts.clone()).unwrap();
        let b = PointCloud::new("b", transform(&pts, 2.5, [3.0, -1.0, 7.0])).unwrap();
        let params = CutParams::with_k(6);
        let pa = cut(&a, &params).unwrap();
        let pb = cut(&b, &params).unwrap();
        assert_eq!(pa.labels, pb.labels);
        let (aligned, _) = match_across(&[(&a, &pa), (&b, &pb)]).unwrap();
        assert_eq!(aligned.mappings[0], aligned.mappings[1]);
    }

    #[test]
    fn concentric_rings_recovered() {
        // Rings stacked around the z axis; |height| fixes the order and the
        // heights sum to zero so the cloud centroid is the origin.
        let heights = [0.1, -0.3, -0.7, 0.9];
        let mut clouds = Vec::new();
        let mut truths = Vec::new();
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::new();
            let mut labels = Vec::new();
            for (ring, z) in heights.iter().enumerate() {
                let r: f64 = rng.gen_range(0.5..2.0);
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                for s in 0..50 {
                    let th = phase + s as f64 * std::f64::consts::TAU / 50.0;
                    pts.push([r * th.cos(), r * th.sin(), *z]);
                    labels.push(ring);
                }
            }
            // Shuffle cluster ids so ring order is not the id order.
            let perm = [2, 0, 3, 1];
            let labels: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
            truths.push(perm);
            let p = SemanticPartition::from_labels(&pts, labels, 4, 1.5).unwrap();
            clouds.push((PointCloud::new(format!("c{seed}"), pts).unwrap(), p));
        }
        let items: Vec<_> = clouds.iter().map(|(c, p)| (c, p)).collect();
        let (aligned, ranked) = match_across(&items).unwrap();
        for (m, perm) in aligned.mappings.iter().zip(&truths) {
            for ring in 0..4 {
                assert_eq!(m[perm[ring]], ring);
            }
        }
        // Merged spaces are disjoint: each (cloud, point) carries one semantic id.
        for p in &ranked {
            let sem = p.semantic_labels().unwrap();
            assert_eq!(sem.len(), 200);
            let mut m = p.rank.clone().unwrap();
            m.sort();
            assert_eq!(m, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn mismatched_k_rejected() {
        let pts: Vec<Point3<f64>> = (0..10).map(|i| [i as f64, 0.0, 0.0]).collect();
        let c = PointCloud::new("m", pts.clone()).unwrap();
        let p2 = cut(&c, &CutParams::with_k(2)).unwrap();
        let p3 = cut(&c, &CutParams::with_k(3)).unwrap();
        assert!(match_across(&[(&c, &p2), (&c, &p3)]).is_err());
        let (single, _) = match_across(&[(&c, &p2)]).unwrap();
        assert_eq!(single.mappings.len(), 1);
    }
}
