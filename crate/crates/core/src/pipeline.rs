//! End-to-end fit and score: normalise, estimate normals, FPFH, cut, match,
//! then bank or score per semantic space.

use rayon::prelude::*;

use crate::cutting::{cut, CutParams, SemanticPartition};
use crate::error::{Error, Result};
use crate::features::{compute_fpfh, estimate_normals, FeatureMatrix, FpfhParams};
use crate::geometry::{normalize_cloud, PointCloud};
use crate::matching::{match_across, rank_partition};
use crate::memory::{MemoryBankSet, ObjectScore, ScoreReport};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub cut: CutParams,
    pub fpfh: FpfhParams,
    /// Unit-sphere normalisation before anything else.
    pub normalize: bool,
    pub object_score: ObjectScore,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            cut: CutParams::default(),
            fpfh: FpfhParams::default(),
            normalize: true,
            object_score: ObjectScore::Max,
        }
    }
}

impl PipelineParams {
    pub fn with_k(k: usize) -> Self {
        let mut p = Self::default();
        p.cut.k = k;
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.cut.validate()?;
        self.fpfh.validate()
    }
}

/// A cloud after preprocessing, with its descriptors. Independent of `k`.
#[derive(Debug, Clone)]
pub struct Prepared<T: Real> {
    pub cloud: PointCloud<T>,
    pub features: FeatureMatrix<T>,
}

pub fn prepare<T: Real>(cloud: &PointCloud<T>, params: &PipelineParams) -> Result<Prepared<T>> {
    params.validate()?;
    let base = if params.normalize {
        normalize_cloud(cloud)?
    } else {
        cloud.clone()
    };
    let with_normals = estimate_normals(&base.without_normals(), params.fpfh.normal_k)?.cloud;
    let features = compute_fpfh(&with_normals, &params.fpfh)?;
    Ok(Prepared {
        cloud: with_normals,
        features,
    })
}

pub fn prepare_all<T: Real>(clouds: &[PointCloud<T>], params: &PipelineParams) -> Result<Vec<Prepared<T>>> {
    clouds.par_iter().map(|c| prepare(c, params)).collect()
}

/// Cut and rank one prepared cloud on its own.
pub fn ranked_partition<T: Real>(prepared: &Prepared<T>, params: &CutParams) -> Result<SemanticPartition<T>> {
    rank_partition(&prepared.cloud, &cut(&prepared.cloud, params)?)
}

/// Banks plus the parameters needed to score consistently against them.
#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    pub banks: MemoryBankSet<T>,
    pub params: PipelineParams,
    pub train_points: usize,
}

pub fn fit_prepared<T: Real>(train: &[Prepared<T>], params: &PipelineParams) -> Result<Model<T>> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let partitions = train
        .par_iter()
        .map(|p| cut(&p.cloud, &params.cut))
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<_> = train.iter().map(|p| &p.cloud).zip(partitions.iter()).collect();
    let (_, ranked) = match_across(&items)?;
    let features: Vec<FeatureMatrix<T>> = train.iter().map(|p| p.features.clone()).collect();
    let banks = MemoryBankSet::from_features(&features, &ranked, params.fpfh)?;
    Ok(Model {
        banks,
        params: *params,
        train_points: train.iter().map(|p| p.cloud.len()).sum(),
    })
}

pub fn fit<T: Real>(train: &[PointCloud<T>], params: &PipelineParams) -> Result<Model<T>> {
    fit_prepared(&prepare_all(train, params)?, params)
}

/// The test cloud is cut and ranked independently with the model's parameters,
/// and each point is compared only with the bank of its own semantic id.
pub fn score_prepared<T: Real>(prepared: &Prepared<T>, model: &Model<T>) -> Result<(ScoreReport<T>, SemanticPartition<T>)> {
    if model.banks.k() != model.params.cut.k {
        return Err(Error::invalid("bank count differs from model k"));
    }
    let partition = ranked_partition(prepared, &model.params.cut)?;
    let semantic = partition.semantic_labels().expect("ranked");
    let report = model
        .banks
        .score_features(&prepared.features, semantic, model.params.object_score)?;
    Ok((report, partition))
}

pub fn score_cloud<T: Real>(cloud: &PointCloud<T>, model: &Model<T>) -> Result<ScoreReport<T>> {
    let prepared = prepare(cloud, &model.params)?;
    Ok(score_prepared(&prepared, model)?.0)
}
