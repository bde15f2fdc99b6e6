//! Synthetic benchmark: generated shape classes with injected anomalies,
//! evaluated per class and averaged.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::memory::ScoreReport;
use crate::metrics::{partition_accuracy, shift_stats, ClassEval, EvalReport};
use crate::pipeline::{fit_prepared, prepare_all, score_prepared, PipelineParams, Prepared};
use crate::synth::{inject_anomaly, make_shape_with_parts, AnomalySign, AnomalySpec, ShapeKind, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub shapes: Vec<ShapeKind>,
    pub n_points: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub sigma: f64,
    pub anomaly_radius: f64,
    pub amplitude: (f64, f64),
    pub sign: AnomalySign,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            shapes: ShapeKind::ALL.to_vec(),
            n_points: 4096,
            n_train: 4,
            n_test: 20,
            sigma: 0.002,
            anomaly_radius: 0.35,
            amplitude: AnomalySpec::amplitude_around(0.07),
            sign: AnomalySign::Random,
            seed: 0,
        }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::EmptyInput("shape classes"));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("n_train and n_test must be positive"));
        }
        Ok(())
    }
}

/// Deterministic per-cloud seed.
pub fn derive_seed(base: u64, class: usize, role: u64, index: usize) -> u64 {
    let mut z = base
        ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ role.wrapping_mul(0xD1B5_4A32_D192_ED03)
        ^ (index as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ROLE_TRAIN: u64 = 1;
const ROLE_TEST: u64 = 2;
const ROLE_ANOMALY: u64 = 3;

/// Test clouds at odd indices carry an anomaly.
pub fn is_anomalous_index(i: usize) -> bool {
    i % 2 == 1
}

#[derive(Debug, Clone)]
pub struct ClassData {
    pub name: String,
    pub train: Vec<PointCloud<f64>>,
    /// Every test cloud carries a mask, all-false when clean.
    pub test: Vec<PointCloud<f64>>,
    /// Ground-truth part label per test point, when known.
    pub test_parts: Option<Vec<Vec<usize>>>,
}

pub fn generate(spec: &SuiteSpec) -> Result<Vec<ClassData>> {
    spec.validate()?;
    spec.shapes
        .iter()
        .enumerate()
        .map(|(ci, &shape)| generate_class(spec, ci, shape))
        .collect()
}

fn generate_class(spec: &SuiteSpec, ci: usize, shape: ShapeKind) -> Result<ClassData> {
    let make = |role, i| {
        make_shape_with_parts::<f64>(&SynthSpec {
            shape,
            n: spec.n_points,
            sigma: spec.sigma,
            seed: derive_seed(spec.seed, ci, role, i),
        })
    };
    let train = (0..spec.n_train)
        .map(|i| Ok(make(ROLE_TRAIN, i)?.cloud))
        .collect::<Result<Vec<_>>>()?;
    let mut test = Vec::with_capacity(spec.n_test);
    let mut test_parts = Vec::with_capacity(spec.n_test);
    for i in 0..spec.n_test {
        let s = make(ROLE_TEST, i)?;
        let cloud = if is_anomalous_index(i) {
            inject_anomaly(
                &s.cloud,
                &AnomalySpec {
                    radius: spec.anomaly_radius,
                    amplitude: spec.amplitude,
                    sign: spec.sign,
                    seed: derive_seed(spec.seed, ci, ROLE_ANOMALY, i),
                },
            )?
        } else {
            let n = s.cloud.len();
            s.cloud.with_anomaly_mask(vec![false; n])?
        };
        test.push(cloud);
        test_parts.push(s.parts);
    }
    Ok(ClassData {
        name: shape.name().to_string(),
        train,
        test,
        test_parts: Some(test_parts),
    })
}

/// A class after preprocessing, reusable across every `k`.
#[derive(Debug, Clone)]
pub struct PreparedClass {
    pub name: String,
    pub train: Vec<Prepared<f64>>,
    pub test: Vec<Prepared<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub test_parts: Option<Vec<Vec<usize>>>,
}

pub fn prepare_class(data: &ClassData, params: &PipelineParams) -> Result<PreparedClass> {
    let masks = data
        .test
        .iter()
        .map(|c| {
            c.anomaly_mask()
                .map(|m| m.to_vec())
                .ok_or_else(|| Error::invalid(format!("test cloud '{}' has no ground truth", c.id())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedClass {
        name: data.name.clone(),
        train: prepare_all(&data.train, params)?,
        test: prepare_all(&data.test, params)?,
        masks,
        test_parts: data.test_parts.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct ClassRun {
    pub eval: ClassEval,
    pub reports: Vec<ScoreReport<f64>>,
    pub fit_seconds: f64,
    pub score_seconds: f64,
    /// Every scored point consulted exactly the bank of its own semantic id.
    pub confined: bool,
}

pub fn run_class(class: &PreparedClass, params: &PipelineParams) -> Result<ClassRun> {
    let t0 = Instant::now();
    let model = fit_prepared(&class.train, params)?;
    let fit_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let scored = class
        .test
        .iter()
        .map(|p| score_prepared(p, &model))
        .collect::<Result<Vec<_>>>()?;
    let score_seconds = t1.elapsed().as_secs_f64();

    let confined = scored.iter().all(|(r, _)| {
        r.consulted_bank
            .iter()
            .zip(&r.semantic_of_point)
            .zip(&r.degenerate)
            .all(|((b, s), d)| if *d { b.is_none() } else { *b == Some(*s) })
    });

    let point_scores: Vec<Vec<f64>> = scored.iter().map(|(r, _)| r.point_scores.clone()).collect();
    let object_scores: Vec<f64> = scored.iter().map(|(r, _)| r.object_score).collect();
    let mut eval = ClassEval::new(class.name.clone(), params.cut.k).with_detection(&point_scores, &class.masks, &object_scores)?;

    if let Some(parts) = &class.test_parts {
        let accs = scored
            .iter()
            .zip(parts)
            .map(|((_, part), truth)| partition_accuracy(&part.labels, truth).map(|a| a.value))
            .collect::<Result<Vec<_>>>()?;
        eval.partition_accuracy = Some(accs.iter().sum::<f64>() / accs.len() as f64);
    }

    let train_xyz: Vec<[f64; 3]> = class.train.iter().flat_map(|p| p.cloud.points().iter().copied()).collect();
    let test_xyz: Vec<[f64; 3]> = class.test.iter().flat_map(|p| p.cloud.points().iter().copied()).collect();
    let coords = shift_stats::<f64, _>(&train_xyz, &test_xyz)?;
    let train_f: Vec<&[f64]> = class.train.iter().flat_map(|p| p.features.rows()).collect();
    let test_f: Vec<&[f64]> = class.test.iter().flat_map(|p| p.features.rows()).collect();
    let feats = shift_stats::<f64, _>(&train_f, &test_f)?;
    eval.coord_mean_shift = Some(coords.mean_diff);
    eval.coord_var_shift = Some(coords.var_diff);
    eval.feature_mean_shift = Some(feats.mean_diff);
    eval.feature_var_shift = Some(feats.var_diff);

    let comparisons: u64 = scored.iter().map(|(r, _)| r.comparisons_made).sum();
    let queries: usize = scored
        .iter()
        .map(|(r, _)| r.degenerate.iter().filter(|d| !**d).count())
        .sum();
    eval.comparisons_per_query = if queries == 0 {
        0.0
    } else {
        comparisons as f64 / queries as f64
    };

    Ok(ClassRun {
        eval,
        reports: scored.into_iter().map(|(r, _)| r).collect(),
        fit_seconds,
        score_seconds,
        confined,
    })
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: EvalReport,
    pub classes: Vec<ClassRun>,
}

impl SuiteRun {
    pub fn fit_seconds(&self) -> f64 {
        self.classes.iter().map(|c| c.fit_seconds).sum()
    }

    pub fn score_seconds(&self) -> f64 {
        self.classes.iter().map(|c| c.score_seconds).sum()
    }

    pub fn confined(&self) -> bool {
        self.classes.iter().all(|c| c.confined)
    }
}

pub fn prepare_suite(data: &[ClassData], params: &PipelineParams) -> Result<Vec<PreparedClass>> {
    data.par_iter().map(|d| prepare_class(d, params)).collect()
}

pub fn run_suite(classes: &[PreparedClass], params: &PipelineParams) -> Result<SuiteRun> {
    let runs = classes
        .iter()
        .map(|c| run_class(c, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteRun {
        report: EvalReport {
            classes: runs.iter().map(|r| r.eval.clone()).collect(),
        },
        classes: runs,
    })
}
