//! Per-point descriptors: PCA normals and 33-bin fast point feature histograms.

mod eigen;
mod fpfh;
mod normals;

pub use fpfh::{
    angle_bins, compute_fpfh, pair_features, FeatureMatrix, FpfhParams, BINS_PER_ANGLE, FPFH_DIM,
};
pub use normals::{estimate_normals, NormalEstimate};
