//! Patch-level point-cloud anomaly detection.
//!
//! A cloud is described by per-point FPFH features, split into spatially
//! ranked semantic patches, and scored against per-patch memory banks built
//! from nominal training clouds. Matching each test patch only against its own
//! bank keeps the search small and the scores local.
//!
//! Every numeric type is generic over [`scalar::Real`]; the aliases below fix
//! the precision for the common cases.

pub mod commands;
pub mod config;
pub mod cutting;
pub mod error;
pub mod features;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod memory;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod suite;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PointCloudF64 = geometry::PointCloud<f64>;
pub type PointCloudF32 = geometry::PointCloud<f32>;
pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type SemanticPartitionF64 = cutting::SemanticPartition<f64>;
pub type SemanticPartitionF32 = cutting::SemanticPartition<f32>;
pub type MemoryBankSetF64 = memory::MemoryBankSet<f64>;
pub type MemoryBankSetF32 = memory::MemoryBankSet<f32>;
pub type ScoreReportF64 = memory::ScoreReport<f64>;
pub type ScoreReportF32 = memory::ScoreReport<f32>;
pub type ModelF64 = pipeline::Model<f64>;
pub type ModelF32 = pipeline::Model<f32>;
