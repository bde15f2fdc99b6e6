//! Point clouds, exact spatial indexing, farthest point sampling and
//! coordinate preprocessing.

mod cloud;
mod fps;
mod kdtree;

pub use cloud::{centroid, choose_start_point, normalize_cloud, standardize_cloud, PointCloud};
pub use fps::farthest_point_sample;
pub use kdtree::SpatialIndex;
