pub mod dataset;
pub mod model;
pub mod ply;
pub mod scores;

pub use dataset::{read_dataset, write_dataset};
pub use model::{load_model, save_model};
pub use ply::{encode_ply, parse_ply, read_ply, write_ply, PlyMode};
pub use scores::{PointScores, OBJECT_HEADER, POINT_HEADER};
