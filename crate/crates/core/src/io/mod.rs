//! File formats: dense depth maps, point CSV, reports and color export.

pub mod colorize;
pub mod depth;
pub mod points;
pub mod report;

pub use colorize::{colorize, write_colorized};
pub use depth::{
    decode_pfm, decode_png16, encode_pfm, encode_png16, read_dense_depth, read_relative_depth,
    write_dense_depth, write_relative_depth, FloatImage,
};
pub use points::{decode_points, encode_points, read_points, write_points, PointsFile};
pub use report::Report;
