//! Sparse dToF depth toolkit.
//!
//! * [`sim`] turns dense ground truth into realistic sparse sensor frames
//!   with labeled corruptions.
//! * [`anomaly`] flags erroneous sparse points by comparing them against a
//!   monocular relative depth map, without tuning per frame.
//! * [`align`] fits relative depth to the surviving points and completes a
//!   dense metric map.
//! * [`metrics`] scores dense predictions and the detector.
//! * [`io`] and [`config`] hold file formats and the run configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod anomaly;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod scene;
pub mod sim;
pub mod types;

pub use align::{complete, complete_with_residuals, fit_affine, AffineFit, FitDomain};
pub use anomaly::{detect, mask_points, AnomalyResult, DetectorConfig, ThresholdMode};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use metrics::{detector_prf, evaluate, evaluate_complement, ewmae, EvalReport, Prf, Region};
pub use sim::{simulate, ErrorPolicy, PointLabel, SimConfig, SimOutput};
pub use types::{
    normalize_coords, pair_points, DenseDepthMap, DepthPoint, Orientation, RelativeDepthMap,
    SensorSpec, SparsePointSet,
};
