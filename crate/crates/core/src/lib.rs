//! Multi-target multi-camera tracking by detection.
//!
//! Detections are linked into tracklets by bipartite matching between
//! adjacent frames, tracklets are clustered into single-camera
//! trajectories, and trajectories are merged across cameras into
//! identities. The crate also carries the identity metrics, a synthetic
//! scene generator and the text file formats.

pub mod assignment;
pub mod geometry;
pub mod io;
pub mod mct;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sct;
pub mod synthgen;

pub use assignment::{solve_max_weight_matching, Matching, WeightMatrix};
pub use metrics::{id_measures, IdMetricsReport};
pub use model::{
    validate_config, BoundingBox, CameraId, CameraPair, ConfigViolation, Detection, FeatureVector, Frame,
    IdentityCluster, ModelError, PipelineConfig, Trajectory, TrajectoryEntry,
};
pub use pipeline::{run_pipeline, PipelineError, PipelineOutput};
