//! End-to-end tracking: preprocessing, per-camera tracking and
//! cross-camera association.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::preprocess;
use crate::mct::{merge_trajectories, MctError, MergeEvent};
use crate::model::{CameraId, Detection, IdentityCluster, PipelineConfig, Trajectory};
use crate::sct::{track_camera, SctError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("camera {camera}: {source}")]
    Sct {
        camera: CameraId,
        #[source]
        source: SctError,
    },
    #[error(transparent)]
    Mct(#[from] MctError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Single-camera trajectories, keyed by camera.
    pub per_camera: BTreeMap<CameraId, Vec<Trajectory>>,
    pub clusters: Vec<IdentityCluster>,
    /// Accepted cross-camera unions; empty when association was skipped.
    pub merges: Vec<MergeEvent>,
}

/// Confidence filter, NMS and optional feature normalization.
pub fn prepare(detections: &[Detection], config: &PipelineConfig) -> Vec<Detection> {
    let mut kept = preprocess(
        detections,
        config.detection_confidence_threshold,
        config.nms_iou_threshold,
    );
    if config.normalize_features {
        for d in &mut kept {
            if let Some(f) = &d.feature {
                d.feature = Some(f.normalized());
            }
        }
    }
    kept
}

/// Detections grouped by camera, input order kept within a camera.
pub fn group_by_camera(detections: &[Detection]) -> BTreeMap<CameraId, Vec<Detection>> {
    let mut out: BTreeMap<CameraId, Vec<Detection>> = BTreeMap::new();
    for d in detections {
        out.entry(d.camera).or_default().push(d.clone());
    }
    out
}

pub fn check_config(config: &PipelineConfig) -> Result<(), PipelineError> {
    let violations = config.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Config(
            violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ))
    }
}

pub fn track_one_camera(camera: CameraId, detections: &[Detection], config: &PipelineConfig) -> Result<Vec<Trajectory>, PipelineError> {
    track_camera(detections, config).map_err(|source| PipelineError::Sct { camera, source })
}

/// Cross-camera step over finished single-camera results. With
/// `sct_only`, every trajectory becomes its own identity, numbered in
/// camera order.
pub fn associate(
    per_camera: BTreeMap<CameraId, Vec<Trajectory>>,
    config: &PipelineConfig,
    sct_only: bool,
) -> Result<PipelineOutput, PipelineError> {
    let all: Vec<Trajectory> = per_camera.values().flatten().cloned().collect();
    let (clusters, merges) = if sct_only {
        let clusters = all
            .into_iter()
            .enumerate()
            .map(|(i, t)| IdentityCluster::new(i as u32 + 1, vec![t]))
            .collect();
        (clusters, Vec::new())
    } else {
        let outcome = merge_trajectories(&all, config)?;
        (outcome.clusters, outcome.merges)
    };
    Ok(PipelineOutput {
        per_camera,
        clusters,
        merges,
    })
}

/// Sequential full run; every detection must carry a feature.
pub fn run_pipeline(detections: &[Detection], config: &PipelineConfig, sct_only: bool) -> Result<PipelineOutput, PipelineError> {
    check_config(config)?;
    let prepared = prepare(detections, config);
    let mut per_camera = BTreeMap::new();
    for (camera, dets) in group_by_camera(&prepared) {
        per_camera.insert(camera, track_one_camera(camera, &dets, config)?);
    }
    associate(per_camera, config, sct_only)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, FeatureVector};

    fn walker(camera: CameraId, frames: std::ops::Range<u32>, x0: f64, feature: &[f64]) -> Vec<Detection> {
        frames
            .map(|f| {
                let x = x0 + 3.0 * f as f64;
                Detection::new(camera, f, BoundingBox::new(x, 0.0, x + 40.0, 100.0).unwrap(), 0.95)
                    .with_feature(FeatureVector::new(feature.to_vec()).unwrap())
            })
            .collect()
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            rerank_lambda: 1.0,
            overlapping_camera_pairs: Default::default(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn empty_input() {
        let out = run_pipeline(&[], &config(), false).unwrap();
        assert!(out.clusters.is_empty() && out.per_camera.is_empty());
    }

    #[test]
    fn one_person_two_cameras() {
        let mut dets = walker(1, 0..30, 0.0, &[1.0, 0.0]);
        dets.extend(walker(2, 50..80, 500.0, &[1.0, 0.02]));
        dets.extend(walker(2, 0..30, 900.0, &[0.0, 1.0]));
        let out = run_pipeline(&dets, &config(), false).unwrap();
        assert_eq!(out.per_camera[&1].len(), 1);
        assert_eq!(out.per_camera[&2].len(), 2);
        assert_eq!(out.clusters.len(), 2);
        assert_eq!(out.merges.len(), 1);
        let sizes: Vec<usize> = out.clusters.iter().map(|c| c.members.len()).collect();
        assert_eq!(sizes, [2, 1]);

        let sct = run_pipeline(&dets, &config(), true).unwrap();
        assert_eq!(sct.clusters.len(), 3);
        assert!(sct.merges.is_empty());
    }

    #[test]
    fn low_confidence_is_dropped_before_tracking() {
        let mut dets = walker(1, 0..10, 0.0, &[1.0]);
        for d in &mut dets {
            d.confidence = 0.5;
        }
        let out = run_pipeline(&dets, &config(), false).unwrap();
        assert!(out.clusters.is_empty());
    }

    #[test]
    fn missing_feature_is_reported_with_camera() {
        let dets = vec![
            Detection::new(4, 0, BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 1.0),
            Detection::new(4, 1, BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 1.0),
        ];
        assert!(matches!(
            run_pipeline(&dets, &config(), false),
            Err(PipelineError::Sct { camera: 4, .. })
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = PipelineConfig {
            s: -1.0,
            ..config()
        };
        assert!(matches!(run_pipeline(&[], &c, false), Err(PipelineError::Config(_))));
    }
}
