//! Domain types shared by every stage of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Camera identifier, `1..=C`.
pub type CameraId = u32;
/// Frame index, shared across synchronized cameras.
pub type Frame = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid box ({left}, {top}, {right}, {bottom}): {reason}")]
    InvalidBox {
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
        reason: &'static str,
    },
    #[error("feature vector contains a non-finite value at index {0}")]
    NonFiniteFeature(usize),
    #[error("frames must be strictly increasing (frame {0} follows {1})")]
    NonIncreasingFrames(Frame, Frame),
    #[error("trajectory has no observed (non-interpolated) entry")]
    NoObservedEntry,
    #[error("interpolated entry at frame {0} carries a feature")]
    InterpolatedWithFeature(Frame),
}

/// Axis-aligned box in image coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self, ModelError> {
        let invalid = |reason| ModelError::InvalidBox {
            left,
            top,
            right,
            bottom,
            reason,
        };
        if ![left, top, right, bottom].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if left >= right {
            return Err(invalid("left must be smaller than right"));
        }
        if top >= bottom {
            return Err(invalid("top must be smaller than bottom"));
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    /// Box of the given size centred on `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, ModelError> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn bottom(&self) -> f64 {
        self.bottom
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.left + self.right) / 2.0,
            (self.top + self.bottom) / 2.0,
        )
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.left, self.top, self.right, self.bottom]
    }

    /// Linear blend `self + t * (other - self)` per coordinate.
    pub fn lerp(&self, other: &BoundingBox, t: f64) -> BoundingBox {
        let a = self.coords();
        let b = other.coords();
        let c: [f64; 4] = std::array::from_fn(|k| a[k] + t * (b[k] - a[k]));
        // Convex combinations of valid boxes stay valid.
        BoundingBox {
            left: c[0],
            top: c[1],
            right: c[2],
            bottom: c[3],
        }
    }

    /// Coordinate-wise mean of a non-empty set of boxes.
    pub fn mean<'a>(boxes: impl IntoIterator<Item = &'a BoundingBox>) -> Option<BoundingBox> {
        let mut sum = [0.0; 4];
        let mut n = 0usize;
        for b in boxes {
            for (s, v) in sum.iter_mut().zip(b.coords()) {
                *s += v;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let n = n as f64;
        Some(BoundingBox {
            left: sum[0] / n,
            top: sum[1] / n,
            right: sum[2] / n,
            bottom: sum[3] / n,
        })
    }
}

/// Appearance embedding of one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scaled to unit length; the zero vector is returned unchanged.
    pub fn normalized(&self) -> FeatureVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        FeatureVector(self.0.iter().map(|v| v / n).collect())
    }

    /// Componentwise mean. `None` for an empty input.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Option<FeatureVector> {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut sum = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            debug_assert_eq!(v.dim(), sum.len());
            for (s, x) in sum.iter_mut().zip(&v.0) {
                *s += x;
            }
            n += 1;
        }
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Some(FeatureVector(sum))
    }
}

/// One box observed in one camera and frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub camera: CameraId,
    pub frame: Frame,
    pub bbox: BoundingBox,
    pub confidence: f64,
    /// Absent until paired with a feature file.
    pub feature: Option<FeatureVector>,
}

impl Detection {
    pub fn new(camera: CameraId, frame: Frame, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            camera,
            frame,
            bbox,
            confidence,
            feature: None,
        }
    }

    pub fn with_feature(mut self, feature: FeatureVector) -> Self {
        self.feature = Some(feature);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub bbox: BoundingBox,
    pub feature: Option<FeatureVector>,
    pub interpolated: bool,
    /// Index of the originating detection in the tracker's input, when known.
    pub source: Option<usize>,
}

impl TrajectoryEntry {
    pub fn observed(bbox: BoundingBox, feature: Option<FeatureVector>) -> Self {
        Self {
            bbox,
            feature,
            interpolated: false,
            source: None,
        }
    }

    pub fn interpolated(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            feature: None,
            interpolated: true,
            source: None,
        }
    }
}

/// Frame-ordered sequence of boxes for one target in one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    camera: CameraId,
    entries: BTreeMap<Frame, TrajectoryEntry>,
}

impl Trajectory {
    /// Builds a trajectory from `(frame, entry)` pairs given in frame order.
    pub fn new(
        camera: CameraId,
        entries: impl IntoIterator<Item = (Frame, TrajectoryEntry)>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        let mut prev: Option<Frame> = None;
        for (frame, entry) in entries {
            if let Some(p) = prev {
                if frame <= p {
                    return Err(ModelError::NonIncreasingFrames(frame, p));
                }
            }
            if entry.interpolated && entry.feature.is_some() {
                return Err(ModelError::InterpolatedWithFeature(frame));
            }
            prev = Some(frame);
            map.insert(frame, entry);
        }
        if !map.values().any(|e| !e.interpolated) {
            return Err(ModelError::NoObservedEntry);
        }
        Ok(Self {
            camera,
            entries: map,
        })
    }

    pub(crate) fn from_map(camera: CameraId, entries: BTreeMap<Frame, TrajectoryEntry>) -> Self {
        debug_assert!(entries.values().any(|e| !e.interpolated));
        Self { camera, entries }
    }

    pub fn camera(&self) -> CameraId {
        self.camera
    }

    pub fn entries(&self) -> &BTreeMap<Frame, TrajectoryEntry> {
        &self.entries
    }

    pub fn into_entries(self) -> BTreeMap<Frame, TrajectoryEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_frame(&self) -> Frame {
        *self.entries.keys().next().expect("trajectory is never empty")
    }

    pub fn last_frame(&self) -> Frame {
        *self.entries.keys().next_back().expect("trajectory is never empty")
    }

    pub fn get(&self, frame: Frame) -> Option<&TrajectoryEntry> {
        self.entries.get(&frame)
    }

    pub fn is_contiguous(&self) -> bool {
        (self.last_frame() - self.first_frame()) as usize + 1 == self.entries.len()
    }

    /// True when the inclusive frame ranges intersect.
    pub fn overlaps_in_time(&self, other: &Trajectory) -> bool {
        self.first_frame() <= other.last_frame() && other.first_frame() <= self.last_frame()
    }

    /// Frames strictly between the two ranges; 0 when they overlap or touch.
    pub fn gap_to(&self, other: &Trajectory) -> u32 {
        if self.overlaps_in_time(other) {
            0
        } else if self.last_frame() < other.first_frame() {
            other.first_frame() - self.last_frame()
        } else {
            self.first_frame() - other.last_frame()
        }
    }

    /// Observed entries that carry a feature.
    pub fn features(&self) -> impl Iterator<Item = (Frame, &FeatureVector)> {
        self.entries
            .iter()
            .filter(|(_, e)| !e.interpolated)
            .filter_map(|(f, e)| e.feature.as_ref().map(|v| (*f, v)))
    }

    /// Copy with features and detection sources dropped, as stored on disk.
    pub fn without_features(&self) -> Trajectory {
        let entries = self
            .entries
            .iter()
            .map(|(f, e)| {
                (
                    *f,
                    TrajectoryEntry {
                        bbox: e.bbox,
                        feature: None,
                        interpolated: e.interpolated,
                        source: None,
                    },
                )
            })
            .collect();
        Trajectory {
            camera: self.camera,
            entries,
        }
    }
}

/// Trajectories, possibly spanning cameras, attributed to one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCluster {
    pub identity: u32,
    pub members: Vec<Trajectory>,
}

impl IdentityCluster {
    pub fn new(identity: u32, members: Vec<Trajectory>) -> Self {
        Self { identity, members }
    }

    pub fn first_frame(&self) -> Option<Frame> {
        self.members.iter().map(Trajectory::first_frame).min()
    }

    /// Members ordered by `(camera, first frame)`.
    pub fn sort_members(&mut self) {
        self.members
            .sort_by_key(|t| (t.camera(), t.first_frame(), t.last_frame()));
    }
}

/// Unordered pair of cameras, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CameraPair(CameraId, CameraId);

impl CameraPair {
    pub fn new(a: CameraId, b: CameraId) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn first(&self) -> CameraId {
        self.0
    }

    pub fn second(&self) -> CameraId {
        self.1
    }
}

impl fmt::Display for CameraPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Every threshold and constant the pipeline uses.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Merge threshold of the adjacent-frame weight.
    pub s: f64,
    /// Stop threshold of the single-camera clustering; `None` reuses `s`.
    pub sct_stop_threshold: Option<f64>,
    pub iou_gate: f64,
    pub window_frames: u32,
    pub neighbor_frames: usize,
    /// Pixels per frame.
    pub speed_threshold: f64,
    pub overlap_iou_threshold: f64,
    pub smoothing_window: usize,
    pub rerank_k1: usize,
    pub rerank_k2: usize,
    pub rerank_lambda: f64,
    pub mct_merge_threshold: f64,
    pub max_gap_frames: u32,
    pub overlapping_camera_pairs: BTreeSet<CameraPair>,
    pub fps: f64,
    pub detection_confidence_threshold: f64,
    pub nms_iou_threshold: f64,
    /// Scale every feature to unit length before tracking.
    pub normalize_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            sct_stop_threshold: None,
            iou_gate: 0.5,
            window_frames: 60,
            neighbor_frames: 10,
            speed_threshold: 15.0,
            overlap_iou_threshold: 0.5,
            smoothing_window: 5,
            rerank_k1: 20,
            rerank_k2: 6,
            rerank_lambda: 0.3,
            mct_merge_threshold: 0.5,
            max_gap_frames: 3600,
            overlapping_camera_pairs: [(2, 8), (3, 5), (5, 7)]
                .into_iter()
                .map(|(a, b)| CameraPair::new(a, b))
                .collect(),
            fps: 60.0,
            detection_confidence_threshold: 0.9,
            nms_iou_threshold: 0.3,
            normalize_features: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl PipelineConfig {
    pub fn sct_threshold(&self) -> f64 {
        self.sct_stop_threshold.unwrap_or(self.s)
    }

    pub fn cameras_may_overlap(&self, a: CameraId, b: CameraId) -> bool {
        self.overlapping_camera_pairs.contains(&CameraPair::new(a, b))
    }

    /// Every invariant the config breaks; empty when valid.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        let mut push = |field, message: String| out.push(ConfigViolation { field, message });

        let positive = [
            ("s", self.s),
            ("speed_threshold", self.speed_threshold),
            ("mct_merge_threshold", self.mct_merge_threshold),
            ("fps", self.fps),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                push(field, format!("must be finite and positive, got {v}"));
            }
        }
        if let Some(v) = self.sct_stop_threshold {
            if !(v.is_finite() && v > 0.0) {
                push(
                    "sct_stop_threshold",
                    format!("must be finite and positive, got {v}"),
                );
            }
        }
        let unit = [
            ("iou_gate", self.iou_gate),
            ("overlap_iou_threshold", self.overlap_iou_threshold),
            ("nms_iou_threshold", self.nms_iou_threshold),
            ("rerank_lambda", self.rerank_lambda),
            (
                "detection_confidence_threshold",
                self.detection_confidence_threshold,
            ),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                push(field, format!("must lie in [0, 1], got {v}"));
            }
        }
        let counts = [
            ("window_frames", self.window_frames as usize),
            ("neighbor_frames", self.neighbor_frames),
            ("rerank_k1", self.rerank_k1),
            ("rerank_k2", self.rerank_k2),
            ("max_gap_frames", self.max_gap_frames as usize),
        ];
        for (field, v) in counts {
            if v == 0 {
                push(field, "must be at least 1".to_string());
            }
        }
        if self.smoothing_window.is_multiple_of(2) {
            push(
                "smoothing_window",
                format!("must be an odd positive integer, got {}", self.smoothing_window),
            );
        }
        for pair in &self.overlapping_camera_pairs {
            if pair.first() == pair.second() {
                push(
                    "overlapping_camera_pairs",
                    format!("pair {pair} names the same camera twice"),
                );
            }
        }
        out
    }
}

/// Free-function form of [`PipelineConfig::validate`].
pub fn validate_config(config: &PipelineConfig) -> Vec<ConfigViolation> {
    config.validate()
}
