//! Near-online single-camera tracking.
//!
//! Detections of adjacent frames are linked by maximum-weight matching into
//! tracklets, window by window. Tracklets are then merged with the live
//! trajectories of earlier windows by agglomerative clustering, and the
//! finished trajectories are interpolated and smoothed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assignment::{solve_max_weight_matching, Matching, WeightMatrix};
use crate::geometry::{gate, iou};
use crate::model::{
    BoundingBox, CameraId, Detection, FeatureVector, Frame, PipelineConfig, Trajectory,
    TrajectoryEntry,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SctError {
    #[error("detection {index} (camera {camera}, frame {frame}) has no feature vector")]
    MissingFeature {
        index: usize,
        camera: CameraId,
        frame: Frame,
    },
    #[error("trajectory in camera {camera} starting at frame {first} has no features")]
    NoFeatures { camera: CameraId, first: Frame },
    #[error("expected detections of camera {expected}, found camera {found}")]
    MixedCameras { expected: CameraId, found: CameraId },
}

/// Short trajectory built from adjacent-frame links inside one window.
/// Consecutive entries sit on adjacent frames and all carry features.
pub type Tracklet = Trajectory;

fn feature_of(det: &Detection, index: usize) -> Result<&FeatureVector, SctError> {
    det.feature.as_ref().ok_or(SctError::MissingFeature {
        index,
        camera: det.camera,
        frame: det.frame,
    })
}

/// Link weight between a detection and one in the following frame:
/// `s - |f_a - f_b| - gate(iou, iou_gate)`, `-inf` when the gate fails.
pub fn pairwise_weight(a: &Detection, b: &Detection, config: &PipelineConfig) -> Result<f64, SctError> {
    let fa = feature_of(a, 0)?;
    let fb = feature_of(b, 1)?;
    Ok(weight(fa, fb, &a.bbox, &b.bbox, config))
}

fn weight(
    fa: &FeatureVector,
    fb: &FeatureVector,
    ba: &BoundingBox,
    bb: &BoundingBox,
    config: &PipelineConfig,
) -> f64 {
    let g = gate(iou(ba, bb), config.iou_gate);
    if g.is_infinite() {
        return f64::NEG_INFINITY;
    }
    config.s - fa.distance(fb) - g
}

/// Matches detections of frame `t` (rows) to those of frame `t + 1` (columns).
pub fn link_adjacent_frames(
    frame_t: &[Detection],
    frame_t1: &[Detection],
    config: &PipelineConfig,
) -> Result<Matching, SctError> {
    let a: Vec<_> = frame_t.iter().enumerate().collect();
    let b: Vec<_> = frame_t1.iter().enumerate().collect();
    link(&a, &b, config)
}

fn link(
    a: &[(usize, &Detection)],
    b: &[(usize, &Detection)],
    config: &PipelineConfig,
) -> Result<Matching, SctError> {
    let fa = a
        .iter()
        .map(|&(i, d)| feature_of(d, i))
        .collect::<Result<Vec<_>, _>>()?;
    let fb = b
        .iter()
        .map(|&(i, d)| feature_of(d, i))
        .collect::<Result<Vec<_>, _>>()?;
    let w = WeightMatrix::from_fn(a.len(), b.len(), |r, c| {
        weight(fa[r], fb[c], &a[r].1.bbox, &b[c].1.bbox, config)
    })
    .expect("link weights are finite or -inf");
    Ok(solve_max_weight_matching(&w))
}

/// Chains adjacent-frame matches inside one window into tracklets.
///
/// Detections linked to nothing in either direction are treated as false
/// alarms and dropped. Entry `source` fields index into `window`.
pub fn build_tracklets(window: &[Detection], config: &PipelineConfig) -> Result<Vec<Tracklet>, SctError> {
    let indexed: Vec<_> = window.iter().enumerate().collect();
    build_tracklets_indexed(&indexed, config)
}

/// `items` carry the caller's index for each detection, stored as `source`.
pub(crate) fn build_tracklets_indexed(
    items: &[(usize, &Detection)],
    config: &PipelineConfig,
) -> Result<Vec<Tracklet>, SctError> {
    let Some(&(_, first)) = items.first() else {
        return Ok(Vec::new());
    };
    let camera = first.camera;
    if let Some(&(_, d)) = items.iter().find(|(_, d)| d.camera != camera) {
        return Err(SctError::MixedCameras {
            expected: camera,
            found: d.camera,
        });
    }

    let mut by_frame: BTreeMap<Frame, Vec<usize>> = BTreeMap::new();
    for (pos, (_, d)) in items.iter().enumerate() {
        by_frame.entry(d.frame).or_default().push(pos);
    }

    let mut next: Vec<Option<usize>> = vec![None; items.len()];
    let mut has_prev = vec![false; items.len()];
    let frames: Vec<_> = by_frame.iter().collect();
    for pair in frames.windows(2) {
        let (&f0, rows) = pair[0];
        let (&f1, cols) = pair[1];
        if f1 != f0 + 1 {
            continue;
        }
        let a: Vec<_> = rows.iter().map(|&p| items[p]).collect();
        let b: Vec<_> = cols.iter().map(|&p| items[p]).collect();
        for (r, c) in link(&a, &b, config)?.pairs {
            next[rows[r]] = Some(cols[c]);
            has_prev[cols[c]] = true;
        }
    }

    let mut out = Vec::new();
    for positions in by_frame.values() {
        for &start in positions {
            if has_prev[start] || next[start].is_none() {
                continue;
            }
            let mut entries = Vec::new();
            let mut cur = Some(start);
            while let Some(p) = cur {
                let (src, d) = items[p];
                let mut e = TrajectoryEntry::observed(d.bbox, d.feature.clone());
                e.source = Some(src);
                entries.push((d.frame, e));
                cur = next[p];
            }
            out.push(Trajectory::new(camera, entries).expect("chained frames increase"));
        }
    }
    Ok(out)
}

/// Endpoint frames used by all pairwise distances: `t_i` is the last frame
/// of whichever input ends first, `t_u` the first frame of the other input
/// at or after `t_i`. Returns `(earlier, other, t_i, t_u)`.
fn endpoints<'a>(a: &'a Trajectory, b: &'a Trajectory) -> (&'a Trajectory, &'a Trajectory, Frame, Frame) {
    let (earlier, other) = if a.last_frame() <= b.last_frame() {
        (a, b)
    } else {
        (b, a)
    };
    let t_i = earlier.last_frame();
    let t_u = *other
        .entries()
        .range(t_i..)
        .next()
        .expect("other ends at or after t_i")
        .0;
    (earlier, other, t_i, t_u)
}

/// Mean of the `k` observed features closest in time to `t`.
/// Ties in distance prefer the earlier frame.
fn mean_feature_near(t: &Trajectory, at: Frame, k: usize) -> Option<FeatureVector> {
    fn observed<'a>((f, e): (&Frame, &'a TrajectoryEntry)) -> Option<(Frame, &'a FeatureVector)> {
        if e.interpolated {
            None
        } else {
            e.feature.as_ref().map(|v| (*f, v))
        }
    }
    let mut left = t.entries().range(..=at).rev().filter_map(observed).peekable();
    let mut right = t.entries().range(at + 1..).filter_map(observed).peekable();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let take_left = match (left.peek(), right.peek()) {
            (Some(&(fl, _)), Some(&(fr, _))) => at - fl <= fr - at,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let (_, v) = if take_left { left.next() } else { right.next() }.unwrap();
        picked.push(v);
    }
    FeatureVector::mean(picked)
}

/// L2 distance between endpoint-averaged features.
pub fn appearance_distance(a: &Trajectory, b: &Trajectory, config: &PipelineConfig) -> Result<f64, SctError> {
    let (earlier, other, t_i, t_u) = endpoints(a, b);
    let no_features = |t: &Trajectory| SctError::NoFeatures {
        camera: t.camera(),
        first: t.first_frame(),
    };
    let fa = mean_feature_near(earlier, t_i, config.neighbor_frames).ok_or_else(|| no_features(earlier))?;
    let fb = mean_feature_near(other, t_u, config.neighbor_frames).ok_or_else(|| no_features(other))?;
    Ok(fa.distance(&fb))
}

/// Speed gate between the endpoint boxes, `0` or `+inf`.
pub fn separation_distance(a: &Trajectory, b: &Trajectory, config: &PipelineConfig) -> f64 {
    let (earlier, other, t_i, t_u) = endpoints(a, b);
    if t_u == t_i {
        return 0.0;
    }
    let (x0, y0) = earlier.get(t_i).expect("endpoint exists").bbox.center();
    let (x1, y1) = other.get(t_u).expect("endpoint exists").bbox.center();
    let speed = (x1 - x0).hypot(y1 - y0) / f64::from(t_u - t_i);
    if speed < config.speed_threshold {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Mean IoU over the shared frames, `None` when the inputs share no frame.
pub fn mean_overlap_iou(a: &Trajectory, b: &Trajectory) -> Option<f64> {
    if !a.overlaps_in_time(b) {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let lo = large.first_frame();
    let hi = large.last_frame();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (f, e) in small.entries().range(lo..=hi) {
        if let Some(o) = large.get(*f) {
            sum += iou(&e.bbox, &o.bbox);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Overlap gate: `0` without shared frames or when the mean IoU reaches the
/// threshold, `+inf` otherwise.
pub fn overlap_distance(a: &Trajectory, b: &Trajectory, config: &PipelineConfig) -> f64 {
    match mean_overlap_iou(a, b) {
        Some(m) if m < config.overlap_iou_threshold => f64::INFINITY,
        _ => 0.0,
    }
}

/// Appearance, separation and overlap parts of the clustering distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SctDistance {
    pub appearance: f64,
    pub separation: f64,
    pub overlap: f64,
}

impl SctDistance {
    pub fn total(&self) -> f64 {
        self.appearance + self.separation + self.overlap
    }
}

pub fn sct_distance_parts(a: &Trajectory, b: &Trajectory, config: &PipelineConfig) -> Result<SctDistance, SctError> {
    Ok(SctDistance {
        appearance: appearance_distance(a, b, config)?,
        separation: separation_distance(a, b, config),
        overlap: overlap_distance(a, b, config),
    })
}

pub fn sct_distance(a: &Trajectory, b: &Trajectory, config: &PipelineConfig) -> Result<f64, SctError> {
    // Gates first: skip the feature work when either is closed.
    if separation_distance(a, b, config).is_infinite() || overlap_distance(a, b, config).is_infinite() {
        return Ok(f64::INFINITY);
    }
    appearance_distance(a, b, config)
}

/// Union of two trajectories' entries; on a shared frame the entry of the
/// earlier-starting input (or `a` on equal starts) wins.
fn merge_pair(a: Trajectory, b: Trajectory) -> Trajectory {
    let camera = a.camera();
    let (keep, other) = if b.first_frame() < a.first_frame() {
        (b, a)
    } else {
        (a, b)
    };
    let mut entries = keep.into_entries();
    for (f, e) in other.into_entries() {
        entries.entry(f).or_insert(e);
    }
    Trajectory::from_map(camera, entries)
}

/// Agglomerative clustering of tracklets and trajectories of one camera.
///
/// Repeatedly merges the closest pair (ties to the smallest index pair) and
/// recomputes the merged item's distances, until the smallest distance
/// exceeds the stop threshold. Merged items take the lower slot, so output
/// order follows the input order of each cluster's first member.
pub fn cluster_tracklets(items: Vec<Trajectory>, config: &PipelineConfig) -> Result<Vec<Trajectory>, SctError> {
    let threshold = config.sct_threshold();
    let n = items.len();
    let mut slots: Vec<Option<Trajectory>> = items.into_iter().map(Some).collect();
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sct_distance(slots[i].as_ref().unwrap(), slots[j].as_ref().unwrap(), config)?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if slots[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if slots[j].is_none() {
                    continue;
                }
                let d = dist[i * n + j];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((d, i, j)) = best else { break };
        if d > threshold {
            break;
        }
        let b = slots[j].take().unwrap();
        let a = slots[i].take().unwrap();
        slots[i] = Some(merge_pair(a, b));
        for k in 0..n {
            if k == i {
                continue;
            }
            let d = match &slots[k] {
                Some(other) => sct_distance(slots[i].as_ref().unwrap(), other, config)?,
                None => f64::INFINITY,
            };
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Fills internal frame gaps by linear interpolation, then smooths every
/// box coordinate with a centred moving average (truncated at the ends).
pub fn interpolate_and_smooth(t: &Trajectory, config: &PipelineConfig) -> Trajectory {
    let camera = t.camera();
    let mut filled: Vec<(Frame, TrajectoryEntry)> = Vec::with_capacity((t.last_frame() - t.first_frame()) as usize + 1);
    let mut prev: Option<(Frame, &TrajectoryEntry)> = None;
    for (&f, e) in t.entries() {
        if let Some((pf, pe)) = prev {
            let span = f - pf;
            for step in 1..span {
                let bbox = pe.bbox.lerp(&e.bbox, f64::from(step) / f64::from(span));
                filled.push((pf + step, TrajectoryEntry::interpolated(bbox)));
            }
        }
        filled.push((f, e.clone()));
        prev = Some((f, e));
    }

    let half = config.smoothing_window / 2;
    if half > 0 {
        let raw: Vec<BoundingBox> = filled.iter().map(|(_, e)| e.bbox).collect();
        for (i, (_, e)) in filled.iter_mut().enumerate() {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(raw.len() - 1);
            e.bbox = BoundingBox::mean(&raw[lo..=hi]).expect("window is non-empty");
        }
    }
    Trajectory::from_map(camera, filled.into_iter().collect())
}

/// Near-online tracking of all detections from one camera.
///
/// Entry `source` fields of the result index into `detections`.
pub fn track_camera(detections: &[Detection], config: &PipelineConfig) -> Result<Vec<Trajectory>, SctError> {
    let Some(first) = detections.first() else {
        return Ok(Vec::new());
    };
    if let Some(d) = detections.iter().find(|d| d.camera != first.camera) {
        return Err(SctError::MixedCameras {
            expected: first.camera,
            found: d.camera,
        });
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by_key(|&i| detections[i].frame);

    let window = config.window_frames.max(1);
    let mut live: Vec<Trajectory> = Vec::new();
    let mut pos = 0;
    while pos < order.len() {
        let start = detections[order[pos]].frame;
        let end = start.saturating_add(window - 1);
        let mut items = Vec::new();
        while pos < order.len() && detections[order[pos]].frame <= end {
            let i = order[pos];
            items.push((i, &detections[i]));
            pos += 1;
        }
        let tracklets = build_tracklets_indexed(&items, config)?;
        if tracklets.is_empty() {
            continue;
        }
        live.extend(tracklets);
        live = cluster_tracklets(live, config)?;
    }

    let mut out: Vec<Trajectory> = live
        .iter()
        .map(|t| interpolate_and_smooth(t, config))
        .collect();
    out.sort_by(|a, b| {
        (a.first_frame(), a.last_frame())
            .cmp(&(b.first_frame(), b.last_frame()))
            .then_with(|| {
                let la = a.entries().values().next().unwrap().bbox.left();
                let lb = b.entries().values().next().unwrap().bbox.left();
                la.total_cmp(&lb)
            })
    });
    Ok(out)
}
