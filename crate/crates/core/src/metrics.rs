//! Identity measures (IDF1, IDP, IDR).
//!
//! True and computed identities are paired one-to-one so that the number
//! of frames where a pair agrees is maximal; identities may stay unpaired.
//! This is the same optimum as the min-cost perfect matching over the
//! identity graph augmented with dummy nodes, whose pair cost is the
//! number of frames the two identities disagree on.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::assignment::{solve_max_weight_matching, WeightMatrix};
use crate::geometry::iou;
use crate::model::{BoundingBox, CameraId, Frame, IdentityCluster};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{side} identity {identity} appears more than once")]
    DuplicateIdentity { side: &'static str, identity: u32 },
    #[error("{side} identity {identity} has two boxes in camera {camera}, frame {frame}")]
    DuplicateBox {
        side: &'static str,
        identity: u32,
        camera: CameraId,
        frame: Frame,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdMetricsReport {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
}

impl IdMetricsReport {
    pub fn from_counts(idtp: u64, idfp: u64, idfn: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            idtp,
            idfp,
            idfn,
            idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
            idp: ratio(idtp, idtp + idfp),
            idr: ratio(idtp, idtp + idfn),
        }
    }
}

/// Per-frame correspondence: IoU of at least 0.5.
pub fn frame_match(gt: &BoundingBox, hyp: &BoundingBox) -> bool {
    iou(gt, hyp) >= 0.5
}

type Track = BTreeMap<(CameraId, Frame), BoundingBox>;

fn flatten(side: &'static str, clusters: &[IdentityCluster]) -> Result<Vec<Track>, MetricsError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        if !seen.insert(c.identity) {
            return Err(MetricsError::DuplicateIdentity {
                side,
                identity: c.identity,
            });
        }
        let mut track = Track::new();
        for t in &c.members {
            for (&frame, e) in t.entries() {
                if track.insert((t.camera(), frame), e.bbox).is_some() {
                    return Err(MetricsError::DuplicateBox {
                        side,
                        identity: c.identity,
                        camera: t.camera(),
                        frame,
                    });
                }
            }
        }
        out.push(track);
    }
    Ok(out)
}

/// Frames where both identities are present and their boxes match.
fn agreement(gt: &Track, hyp: &Track) -> u64 {
    let (small, large, gt_small) = if gt.len() <= hyp.len() {
        (gt, hyp, true)
    } else {
        (hyp, gt, false)
    };
    small
        .iter()
        .filter(|(k, b)| {
            large.get(k).is_some_and(|o| {
                if gt_small {
                    frame_match(b, o)
                } else {
                    frame_match(o, b)
                }
            })
        })
        .count() as u64
}

/// Pairwise agreement counts, truth identities as rows.
pub fn agreement_matrix(ground_truth: &[IdentityCluster], hypothesis: &[IdentityCluster]) -> Result<Vec<Vec<u64>>, MetricsError> {
    let gt = flatten("ground-truth", ground_truth)?;
    let hyp = flatten("hypothesis", hypothesis)?;
    Ok(gt
        .iter()
        .map(|g| hyp.iter().map(|h| agreement(g, h)).collect())
        .collect())
}

pub fn id_measures(ground_truth: &[IdentityCluster], hypothesis: &[IdentityCluster]) -> Result<IdMetricsReport, MetricsError> {
    let gt = flatten("ground-truth", ground_truth)?;
    let hyp = flatten("hypothesis", hypothesis)?;
    let total_gt: u64 = gt.iter().map(|t| t.len() as u64).sum();
    let total_hyp: u64 = hyp.iter().map(|t| t.len() as u64).sum();

    let w = WeightMatrix::from_fn(gt.len(), hyp.len(), |r, c| agreement(&gt[r], &hyp[c]) as f64)
        .expect("agreement counts are finite");
    let m = solve_max_weight_matching(&w);
    let idtp = m.pairs.iter().map(|&(r, c)| w.get(r, c) as u64).sum::<u64>();
    Ok(IdMetricsReport::from_counts(idtp, total_hyp - idtp, total_gt - idtp))
}
