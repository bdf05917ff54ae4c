//! Box arithmetic and per-frame detection preprocessing.

use std::cmp::Ordering;

use crate::model::{BoundingBox, Detection};

/// Intersection over union. Disjoint boxes give 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(1.0)
}

/// Hard gate: `+inf` when `x < k`, otherwise 0.
pub fn gate(x: f64, k: f64) -> f64 {
    if x < k {
        f64::INFINITY
    } else {
        0.0
    }
}

fn by_confidence_then_coords(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| {
            a.bbox
                .coords()
                .iter()
                .zip(b.bbox.coords())
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Greedy non-maximum suppression for the detections of one camera frame.
///
/// A detection is suppressed when its IoU with an already kept one is
/// strictly greater than `iou_threshold`. Output is ordered by confidence
/// descending, ties broken by `(left, top, right, bottom)`.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = detections.iter().collect();
    order.sort_by(|a, b| by_confidence_then_coords(a, b));

    let mut kept: Vec<Detection> = Vec::with_capacity(order.len());
    for det in order {
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &det.bbox) <= iou_threshold)
        {
            kept.push(det.clone());
        }
    }
    kept
}

/// Keeps detections with `confidence >= threshold`, preserving order.
pub fn confidence_filter(detections: &[Detection], threshold: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| d.confidence >= threshold)
        .cloned()
        .collect()
}

/// Confidence filter followed by NMS within every `(camera, frame)` group.
///
/// The result is ordered by `(camera, frame)` and then by the NMS order.
pub fn preprocess(detections: &[Detection], confidence: f64, nms_iou: f64) -> Vec<Detection> {
    preprocess_indexed(detections, confidence, nms_iou)
        .into_iter()
        .map(|i| detections[i].clone())
        .collect()
}

/// Like [`preprocess`], but returns indices into `detections` so paired
/// data (features, labels) can follow the surviving rows.
pub fn preprocess_indexed(detections: &[Detection], confidence: f64, nms_iou: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..detections.len())
        .filter(|&i| detections[i].confidence >= confidence)
        .collect();
    idx.sort_by_key(|&i| (detections[i].camera, detections[i].frame));

    let mut out = Vec::with_capacity(idx.len());
    for group in idx.chunk_by(|&a, &b| {
        (detections[a].camera, detections[a].frame) == (detections[b].camera, detections[b].frame)
    }) {
        let mut order = group.to_vec();
        order.sort_by(|&a, &b| by_confidence_then_coords(&detections[a], &detections[b]).then(a.cmp(&b)));
        let mut kept: Vec<usize> = Vec::new();
        for i in order {
            if kept
                .iter()
                .all(|&k| iou(&detections[k].bbox, &detections[i].bbox) <= nms_iou)
            {
                kept.push(i);
            }
        }
        out.extend(kept);
    }
    out
}
