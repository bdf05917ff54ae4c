//! Deterministic synthetic multi-camera scenes.
//!
//! Every identity walks piecewise-linear paths across camera images and
//! moves between cameras along a transition graph with sampled travel
//! times. Rendering adds misses, box jitter, false alarms and noisy
//! appearance features drawn around mutually equidistant identity
//! embeddings. All randomness comes from ChaCha8 seeded with a `u64`, so a
//! seed fully determines the output on every platform.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::model::{
    BoundingBox, CameraId, CameraPair, Detection, FeatureVector, Frame, IdentityCluster, PipelineConfig,
    Trajectory, TrajectoryEntry,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid world config: {0}")]
    World(String),
    #[error("invalid noise config: {0}")]
    Noise(String),
    #[error("camera {0} has no outgoing transition")]
    NoTransition(CameraId),
}

/// Travel from one camera to another; the next visit starts
/// `min_frames..=max_frames` after the last frame of the current one.
/// Negative values (overlapping cameras only) start it before the exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: CameraId,
    pub to: CameraId,
    pub min_frames: i64,
    pub max_frames: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub n_identities: u32,
    pub n_cameras: u32,
    pub overlapping_camera_pairs: BTreeSet<CameraPair>,
    pub fps: f64,
    pub duration_s: f64,
    /// Walking speed range, pixels per frame.
    pub speed_range: (f64, f64),
    pub box_height_range: (f64, f64),
    /// Box width over height.
    pub aspect_ratio: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub transitions: Vec<Transition>,
    /// Identities enter the world uniformly within this many seconds.
    pub entry_spread_s: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_identities: 10,
            n_cameras: 3,
            overlapping_camera_pairs: [CameraPair::new(1, 2)].into_iter().collect(),
            fps: 10.0,
            duration_s: 60.0,
            speed_range: (4.0, 8.0),
            box_height_range: (120.0, 200.0),
            aspect_ratio: 0.4,
            image_width: 1920.0,
            image_height: 1080.0,
            transitions: vec![
                Transition {
                    from: 1,
                    to: 2,
                    min_frames: -20,
                    max_frames: -5,
                },
                Transition {
                    from: 2,
                    to: 1,
                    min_frames: -20,
                    max_frames: -5,
                },
                Transition {
                    from: 2,
                    to: 3,
                    min_frames: 30,
                    max_frames: 90,
                },
                Transition {
                    from: 3,
                    to: 1,
                    min_frames: 30,
                    max_frames: 90,
                },
                Transition {
                    from: 3,
                    to: 2,
                    min_frames: 30,
                    max_frames: 90,
                },
            ],
            entry_spread_s: 30.0,
        }
    }
}

impl WorldConfig {
    pub fn n_frames(&self) -> u32 {
        (self.duration_s * self.fps).round() as u32
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::World(m));
        if self.n_cameras == 0 {
            return bad("n_cameras must be at least 1".into());
        }
        if !(self.fps > 0.0 && self.duration_s > 0.0 && self.n_frames() > 0) {
            return bad("fps and duration_s must be positive".into());
        }
        let ranges = [
            ("speed_range", self.speed_range),
            ("box_height_range", self.box_height_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return bad(format!("{name} must be a non-empty positive range, got {lo}..{hi}"));
            }
        }
        if !(self.aspect_ratio > 0.0 && self.entry_spread_s >= 0.0) {
            return bad("aspect_ratio must be positive and entry_spread_s non-negative".into());
        }
        let max_w = self.box_height_range.1 * self.aspect_ratio;
        if self.image_width <= 2.0 * max_w || self.image_height <= 2.0 * self.box_height_range.1 {
            return bad("image is too small for the largest box".into());
        }
        for t in &self.transitions {
            for cam in [t.from, t.to] {
                if cam == 0 || cam > self.n_cameras {
                    return bad(format!("transition {}>{} names unknown camera {cam}", t.from, t.to));
                }
            }
            if t.from == t.to {
                return bad(format!("transition {}>{} loops on one camera", t.from, t.to));
            }
            if t.min_frames > t.max_frames {
                return bad(format!("transition {}>{} has an empty travel range", t.from, t.to));
            }
            let overlapping = self.overlapping_camera_pairs.contains(&CameraPair::new(t.from, t.to));
            if !overlapping && t.min_frames <= 0 {
                return bad(format!(
                    "transition {}>{} joins non-overlapping cameras and needs positive travel time",
                    t.from, t.to
                ));
            }
        }
        if self.n_cameras > 1 {
            for cam in 1..=self.n_cameras {
                if !self.transitions.iter().any(|t| t.from == cam) {
                    return Err(SynthError::NoTransition(cam));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    /// Box coordinate jitter, pixels.
    pub jitter_sigma: f64,
    pub miss_rate: f64,
    /// Expected false alarms per camera frame.
    pub false_alarm_rate: f64,
    pub feature_dim: usize,
    /// Distance between any two identity embeddings.
    pub separation: f64,
    /// Per-component feature noise.
    pub feature_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            jitter_sigma: 1.0,
            miss_rate: 0.05,
            false_alarm_rate: 0.02,
            feature_dim: 32,
            separation: 1.2,
            feature_sigma: 0.3 / 8.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self, n_identities: u32) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Noise(m));
        if !(0.0..1.0).contains(&self.miss_rate) && self.miss_rate != 1.0 {
            return bad(format!("miss_rate must lie in [0, 1], got {}", self.miss_rate));
        }
        for (name, v) in [
            ("jitter_sigma", self.jitter_sigma),
            ("false_alarm_rate", self.false_alarm_rate),
            ("feature_sigma", self.feature_sigma),
            ("separation", self.separation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.feature_dim < n_identities as usize || self.feature_dim == 0 {
            return bad(format!(
                "feature_dim {} cannot hold {} equidistant embeddings",
                self.feature_dim, n_identities
            ));
        }
        Ok(())
    }

    /// Expected distance between two noisy features of one identity.
    pub fn intra_distance(&self) -> f64 {
        self.feature_sigma * (2.0 * self.feature_dim as f64).sqrt()
    }
}

/// Generated ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub ground_truth: Vec<IdentityCluster>,
    pub n_cameras: u32,
    pub n_frames: u32,
    pub image_width: f64,
    pub image_height: f64,
}

impl World {
    pub fn n_boxes(&self) -> usize {
        self.ground_truth
            .iter()
            .flat_map(|c| &c.members)
            .map(Trajectory::len)
            .sum()
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// One pass through a camera image: enter at one side, bend at a random
/// waypoint, leave on the other side.
fn walk(
    rng: &mut ChaCha8Rng,
    wc: &WorldConfig,
    camera: CameraId,
    start: Frame,
    n_frames: u32,
) -> Option<Trajectory> {
    let height = uniform(rng, wc.box_height_range);
    let width = height * wc.aspect_ratio;
    let speed = uniform(rng, wc.speed_range);
    let (xmin, xmax) = (width / 2.0 + 1.0, wc.image_width - width / 2.0 - 1.0);
    let (ymin, ymax) = (height / 2.0 + 1.0, wc.image_height - height / 2.0 - 1.0);
    let left_to_right = rng.random_bool(0.5);
    let (x0, x2) = if left_to_right { (xmin, xmax) } else { (xmax, xmin) };
    let y0 = uniform(rng, (ymin, ymax));
    let x1 = uniform(rng, (xmin + (xmax - xmin) * 0.3, xmin + (xmax - xmin) * 0.7));
    let y1 = uniform(rng, (ymin, ymax));
    let y2 = uniform(rng, (ymin, ymax));

    let leg1 = (x1 - x0).hypot(y1 - y0);
    let leg2 = (x2 - x1).hypot(y2 - y1);
    let steps = ((leg1 + leg2) / speed).ceil() as u32;
    let mut entries = Vec::new();
    for k in 0..=steps {
        let frame = start + k;
        if frame >= n_frames {
            break;
        }
        let dist = (f64::from(k) * speed).min(leg1 + leg2);
        let (cx, cy) = if dist <= leg1 {
            let t = dist / leg1;
            (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
        } else {
            let t = (dist - leg1) / leg2;
            (x1 + t * (x2 - x1), y1 + t * (y2 - y1))
        };
        let bbox = BoundingBox::from_center(cx, cy, width, height).expect("positive box size");
        entries.push((frame, TrajectoryEntry::observed(bbox, None)));
    }
    if entries.is_empty() {
        return None;
    }
    Some(Trajectory::new(camera, entries).expect("frames increase"))
}

pub fn generate_world(wc: &WorldConfig) -> Result<World, SynthError> {
    wc.validate()?;
    let n_frames = wc.n_frames();
    let spread = (wc.entry_spread_s * wc.fps).round() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(wc.seed);

    let mut ground_truth = Vec::with_capacity(wc.n_identities as usize);
    for id in 1..=wc.n_identities {
        let mut camera = rng.random_range(1..=wc.n_cameras);
        let mut start = rng.random_range(0..=spread.min(n_frames - 1));
        let mut members: Vec<Trajectory> = Vec::new();
        loop {
            if let Some(prev) = members.iter().rev().find(|t| t.camera() == camera) {
                start = start.max(prev.last_frame() + 1);
            }
            if let Some(prev) = members.last() {
                start = start.max(prev.first_frame() + 1);
            }
            if start >= n_frames {
                break;
            }
            let Some(visit) = walk(&mut rng, wc, camera, start, n_frames) else {
                break;
            };
            let exit = visit.last_frame();
            let cut_short = exit + 1 >= n_frames;
            members.push(visit);
            if cut_short {
                break;
            }
            let outgoing: Vec<&Transition> = wc.transitions.iter().filter(|t| t.from == camera).collect();
            if outgoing.is_empty() {
                break;
            }
            let t = outgoing[rng.random_range(0..outgoing.len())];
            let travel = rng.random_range(t.min_frames..=t.max_frames);
            let next = i64::from(exit) + travel;
            if next >= i64::from(n_frames) {
                break;
            }
            start = next.max(0) as Frame;
            camera = t.to;
        }
        ground_truth.push(IdentityCluster::new(id, members));
    }
    Ok(World {
        ground_truth,
        n_cameras: wc.n_cameras,
        n_frames,
        image_width: wc.image_width,
        image_height: wc.image_height,
    })
}

/// Mutually equidistant identity embeddings: scaled basis vectors, so
/// every pair sits exactly `separation` apart.
pub fn identity_embeddings(n: usize, dim: usize, separation: f64) -> Vec<FeatureVector> {
    let scale = separation / std::f64::consts::SQRT_2;
    (0..n)
        .map(|i| {
            let mut v = vec![0.0; dim];
            v[i] = scale;
            FeatureVector::new(v).expect("finite")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    /// Sorted by `(camera, frame)`.
    pub detections: Vec<Detection>,
    /// True identity per detection; `None` for false alarms.
    pub labels: Vec<Option<u32>>,
}

pub fn render_detections(world: &World, nc: &NoiseConfig, seed: u64) -> Result<Rendered, SynthError> {
    nc.validate(world.ground_truth.len() as u32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, nc.jitter_sigma).expect("finite sigma");
    let fnoise = Normal::new(0.0, nc.feature_sigma).expect("finite sigma");
    let embeddings = identity_embeddings(world.ground_truth.len(), nc.feature_dim, nc.separation);

    let mut out: Vec<(Detection, Option<u32>)> = Vec::new();
    for (cluster, emb) in world.ground_truth.iter().zip(&embeddings) {
        for t in &cluster.members {
            for (&frame, e) in t.entries() {
                if rng.random_bool(nc.miss_rate) {
                    continue;
                }
                let c = e.bbox.coords();
                let j: [f64; 4] = std::array::from_fn(|k| c[k] + jitter.sample(&mut rng));
                let bbox = jittered_box(j);
                let feature: Vec<f64> = emb
                    .as_slice()
                    .iter()
                    .map(|v| v + fnoise.sample(&mut rng))
                    .collect();
                let confidence = rng.random_range(0.92..1.0);
                let det = Detection::new(t.camera(), frame, bbox, confidence)
                    .with_feature(FeatureVector::new(feature).expect("finite"));
                out.push((det, Some(cluster.identity)));
            }
        }
    }

    if nc.false_alarm_rate > 0.0 {
        let poisson = Poisson::new(nc.false_alarm_rate).expect("positive rate");
        for camera in 1..=world.n_cameras {
            for frame in 0..world.n_frames {
                let count = poisson.sample(&mut rng) as usize;
                for _ in 0..count {
                    let h = rng.random_range(60.0..200.0);
                    let w = h * 0.4;
                    let l = rng.random_range(0.0..world.image_width - w);
                    let t = rng.random_range(0.0..world.image_height - h);
                    let bbox = BoundingBox::new(l, t, l + w, t + h).expect("positive size");
                    // Far from every embedding: a point in the negative orthant.
                    let dir: Vec<f64> = (0..nc.feature_dim).map(|_| rng.random_range(0.1..1.0)).collect();
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let radius = 2.0 * nc.separation.max(1.0);
                    let feature = dir.iter().map(|v| -radius * v / norm).collect();
                    let confidence = rng.random_range(0.5..1.0);
                    let det = Detection::new(camera, frame, bbox, confidence)
                        .with_feature(FeatureVector::new(feature).expect("finite"));
                    out.push((det, None));
                }
            }
        }
    }

    out.sort_by_key(|(d, _)| (d.camera, d.frame));
    let (detections, labels) = out.into_iter().unzip();
    Ok(Rendered { detections, labels })
}

fn jittered_box(c: [f64; 4]) -> BoundingBox {
    let (l, r) = if c[0] < c[2] { (c[0], c[2]) } else { (c[2], c[0]) };
    let (t, b) = if c[1] < c[3] { (c[1], c[3]) } else { (c[3], c[1]) };
    BoundingBox::new(l, t, r.max(l + 1.0), b.max(t + 1.0)).expect("ordered coordinates")
}

/// Rendering seed paired with a world seed.
pub fn render_seed_for(world_seed: u64) -> u64 {
    world_seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Pipeline settings matched to a world: its frame rate and overlapping
/// pairs, a gap limit spanning the whole scene, and re-ranking
/// neighbourhoods sized for a handful of trajectories per identity.
pub fn matched_pipeline_config(wc: &WorldConfig) -> PipelineConfig {
    PipelineConfig {
        fps: wc.fps,
        max_gap_frames: wc.n_frames().max(1),
        rerank_k1: 6,
        rerank_k2: 2,
        overlapping_camera_pairs: wc.overlapping_camera_pairs.clone(),
        ..PipelineConfig::default()
    }
}

/// Complete scene: world, noise model and the pipeline config tuned for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: WorldConfig,
    pub noise: NoiseConfig,
    pub pipeline: PipelineConfig,
}

impl Scenario {
    /// Ten identities, three cameras with one overlapping pair, one minute
    /// at 10 fps. Identity embeddings sit four intra-identity noise
    /// distances apart.
    pub fn easy(seed: u64) -> Self {
        Self::with_separation_ratio(seed, 4.0)
    }

    /// Same world with embeddings only 1.5 noise distances apart.
    pub fn hard(seed: u64) -> Self {
        Self::with_separation_ratio(seed, 1.5)
    }

    /// `ratio` is the embedding separation over the expected distance
    /// between two noisy features of one identity, which is fixed at
    /// `0.3 s`.
    pub fn with_separation_ratio(seed: u64, ratio: f64) -> Self {
        let world = WorldConfig {
            seed,
            ..WorldConfig::default()
        };
        let pipeline = matched_pipeline_config(&world);
        let dim = 32;
        let intra = 0.3 * pipeline.s;
        let noise = NoiseConfig {
            feature_dim: dim,
            feature_sigma: intra / (2.0 * dim as f64).sqrt(),
            separation: ratio * intra,
            ..NoiseConfig::default()
        };
        Self {
            world,
            noise,
            pipeline,
        }
    }

    pub fn render_seed(&self) -> u64 {
        render_seed_for(self.world.seed)
    }

    pub fn generate(&self) -> Result<(World, Rendered), SynthError> {
        let world = generate_world(&self.world)?;
        let rendered = render_detections(&world, &self.noise, self.render_seed())?;
        Ok((world, rendered))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_camera() -> WorldConfig {
        WorldConfig {
            n_identities: 1,
            n_cameras: 1,
            transitions: vec![],
            overlapping_camera_pairs: BTreeSet::new(),
            ..WorldConfig::default()
        }
    }

    #[test]
    fn one_identity_one_camera() {
        let w = generate_world(&single_camera()).unwrap();
        assert_eq!(w.ground_truth.len(), 1);
        let members = &w.ground_truth[0].members;
        assert_eq!(members.len(), 1);
        assert!(members[0].is_contiguous());
    }

    #[test]
    fn same_seed_same_world() {
        let wc = WorldConfig::default();
        assert_eq!(generate_world(&wc).unwrap(), generate_world(&wc).unwrap());
        let other = WorldConfig { seed: 1, ..wc.clone() };
        assert_ne!(generate_world(&wc).unwrap(), generate_world(&other).unwrap());
    }

    #[test]
    fn transition_delay_is_respected() {
        let wc = WorldConfig {
            n_identities: 1,
            n_cameras: 2,
            duration_s: 600.0,
            entry_spread_s: 0.0,
            overlapping_camera_pairs: BTreeSet::new(),
            transitions: vec![
                Transition {
                    from: 1,
                    to: 2,
                    min_frames: 600,
                    max_frames: 600,
                },
                Transition {
                    from: 2,
                    to: 1,
                    min_frames: 600,
                    max_frames: 600,
                },
            ],
            ..WorldConfig::default()
        };
        let w = generate_world(&wc).unwrap();
        let m = &w.ground_truth[0].members;
        assert!(m.len() >= 2);
        for pair in m.windows(2) {
            assert_ne!(pair[0].camera(), pair[1].camera());
            assert_eq!(pair[1].first_frame(), pair[0].last_frame() + 600);
        }
    }

    #[test]
    fn missing_transition_is_rejected() {
        let wc = WorldConfig {
            transitions: vec![Transition {
                from: 1,
                to: 2,
                min_frames: 10,
                max_frames: 20,
            }],
            overlapping_camera_pairs: BTreeSet::new(),
            ..WorldConfig::default()
        };
        assert!(matches!(generate_world(&wc), Err(SynthError::NoTransition(2))));
        let wc = WorldConfig {
            overlapping_camera_pairs: BTreeSet::new(),
            ..WorldConfig::default()
        };
        // 1 <-> 2 travel is negative, which needs an overlapping pair
        assert!(matches!(generate_world(&wc), Err(SynthError::World(_))));
    }

    #[test]
    fn noiseless_rendering_reproduces_truth() {
        let w = generate_world(&WorldConfig::default()).unwrap();
        let nc = NoiseConfig {
            jitter_sigma: 0.0,
            miss_rate: 0.0,
            false_alarm_rate: 0.0,
            feature_sigma: 0.0,
            ..NoiseConfig::default()
        };
        let r = render_detections(&w, &nc, 7).unwrap();
        assert_eq!(r.detections.len(), w.n_boxes());
        let emb = identity_embeddings(10, nc.feature_dim, nc.separation);
        for (d, label) in r.detections.iter().zip(&r.labels) {
            let id = label.unwrap();
            let truth = w.ground_truth[id as usize - 1]
                .members
                .iter()
                .find_map(|t| (t.camera() == d.camera).then(|| t.get(d.frame)).flatten())
                .unwrap();
            assert_eq!(d.bbox, truth.bbox);
            assert_eq!(d.feature.as_ref().unwrap(), &emb[id as usize - 1]);
        }
    }

    #[test]
    fn full_miss_rate_drops_every_true_box() {
        let w = generate_world(&WorldConfig::default()).unwrap();
        let nc = NoiseConfig {
            miss_rate: 1.0,
            ..NoiseConfig::default()
        };
        let r = render_detections(&w, &nc, 3).unwrap();
        assert!(r.labels.iter().all(Option::is_none));
    }

    #[test]
    fn miss_rate_within_binomial_band() {
        // 1000 boxes, p = 0.1: mean 100, sd sqrt(90) ~ 9.5; [60, 140] is a 4-sigma band.
        let wc = WorldConfig {
            duration_s: 100.0,
            entry_spread_s: 0.0,
            speed_range: (0.5, 0.5),
            ..single_camera()
        };
        let w = generate_world(&wc).unwrap();
        assert_eq!(w.n_boxes(), 1000);
        for seed in 0..20 {
            let nc = NoiseConfig {
                miss_rate: 0.1,
                false_alarm_rate: 0.0,
                ..NoiseConfig::default()
            };
            let kept = render_detections(&w, &nc, seed).unwrap().detections.len();
            let dropped = 1000 - kept;
            assert!((60..=140).contains(&dropped), "seed {seed}: dropped {dropped}");
        }
    }

    #[test]
    fn embeddings_are_equidistant() {
        let e = identity_embeddings(5, 8, 2.0);
        for i in 0..5 {
            for j in i + 1..5 {
                assert!((e[i].distance(&e[j]) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn label_map_covers_true_detections() {
        let s = Scenario::easy(5);
        let (w, r) = s.generate().unwrap();
        assert_eq!(r.labels.len(), r.detections.len());
        let true_count = r.labels.iter().filter(|l| l.is_some()).count();
        assert!(true_count <= w.n_boxes());
        assert!(r.labels.iter().any(Option::is_none));
        assert!(r.detections.windows(2).all(|p| (p[0].camera, p[0].frame) <= (p[1].camera, p[1].frame)));
    }
}
