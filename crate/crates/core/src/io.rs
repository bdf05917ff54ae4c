//! Text formats for detections, features, trajectories, configs and
//! metric reports.
//!
//! Every writer emits reals with exactly six fractional digits and orders
//! records deterministically, so equal inputs give byte-identical files.
//! Parsers report 1-based line numbers.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::IdMetricsReport;
use crate::model::{
    BoundingBox, CameraId, CameraPair, Detection, FeatureVector, Frame, IdentityCluster, ModelError,
    PipelineConfig, Trajectory, TrajectoryEntry,
};
use crate::synthgen::{NoiseConfig, Transition, WorldConfig};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} comma-separated fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {source}")]
    Model {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("missing header line `d=<dimension>`")]
    MissingHeader,
    #[error("expected {expected} feature rows, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: value {column} is not finite")]
    NonFinite { line: usize, column: usize },
    #[error("line {line}: duplicate record for identity {identity}, camera {camera}, frame {frame}")]
    DuplicateRecord {
        line: usize,
        identity: u32,
        camera: CameraId,
        frame: Frame,
    },
    #[error("identity {identity}, camera {camera}: run starting at frame {frame} has only interpolated boxes")]
    NoObservedEntry { identity: u32, camera: CameraId, frame: Frame },
    #[error("line {line}: expected `key = value`")]
    NotKeyValue { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: missing key `{key}`")]
    MissingKey { line: usize, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn split_fields<'a>(line: usize, text: &'a str, names: &[&str]) -> Result<Vec<&'a str>, FormatError> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != names.len() {
        return Err(FormatError::FieldCount {
            line,
            expected: names.len(),
            found: fields.len(),
        });
    }
    Ok(fields)
}

fn field<T: FromStr>(line: usize, name: &str, raw: &str) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| FormatError::Field {
        line,
        field: name.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn real(line: usize, name: &str, raw: &str) -> Result<f64, FormatError> {
    let v: f64 = field(line, name, raw)?;
    if !v.is_finite() {
        return Err(FormatError::Field {
            line,
            field: name.to_string(),
            message: format!("`{raw}` is not a finite decimal"),
        });
    }
    Ok(v)
}

fn parse_box(line: usize, raw: &[&str]) -> Result<BoundingBox, FormatError> {
    let [l, t, r, b] = [
        real(line, "left", raw[0])?,
        real(line, "top", raw[1])?,
        real(line, "right", raw[2])?,
        real(line, "bottom", raw[3])?,
    ];
    BoundingBox::new(l, t, r, b).map_err(|source| FormatError::Model { line, source })
}

fn push_box(out: &mut String, b: &BoundingBox) {
    let [l, t, r, bt] = b.coords();
    let _ = write!(out, "{l:.6},{t:.6},{r:.6},{bt:.6}");
}

const DETECTION_FIELDS: [&str; 7] = ["camera", "frame", "left", "top", "right", "bottom", "confidence"];

/// `camera,frame,left,top,right,bottom,confidence` per line; features absent.
pub fn parse_detections_str(text: &str) -> Result<Vec<Detection>, FormatError> {
    let mut out = Vec::new();
    for (n, l) in lines(text) {
        let f = split_fields(n, l, &DETECTION_FIELDS)?;
        let camera = field(n, "camera", f[0])?;
        let frame = field(n, "frame", f[1])?;
        let bbox = parse_box(n, &f[2..6])?;
        let confidence = real(n, "confidence", f[6])?;
        out.push(Detection::new(camera, frame, bbox, confidence));
    }
    Ok(out)
}

pub fn parse_detections(path: &Path) -> Result<Vec<Detection>, FormatError> {
    parse_detections_str(&read(path)?)
}

pub fn format_detections(detections: &[Detection]) -> String {
    let mut out = String::new();
    for d in detections {
        let _ = write!(out, "{},{},", d.camera, d.frame);
        push_box(&mut out, &d.bbox);
        let _ = writeln!(out, ",{:.6}", d.confidence);
    }
    out
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<(), FormatError> {
    write(path, &format_detections(detections))
}

/// Header `d=<dimension>`, then one comma-separated row per detection.
pub fn parse_features_str(text: &str, expected_count: usize) -> Result<Vec<FeatureVector>, FormatError> {
    let mut rows = lines(text);
    let dim: usize = match rows.next() {
        Some((n, header)) => match header.strip_prefix("d=") {
            Some(raw) => field(n, "d", raw.trim())?,
            None => return Err(FormatError::MissingHeader),
        },
        None => return Err(FormatError::MissingHeader),
    };
    let mut out = Vec::with_capacity(expected_count);
    for (n, l) in rows {
        let values: Vec<&str> = l.split(',').map(str::trim).collect();
        if values.len() != dim {
            return Err(FormatError::DimensionMismatch {
                line: n,
                expected: dim,
                found: values.len(),
            });
        }
        let mut v = Vec::with_capacity(dim);
        for (col, raw) in values.iter().enumerate() {
            let x: f64 = field(n, &format!("value {}", col + 1), raw)?;
            if !x.is_finite() {
                return Err(FormatError::NonFinite { line: n, column: col + 1 });
            }
            v.push(x);
        }
        out.push(FeatureVector::new(v).expect("values checked finite"));
    }
    if out.len() != expected_count {
        return Err(FormatError::CountMismatch {
            expected: expected_count,
            found: out.len(),
        });
    }
    Ok(out)
}

pub fn parse_features(path: &Path, expected_count: usize) -> Result<Vec<FeatureVector>, FormatError> {
    parse_features_str(&read(path)?, expected_count)
}

/// Rows must all have dimension `dim`.
pub fn format_features(dim: usize, features: &[FeatureVector]) -> String {
    let mut out = format!("d={dim}\n");
    for f in features {
        assert_eq!(f.dim(), dim, "feature dimension differs from header");
        for (i, v) in f.as_slice().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn write_features(path: &Path, dim: usize, features: &[FeatureVector]) -> Result<(), FormatError> {
    write(path, &format_features(dim, features))
}

const TRAJECTORY_FIELDS: [&str; 8] = [
    "identity",
    "camera",
    "frame",
    "left",
    "top",
    "right",
    "bottom",
    "interpolated",
];

/// `identity,camera,frame,left,top,right,bottom,interpolated` sorted by
/// `(identity, camera, frame)`. Features are not stored.
pub fn format_trajectories(clusters: &[IdentityCluster]) -> String {
    let mut records: Vec<(u32, CameraId, Frame, &TrajectoryEntry)> = clusters
        .iter()
        .flat_map(|c| {
            c.members
                .iter()
                .flat_map(move |t| t.entries().iter().map(move |(&f, e)| (c.identity, t.camera(), f, e)))
        })
        .collect();
    records.sort_by_key(|&(id, cam, f, _)| (id, cam, f));
    let mut out = String::new();
    for (id, cam, frame, e) in records {
        let _ = write!(out, "{id},{cam},{frame},");
        push_box(&mut out, &e.bbox);
        let _ = writeln!(out, ",{}", u8::from(e.interpolated));
    }
    out
}

pub fn write_trajectories(path: &Path, clusters: &[IdentityCluster]) -> Result<(), FormatError> {
    write(path, &format_trajectories(clusters))
}

/// Clusters in identity order. Each frame-contiguous run of one identity
/// in one camera becomes one trajectory; members are ordered by camera,
/// then first frame.
pub fn parse_trajectories_str(text: &str) -> Result<Vec<IdentityCluster>, FormatError> {
    let mut records: BTreeMap<(u32, CameraId, Frame), TrajectoryEntry> = BTreeMap::new();
    for (n, l) in lines(text) {
        let f = split_fields(n, l, &TRAJECTORY_FIELDS)?;
        let identity = field(n, "identity", f[0])?;
        let camera = field(n, "camera", f[1])?;
        let frame = field(n, "frame", f[2])?;
        let bbox = parse_box(n, &f[3..7])?;
        let interpolated = match f[7] {
            "0" => false,
            "1" => true,
            other => {
                return Err(FormatError::Field {
                    line: n,
                    field: "interpolated".into(),
                    message: format!("expected 0 or 1, got `{other}`"),
                })
            }
        };
        let entry = if interpolated {
            TrajectoryEntry::interpolated(bbox)
        } else {
            TrajectoryEntry::observed(bbox, None)
        };
        if records.insert((identity, camera, frame), entry).is_some() {
            return Err(FormatError::DuplicateRecord {
                line: n,
                identity,
                camera,
                frame,
            });
        }
    }

    let mut clusters: Vec<IdentityCluster> = Vec::new();
    let mut run: Vec<(Frame, TrajectoryEntry)> = Vec::new();
    let mut run_key: Option<(u32, CameraId)> = None;
    let flush = |clusters: &mut Vec<IdentityCluster>,
                 run: &mut Vec<(Frame, TrajectoryEntry)>,
                 key: Option<(u32, CameraId)>|
     -> Result<(), FormatError> {
        let Some((identity, camera)) = key else {
            return Ok(());
        };
        let first = run[0].0;
        let t = Trajectory::new(camera, run.drain(..)).map_err(|_| FormatError::NoObservedEntry {
            identity,
            camera,
            frame: first,
        })?;
        match clusters.last_mut() {
            Some(c) if c.identity == identity => c.members.push(t),
            _ => clusters.push(IdentityCluster::new(identity, vec![t])),
        }
        Ok(())
    };
    for ((identity, camera, frame), entry) in records {
        let continues = run_key == Some((identity, camera)) && run.last().is_some_and(|&(f, _)| f + 1 == frame);
        if !continues {
            flush(&mut clusters, &mut run, run_key)?;
            run_key = Some((identity, camera));
        }
        run.push((frame, entry));
    }
    flush(&mut clusters, &mut run, run_key)?;
    Ok(clusters)
}

pub fn parse_trajectories(path: &Path) -> Result<Vec<IdentityCluster>, FormatError> {
    parse_trajectories_str(&read(path)?)
}

struct KeyValue<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

/// Flat `key = value` lines; `#` starts a comment.
fn key_values<'a>(text: &'a str, known: &[&str]) -> Result<Vec<KeyValue<'a>>, FormatError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(FormatError::NotKeyValue { line });
        };
        let (key, value) = (key.trim(), value.trim());
        if !known.contains(&key) {
            return Err(FormatError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key) {
            return Err(FormatError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        out.push(KeyValue { line, key, value });
    }
    Ok(out)
}

impl KeyValue<'_> {
    fn parse<T: FromStr>(&self) -> Result<T, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        field(self.line, self.key, self.value)
    }

    fn real(&self) -> Result<f64, FormatError> {
        real(self.line, self.key, self.value)
    }

    fn flag(&self) -> Result<bool, FormatError> {
        match self.value {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(FormatError::Field {
                line: self.line,
                field: self.key.to_string(),
                message: format!("expected true or false, got `{other}`"),
            }),
        }
    }

    /// Comma-separated `a-b` camera pairs; may be empty.
    fn pairs(&self) -> Result<BTreeSet<CameraPair>, FormatError> {
        let mut out = BTreeSet::new();
        for item in self.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, b) = item.split_once('-').ok_or_else(|| FormatError::Field {
                line: self.line,
                field: self.key.to_string(),
                message: format!("expected a camera pair like `2-8`, got `{item}`"),
            })?;
            let a = field(self.line, self.key, a.trim())?;
            let b = field(self.line, self.key, b.trim())?;
            out.insert(CameraPair::new(a, b));
        }
        Ok(out)
    }
}

fn format_pairs(pairs: &BTreeSet<CameraPair>) -> String {
    pairs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

const CONFIG_KEYS: [&str; 18] = [
    "s",
    "sct_stop_threshold",
    "iou_gate",
    "window_frames",
    "neighbor_frames",
    "speed_threshold",
    "overlap_iou_threshold",
    "smoothing_window",
    "rerank_k1",
    "rerank_k2",
    "rerank_lambda",
    "mct_merge_threshold",
    "max_gap_frames",
    "overlapping_camera_pairs",
    "fps",
    "detection_confidence_threshold",
    "nms_iou_threshold",
    "normalize_features",
];

/// Missing keys keep their defaults; the result is validated.
pub fn parse_config_str(text: &str) -> Result<PipelineConfig, FormatError> {
    let mut c = PipelineConfig::default();
    for kv in key_values(text, &CONFIG_KEYS)? {
        match kv.key {
            "s" => c.s = kv.real()?,
            "sct_stop_threshold" => c.sct_stop_threshold = Some(kv.real()?),
            "iou_gate" => c.iou_gate = kv.real()?,
            "window_frames" => c.window_frames = kv.parse()?,
            "neighbor_frames" => c.neighbor_frames = kv.parse()?,
            "speed_threshold" => c.speed_threshold = kv.real()?,
            "overlap_iou_threshold" => c.overlap_iou_threshold = kv.real()?,
            "smoothing_window" => c.smoothing_window = kv.parse()?,
            "rerank_k1" => c.rerank_k1 = kv.parse()?,
            "rerank_k2" => c.rerank_k2 = kv.parse()?,
            "rerank_lambda" => c.rerank_lambda = kv.real()?,
            "mct_merge_threshold" => c.mct_merge_threshold = kv.real()?,
            "max_gap_frames" => c.max_gap_frames = kv.parse()?,
            "overlapping_camera_pairs" => c.overlapping_camera_pairs = kv.pairs()?,
            "fps" => c.fps = kv.real()?,
            "detection_confidence_threshold" => c.detection_confidence_threshold = kv.real()?,
            "nms_iou_threshold" => c.nms_iou_threshold = kv.real()?,
            "normalize_features" => c.normalize_features = kv.flag()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    let violations = c.validate();
    if !violations.is_empty() {
        let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(FormatError::Invalid(msg));
    }
    Ok(c)
}

pub fn parse_config(path: &Path) -> Result<PipelineConfig, FormatError> {
    parse_config_str(&read(path)?)
}

/// Every key, in a fixed order; an unset stop threshold is omitted.
pub fn format_config(c: &PipelineConfig) -> String {
    let mut out = String::new();
    let mut real = |k: &str, v: f64| {
        let _ = writeln!(out, "{k} = {v:.6}");
    };
    real("s", c.s);
    if let Some(v) = c.sct_stop_threshold {
        real("sct_stop_threshold", v);
    }
    real("iou_gate", c.iou_gate);
    real("speed_threshold", c.speed_threshold);
    real("overlap_iou_threshold", c.overlap_iou_threshold);
    real("rerank_lambda", c.rerank_lambda);
    real("mct_merge_threshold", c.mct_merge_threshold);
    real("fps", c.fps);
    real("detection_confidence_threshold", c.detection_confidence_threshold);
    real("nms_iou_threshold", c.nms_iou_threshold);
    let _ = writeln!(out, "window_frames = {}", c.window_frames);
    let _ = writeln!(out, "neighbor_frames = {}", c.neighbor_frames);
    let _ = writeln!(out, "smoothing_window = {}", c.smoothing_window);
    let _ = writeln!(out, "rerank_k1 = {}", c.rerank_k1);
    let _ = writeln!(out, "rerank_k2 = {}", c.rerank_k2);
    let _ = writeln!(out, "max_gap_frames = {}", c.max_gap_frames);
    let _ = writeln!(
        out,
        "overlapping_camera_pairs = {}",
        format_pairs(&c.overlapping_camera_pairs)
    );
    let _ = writeln!(out, "normalize_features = {}", c.normalize_features);
    out
}

pub fn write_config(path: &Path, c: &PipelineConfig) -> Result<(), FormatError> {
    write(path, &format_config(c))
}

const WORLD_KEYS: [&str; 15] = [
    "seed",
    "n_identities",
    "n_cameras",
    "overlapping_camera_pairs",
    "fps",
    "duration_s",
    "speed_min",
    "speed_max",
    "box_height_min",
    "box_height_max",
    "aspect_ratio",
    "image_width",
    "image_height",
    "transitions",
    "entry_spread_s",
];

/// `from>to:min..max` items, comma-separated.
fn parse_transitions(kv: &KeyValue) -> Result<Vec<Transition>, FormatError> {
    let bad = |item: &str| FormatError::Field {
        line: kv.line,
        field: kv.key.to_string(),
        message: format!("expected a transition like `1>2:30..90`, got `{item}`"),
    };
    let mut out = Vec::new();
    for item in kv.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (cams, range) = item.split_once(':').ok_or_else(|| bad(item))?;
        let (from, to) = cams.split_once('>').ok_or_else(|| bad(item))?;
        let (lo, hi) = range.split_once("..").ok_or_else(|| bad(item))?;
        out.push(Transition {
            from: from.trim().parse().map_err(|_| bad(item))?,
            to: to.trim().parse().map_err(|_| bad(item))?,
            min_frames: lo.trim().parse().map_err(|_| bad(item))?,
            max_frames: hi.trim().parse().map_err(|_| bad(item))?,
        });
    }
    Ok(out)
}

/// Missing keys keep the defaults of [`WorldConfig`]; the result is validated.
pub fn parse_world_config_str(text: &str) -> Result<WorldConfig, FormatError> {
    let mut w = WorldConfig::default();
    for kv in key_values(text, &WORLD_KEYS)? {
        match kv.key {
            "seed" => w.seed = kv.parse()?,
            "n_identities" => w.n_identities = kv.parse()?,
            "n_cameras" => w.n_cameras = kv.parse()?,
            "overlapping_camera_pairs" => w.overlapping_camera_pairs = kv.pairs()?,
            "fps" => w.fps = kv.real()?,
            "duration_s" => w.duration_s = kv.real()?,
            "speed_min" => w.speed_range.0 = kv.real()?,
            "speed_max" => w.speed_range.1 = kv.real()?,
            "box_height_min" => w.box_height_range.0 = kv.real()?,
            "box_height_max" => w.box_height_range.1 = kv.real()?,
            "aspect_ratio" => w.aspect_ratio = kv.real()?,
            "image_width" => w.image_width = kv.real()?,
            "image_height" => w.image_height = kv.real()?,
            "transitions" => w.transitions = parse_transitions(&kv)?,
            "entry_spread_s" => w.entry_spread_s = kv.real()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    w.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(w)
}

pub fn parse_world_config(path: &Path) -> Result<WorldConfig, FormatError> {
    parse_world_config_str(&read(path)?)
}

pub fn format_world_config(w: &WorldConfig) -> String {
    let transitions = w
        .transitions
        .iter()
        .map(|t| format!("{}>{}:{}..{}", t.from, t.to, t.min_frames, t.max_frames))
        .collect::<Vec<_>>()
        .join(",");
    let mut out = String::new();
    let _ = writeln!(out, "seed = {}", w.seed);
    let _ = writeln!(out, "n_identities = {}", w.n_identities);
    let _ = writeln!(out, "n_cameras = {}", w.n_cameras);
    let _ = writeln!(
        out,
        "overlapping_camera_pairs = {}",
        format_pairs(&w.overlapping_camera_pairs)
    );
    for (k, v) in [
        ("fps", w.fps),
        ("duration_s", w.duration_s),
        ("speed_min", w.speed_range.0),
        ("speed_max", w.speed_range.1),
        ("box_height_min", w.box_height_range.0),
        ("box_height_max", w.box_height_range.1),
        ("aspect_ratio", w.aspect_ratio),
        ("image_width", w.image_width),
        ("image_height", w.image_height),
        ("entry_spread_s", w.entry_spread_s),
    ] {
        let _ = writeln!(out, "{k} = {v:.6}");
    }
    let _ = writeln!(out, "transitions = {transitions}");
    out
}

const NOISE_KEYS: [&str; 6] = [
    "jitter_sigma",
    "miss_rate",
    "false_alarm_rate",
    "feature_dim",
    "separation",
    "feature_sigma",
];

/// Missing keys keep the defaults of [`NoiseConfig`].
pub fn parse_noise_config_str(text: &str) -> Result<NoiseConfig, FormatError> {
    let mut c = NoiseConfig::default();
    for kv in key_values(text, &NOISE_KEYS)? {
        match kv.key {
            "jitter_sigma" => c.jitter_sigma = kv.real()?,
            "miss_rate" => c.miss_rate = kv.real()?,
            "false_alarm_rate" => c.false_alarm_rate = kv.real()?,
            "feature_dim" => c.feature_dim = kv.parse()?,
            "separation" => c.separation = kv.real()?,
            "feature_sigma" => c.feature_sigma = kv.real()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    Ok(c)
}

pub fn parse_noise_config(path: &Path) -> Result<NoiseConfig, FormatError> {
    parse_noise_config_str(&read(path)?)
}

pub fn format_noise_config(c: &NoiseConfig) -> String {
    let mut out = String::new();
    for (k, v) in [
        ("jitter_sigma", c.jitter_sigma),
        ("miss_rate", c.miss_rate),
        ("false_alarm_rate", c.false_alarm_rate),
        ("separation", c.separation),
        ("feature_sigma", c.feature_sigma),
    ] {
        let _ = writeln!(out, "{k} = {v:.6}");
    }
    let _ = writeln!(out, "feature_dim = {}", c.feature_dim);
    out
}

const REPORT_KEYS: [&str; 6] = ["idf1", "idp", "idr", "idtp", "idfp", "idfn"];

/// Column names of [`format_report_row`].
pub const REPORT_HEADER: &str = "idf1,idp,idr,idtp,idfp,idfn";

/// `key = value` lines in the order idf1, idp, idr, idtp, idfp, idfn.
pub fn format_report(r: &IdMetricsReport) -> String {
    format!(
        "idf1 = {:.6}\nidp = {:.6}\nidr = {:.6}\nidtp = {}\nidfp = {}\nidfn = {}\n",
        r.idf1, r.idp, r.idr, r.idtp, r.idfp, r.idfn
    )
}

/// One CSV row without header.
pub fn format_report_row(r: &IdMetricsReport) -> String {
    format!(
        "{:.6},{:.6},{:.6},{},{},{}\n",
        r.idf1, r.idp, r.idr, r.idtp, r.idfp, r.idfn
    )
}

pub fn parse_report_str(text: &str) -> Result<IdMetricsReport, FormatError> {
    let kvs = key_values(text, &REPORT_KEYS)?;
    let get = |key: &str| {
        kvs.iter().find(|kv| kv.key == key).ok_or_else(|| FormatError::MissingKey {
            line: text.lines().count(),
            key: key.to_string(),
        })
    };
    Ok(IdMetricsReport {
        idf1: get("idf1")?.real()?,
        idp: get("idp")?.real()?,
        idr: get("idr")?.real()?,
        idtp: get("idtp")?.parse()?,
        idfp: get("idfp")?.parse()?,
        idfn: get("idfn")?.parse()?,
    })
}

/// Parses a [`REPORT_HEADER`] line followed by one row, or a bare row.
pub fn parse_report_row(text: &str) -> Result<IdMetricsReport, FormatError> {
    let mut rows = lines(text).filter(|(_, l)| *l != REPORT_HEADER);
    let Some((n, row)) = rows.next() else {
        return Err(FormatError::FieldCount {
            line: 1,
            expected: REPORT_KEYS.len(),
            found: 0,
        });
    };
    let f = split_fields(n, row, &REPORT_KEYS)?;
    Ok(IdMetricsReport {
        idf1: real(n, "idf1", f[0])?,
        idp: real(n, "idp", f[1])?,
        idr: real(n, "idr", f[2])?,
        idtp: field(n, "idtp", f[3])?,
        idfp: field(n, "idfp", f[4])?,
        idfn: field(n, "idfn", f[5])?,
    })
}
