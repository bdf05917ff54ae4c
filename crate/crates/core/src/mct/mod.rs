//! Multi-camera association.
//!
//! Trajectories from every camera are described by their mean appearance
//! feature, compared with Euclidean distance, re-ranked, and merged
//! greedily in ascending distance order. Distances are never recomputed
//! after a merge; each union must pass the time-gap and co-occurrence
//! constraints.

mod rerank;
mod union_find;

pub use rerank::{k_reciprocal_rerank, RerankError, RerankParams};

use thiserror::Error;

use crate::model::{CameraId, FeatureVector, Frame, IdentityCluster, PipelineConfig, Trajectory};
use union_find::DisjointSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MctError {
    #[error("trajectory {index} (camera {camera}) has no observed features")]
    NoFeatures { index: usize, camera: CameraId },
    #[error("trajectory {index} has feature dimension {got}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

/// Square matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, RerankError> {
        let n = rows.len();
        let got: usize = rows.iter().map(Vec::len).sum();
        if rows.iter().any(|r| r.len() != n) {
            return Err(RerankError::NotSquare { got });
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Summary of one trajectory used for cross-camera comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDescriptor {
    /// Position in the input slice.
    pub index: usize,
    pub camera: CameraId,
    pub first: Frame,
    pub last: Frame,
    pub mean_feature: FeatureVector,
}

/// Componentwise mean of the observed (non-interpolated) features.
pub fn mean_feature(t: &Trajectory) -> Option<FeatureVector> {
    FeatureVector::mean(t.features().map(|(_, v)| v))
}

pub fn describe(trajs: &[Trajectory]) -> Result<Vec<TrajectoryDescriptor>, MctError> {
    let mut out: Vec<TrajectoryDescriptor> = Vec::with_capacity(trajs.len());
    for (index, t) in trajs.iter().enumerate() {
        let mean = mean_feature(t).ok_or(MctError::NoFeatures {
            index,
            camera: t.camera(),
        })?;
        if let Some(first) = out.first() {
            if first.mean_feature.dim() != mean.dim() {
                return Err(MctError::Dimension {
                    index,
                    expected: first.mean_feature.dim(),
                    got: mean.dim(),
                });
            }
        }
        out.push(TrajectoryDescriptor {
            index,
            camera: t.camera(),
            first: t.first_frame(),
            last: t.last_frame(),
            mean_feature: mean,
        });
    }
    Ok(out)
}

pub fn euclidean_matrix(descs: &[TrajectoryDescriptor]) -> DistanceMatrix {
    let n = descs.len();
    let mut m = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = descs[i].mean_feature.distance(&descs[j].mean_feature);
            m.set(i, j, d);
            m.set(j, i, d);
        }
    }
    m
}

/// Constraint check for joining two clusters.
///
/// `trigger` is the pair of trajectories (one from each side) whose
/// distance proposed the merge; only that pair is subject to the time-gap
/// rule. The co-occurrence rule applies to every cross pair: members may
/// not overlap in time unless they sit in different cameras that form an
/// overlapping pair.
pub fn compatible_members(
    a: &[&Trajectory],
    b: &[&Trajectory],
    trigger: (&Trajectory, &Trajectory),
    config: &PipelineConfig,
) -> bool {
    if trigger.0.gap_to(trigger.1) >= config.max_gap_frames {
        return false;
    }
    a.iter().all(|x| {
        b.iter().all(|y| {
            !x.overlaps_in_time(y)
                || (x.camera() != y.camera() && config.cameras_may_overlap(x.camera(), y.camera()))
        })
    })
}

/// [`compatible_members`] for two identity clusters; `trigger` indexes
/// into `a.members` and `b.members`.
pub fn compatible(
    a: &IdentityCluster,
    b: &IdentityCluster,
    trigger: (usize, usize),
    config: &PipelineConfig,
) -> bool {
    let am: Vec<_> = a.members.iter().collect();
    let bm: Vec<_> = b.members.iter().collect();
    compatible_members(&am, &bm, (&a.members[trigger.0], &b.members[trigger.1]), config)
}

/// One accepted union during greedy merging.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// Frames between the two triggering trajectories (0 if they overlap).
    pub gap: Frame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MctOutcome {
    pub clusters: Vec<IdentityCluster>,
    /// Identity label of every input trajectory.
    pub labels: Vec<u32>,
    pub merges: Vec<MergeEvent>,
    /// Distance matrix the merge loop ran on.
    pub distances: DistanceMatrix,
}

/// Re-ranked (or raw, when `rerank_lambda == 1`) distance matrix.
pub fn association_matrix(descs: &[TrajectoryDescriptor], config: &PipelineConfig) -> Result<DistanceMatrix, MctError> {
    let raw = euclidean_matrix(descs);
    if config.rerank_lambda >= 1.0 {
        return Ok(raw);
    }
    Ok(k_reciprocal_rerank(
        &raw,
        RerankParams {
            k1: config.rerank_k1,
            k2: config.rerank_k2,
            lambda: config.rerank_lambda,
        },
    )?)
}

/// Greedy constrained merge of trajectories from all cameras.
pub fn merge_trajectories(trajs: &[Trajectory], config: &PipelineConfig) -> Result<MctOutcome, MctError> {
    let descs = describe(trajs)?;
    let distances = association_matrix(&descs, config)?;
    Ok(merge_with_distances(trajs, distances, config))
}

/// Merge loop over a precomputed distance matrix.
pub fn merge_with_distances(trajs: &[Trajectory], distances: DistanceMatrix, config: &PipelineConfig) -> MctOutcome {
    let n = trajs.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((distances.get(i, j), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut sets = DisjointSet::new(n);
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    for (d, i, j) in pairs {
        if d >= config.mct_merge_threshold {
            break;
        }
        let (ri, rj) = (sets.find(i), sets.find(j));
        if ri == rj {
            continue;
        }
        let a: Vec<_> = members[ri].iter().map(|&k| &trajs[k]).collect();
        let b: Vec<_> = members[rj].iter().map(|&k| &trajs[k]).collect();
        if !compatible_members(&a, &b, (&trajs[i], &trajs[j]), config) {
            continue;
        }
        let root = sets.union(ri, rj);
        let other = if root == ri { rj } else { ri };
        let moved = std::mem::take(&mut members[other]);
        members[root].extend(moved);
        merges.push(MergeEvent {
            a: i,
            b: j,
            distance: d,
            gap: trajs[i].gap_to(&trajs[j]),
        });
    }

    let mut groups: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| {
        let start = g.iter().map(|&k| trajs[k].first_frame()).min().unwrap();
        (start, g[0])
    });

    let mut labels = vec![0u32; n];
    let clusters = groups
        .iter()
        .enumerate()
        .map(|(c, g)| {
            let identity = c as u32 + 1;
            for &k in g {
                labels[k] = identity;
            }
            IdentityCluster::new(identity, g.iter().map(|&k| trajs[k].clone()).collect())
        })
        .collect();
    MctOutcome {
        clusters,
        labels,
        merges,
        distances,
    }
}
