//! k-reciprocal re-ranking of a pairwise distance matrix.
//!
//! Every item is encoded as a sparse weight vector over its expanded
//! k-reciprocal neighbourhood, the encodings are averaged over the `k2`
//! nearest neighbours, and the Jaccard distance between encodings is
//! blended with the original distance.

use thiserror::Error;

use super::DistanceMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RerankError {
    #[error("distance matrix has {got} entries, which is not n*n")]
    NotSquare { got: usize },
    #[error("distance ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("lambda must lie in [0, 1], got {0}")]
    Lambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankParams {
    pub k1: usize,
    pub k2: usize,
    pub lambda: f64,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 6,
            lambda: 0.3,
        }
    }
}

/// Row-wise neighbour ranking, nearest first; ties go to the lower index.
fn initial_rank(d: &DistanceMatrix) -> Vec<Vec<usize>> {
    let n = d.len();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
            order
        })
        .collect()
}

/// `j` in the `k + 1` nearest of `i` and `i` in the `k + 1` nearest of `j`.
fn k_reciprocal(rank: &[Vec<usize>], i: usize, k: usize) -> Vec<usize> {
    let top = k + 1;
    rank[i][..top]
        .iter()
        .copied()
        .filter(|&j| rank[j][..top].contains(&i))
        .collect()
}

pub fn k_reciprocal_rerank(d: &DistanceMatrix, params: RerankParams) -> Result<DistanceMatrix, RerankError> {
    let n = d.len();
    for i in 0..n {
        for j in 0..n {
            let value = d.get(i, j);
            if !(value.is_finite() && value >= 0.0) {
                return Err(RerankError::InvalidEntry { row: i, col: j, value });
            }
        }
    }
    if !(0.0..=1.0).contains(&params.lambda) {
        return Err(RerankError::Lambda(params.lambda));
    }
    if n == 0 {
        return Ok(DistanceMatrix::zeros(0));
    }

    let k1 = params.k1.min(n - 1);
    let k2 = params.k2.clamp(1, n);
    let half = (k1 as f64 / 2.0).round_ties_even() as usize;
    let rank = initial_rank(d);

    // Encoding weights use the squared distance scaled by the row maximum.
    let mut v = vec![vec![0.0; n]; n];
    for (i, vi) in v.iter_mut().enumerate() {
        let base = k_reciprocal(&rank, i, k1);
        let mut expanded = base.clone();
        for &q in &base {
            let cand = k_reciprocal(&rank, q, half);
            let shared = cand.iter().filter(|c| base.contains(c)).count();
            if 3 * shared >= 2 * cand.len() {
                expanded.extend(cand);
            }
        }
        expanded.sort_unstable();
        expanded.dedup();

        let row_max = (0..n).map(|j| d.get(i, j) * d.get(i, j)).fold(0.0, f64::max);
        let scaled = |j: usize| {
            if row_max > 0.0 {
                d.get(i, j) * d.get(i, j) / row_max
            } else {
                0.0
            }
        };
        let weights: Vec<f64> = expanded.iter().map(|&j| (-scaled(j)).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (&j, w) in expanded.iter().zip(weights) {
            vi[j] = w / total;
        }
    }

    if k2 > 1 {
        let mut qe = vec![vec![0.0; n]; n];
        for i in 0..n {
            for &q in &rank[i][..k2] {
                for (acc, x) in qe[i].iter_mut().zip(&v[q]) {
                    *acc += x;
                }
            }
            qe[i].iter_mut().for_each(|x| *x /= k2 as f64);
        }
        v = qe;
    }

    let mut out = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let (mut lo, mut hi) = (0.0, 0.0);
            for (a, b) in v[i].iter().zip(&v[j]) {
                lo += a.min(*b);
                hi += a.max(*b);
            }
            let jaccard = if hi > 0.0 { 1.0 - lo / hi } else { 0.0 };
            let fij = params.lambda * d.get(i, j) + (1.0 - params.lambda) * jaccard;
            let fji = params.lambda * d.get(j, i) + (1.0 - params.lambda) * jaccard;
            let sym = (fij + fji) / 2.0;
            out.set(i, j, sym);
            out.set(j, i, sym);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> DistanceMatrix {
        DistanceMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identical_items_rerank_to_zero() {
        let d = matrix(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let r = k_reciprocal_rerank(&d, RerankParams::default()).unwrap();
        assert_eq!(r, DistanceMatrix::zeros(2));
    }

    #[test]
    fn lambda_one_returns_input() {
        let d = matrix(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 2.5], &[4.0, 2.5, 0.0]]);
        let r = k_reciprocal_rerank(
            &d,
            RerankParams {
                lambda: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r, d);
    }

    /// Golden values for items on a line at 0, 1 and 10, computed by an
    /// independent numpy transcription of the procedure
    /// (`k1 = k2 = 1`, `lambda = 0.5`):
    ///   R(0) = R(1) = {0, 1}, R(2) = {2}; no query expansion;
    ///   V0 = [1, e^-0.01] / (1 + e^-0.01), V1 = [e^(-1/81), 1] / (1 + e^(-1/81)).
    #[test]
    fn three_item_golden_trace() {
        let d = matrix(&[&[0.0, 1.0, 10.0], &[1.0, 0.0, 9.0], &[10.0, 9.0, 0.0]]);
        let r = k_reciprocal_rerank(
            &d,
            RerankParams {
                k1: 1,
                k2: 1,
                lambda: 0.5,
            },
        )
        .unwrap();
        let expected = [
            [0.0, 0.505_555_325_671_410_3, 5.5],
            [0.505_555_325_671_410_3, 0.0, 5.0],
            [5.5, 5.0, 0.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!(
                    (r.get(i, j) - want).abs() < 1e-12,
                    "({i},{j}) {} vs {want}",
                    r.get(i, j)
                );
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let d = matrix(&[&[0.0, -1.0], &[-1.0, 0.0]]);
        assert!(matches!(
            k_reciprocal_rerank(&d, RerankParams::default()),
            Err(RerankError::InvalidEntry { .. })
        ));
        let d = matrix(&[&[0.0]]);
        assert_eq!(
            k_reciprocal_rerank(&d, RerankParams::default()).unwrap(),
            DistanceMatrix::zeros(1)
        );
    }

    /// Same oracle, eight points on a line, `k1 = 3`, `k2 = 2`, `lambda = 0.3`;
    /// exercises the neighbourhood expansion and the query expansion.
    #[test]
    fn eight_point_golden_values() {
        let pts: [f64; 8] = [0.0, 0.3, 0.35, 2.0, 2.1, 5.0, 5.5, 5.6];
        let d = DistanceMatrix::from_fn(pts.len(), |i, j| (pts[i] - pts[j]).abs());
        let r = k_reciprocal_rerank(
            &d,
            RerankParams {
                k1: 3,
                k2: 2,
                lambda: 0.3,
            },
        )
        .unwrap();
        let row0 = [
            0.0,
            0.235_637_319_515_453_55,
            0.250_637_319_515_453_54,
            1.132_801_937_418_311_8,
            1.162_801_937_418_311_8,
            2.2,
            2.35,
            2.38,
        ];
        let row5 = [
            2.2,
            2.11,
            2.095,
            1.6,
            1.57,
            0.0,
            0.153_649_285_539_297_02,
            0.183_649_285_539_296_9,
        ];
        for j in 0..pts.len() {
            assert!((r.get(0, j) - row0[j]).abs() < 1e-12, "(0,{j})");
            assert!((r.get(5, j) - row5[j]).abs() < 1e-12, "(5,{j})");
        }
        assert!((r.get(1, 2) - 0.015).abs() < 1e-12);
        assert!((r.get(3, 4) - 0.03).abs() < 1e-12);
    }

    #[test]
    fn output_is_symmetric_with_zero_diagonal() {
        let pts: [f64; 8] = [0.0, 0.3, 0.35, 2.0, 2.1, 5.0, 5.5, 5.6];
        let d = DistanceMatrix::from_fn(pts.len(), |i, j| (pts[i] - pts[j]).abs());
        let r = k_reciprocal_rerank(
            &d,
            RerankParams {
                k1: 3,
                k2: 2,
                lambda: 0.3,
            },
        )
        .unwrap();
        for i in 0..pts.len() {
            assert_eq!(r.get(i, i), 0.0);
            for j in 0..pts.len() {
                assert_eq!(r.get(i, j), r.get(j, i));
                assert!(r.get(i, j) >= 0.0);
            }
        }
    }
}
