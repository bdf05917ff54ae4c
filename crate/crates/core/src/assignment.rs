//! Maximum-weight bipartite matching (Kuhn-Munkres) with forbidden edges.
//!
//! Any row or column may stay unmatched, so only edges with a strictly
//! positive finite weight ever appear in a solution. Forbidden edges are
//! encoded as `-inf`. Rectangular instances are padded to a square with
//! zero-weight dummies.
//!
//! Among several optimal matchings the solver returns the one whose pair
//! list, sorted by `(row, col)`, is lexicographically smallest. The
//! tie-break walks the equality subgraph of the optimal dual solution: a
//! perfect matching is optimal iff it only uses tight edges, so fixing rows
//! in order and repairing the matching with alternating paths enumerates
//! exactly the optimal solutions.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("weight matrix has {got} entries, expected {rows}x{cols}")]
    Shape { rows: usize, cols: usize, got: usize },
    #[error("weight at ({row}, {col}) is {value}; only finite values and -inf are allowed")]
    InvalidWeight { row: usize, col: usize, value: f64 },
}

/// Dense row-major matrix of edge weights; `-inf` marks a forbidden edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::Shape {
                rows,
                cols,
                got: data.len(),
            });
        }
        for (k, &value) in data.iter().enumerate() {
            if value.is_nan() || value == f64::INFINITY {
                return Err(AssignmentError::InvalidWeight {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                    value,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(AssignmentError::Shape {
                    rows: rows.len(),
                    cols,
                    got: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds the matrix from a weight function.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignmentError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Matched `(row, col)` pairs, sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Matching {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum RowFix {
    Free,
    Col(usize),
    Unmatched,
}

struct Solver<'a> {
    w: &'a WeightMatrix,
    n: usize,
    /// Cost of the padded minimisation problem, `-max(w, 0)`.
    cost: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    eps: f64,
}

impl<'a> Solver<'a> {
    fn new(w: &'a WeightMatrix) -> Self {
        let n = w.rows.max(w.cols);
        let mut cost = vec![0.0; n * n];
        let mut scale: f64 = 1.0;
        for r in 0..w.rows {
            for c in 0..w.cols {
                let x = w.get(r, c);
                if x > 0.0 {
                    cost[r * n + c] = -x;
                    scale = scale.max(x);
                }
            }
        }
        Self {
            w,
            n,
            cost,
            u: vec![0.0; n],
            v: vec![0.0; n],
            eps: scale * 1e-9 * (n.max(1) as f64),
        }
    }

    fn positive(&self, r: usize, c: usize) -> bool {
        r < self.w.rows && c < self.w.cols && self.w.get(r, c) > 0.0
    }

    fn tight(&self, r: usize, c: usize) -> bool {
        self.cost[r * self.n + c] - self.u[r] - self.v[c] <= self.eps
    }

    /// Shortest augmenting path Hungarian method; returns row -> col.
    fn hungarian(&mut self) -> Vec<usize> {
        let n = self.n;
        // 1-based internally, index 0 is the virtual root.
        let mut u = vec![0.0; n + 1];
        let mut v = vec![0.0; n + 1];
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0usize;
            let mut minv = vec![f64::INFINITY; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if used[j] {
                        continue;
                    }
                    let cur = self.cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut row_to_col = vec![0usize; n];
        for j in 1..=n {
            row_to_col[p[j] - 1] = j - 1;
        }
        self.u = u[1..].to_vec();
        self.v = v[1..].to_vec();
        row_to_col
    }

    fn allowed(&self, fix: &[RowFix], col_fixed: &[bool], r: usize, c: usize) -> bool {
        if !self.tight(r, c) {
            return false;
        }
        match fix[r] {
            RowFix::Col(c0) => c == c0,
            RowFix::Unmatched => !col_fixed[c] && !self.positive(r, c),
            RowFix::Free => !col_fixed[c],
        }
    }

    /// Re-routes the matching so that `r` takes `c`, if an optimal
    /// matching respecting the current fixes allows it.
    fn try_force(
        &self,
        fix: &[RowFix],
        col_fixed: &[bool],
        m: &mut [usize],
        cm: &mut [usize],
        r: usize,
        c: usize,
    ) -> bool {
        if m[r] == c {
            return true;
        }
        let n = self.n;
        let start = cm[c];
        let target = m[r];
        // BFS over rows; parent_col[j] = row that reached column j.
        let mut parent_col = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        let mut seen_row = vec![false; n];
        seen_row[start] = true;
        seen_row[r] = true;
        let mut found = false;
        'bfs: while let Some(row) = queue.pop_front() {
            for j in 0..n {
                if j == c || parent_col[j] != usize::MAX || !self.allowed(fix, col_fixed, row, j) {
                    continue;
                }
                parent_col[j] = row;
                if j == target {
                    found = true;
                    break 'bfs;
                }
                let next = cm[j];
                if !seen_row[next] {
                    seen_row[next] = true;
                    queue.push_back(next);
                }
            }
        }
        if !found {
            return false;
        }
        let mut j = target;
        loop {
            let row = parent_col[j];
            let prev = m[row];
            m[row] = j;
            cm[j] = row;
            if row == start {
                break;
            }
            j = prev;
        }
        m[r] = c;
        cm[c] = r;
        true
    }

    fn solve(mut self) -> Matching {
        if self.n == 0 {
            return Matching::default();
        }
        let mut m = self.hungarian();
        let mut cm = vec![0usize; self.n];
        for (r, &c) in m.iter().enumerate() {
            cm[c] = r;
        }
        let mut fix = vec![RowFix::Free; self.n];
        let mut col_fixed = vec![false; self.n];
        for r in 0..self.w.rows {
            let mut chosen = None;
            for c in 0..self.w.cols {
                if col_fixed[c] || !self.positive(r, c) || !self.tight(r, c) {
                    continue;
                }
                if self.try_force(&fix, &col_fixed, &mut m, &mut cm, r, c) {
                    chosen = Some(c);
                    break;
                }
            }
            match chosen {
                Some(c) => {
                    fix[r] = RowFix::Col(c);
                    col_fixed[c] = true;
                }
                None => fix[r] = RowFix::Unmatched,
            }
        }
        let pairs: Vec<(usize, usize)> = (0..self.w.rows)
            .filter_map(|r| match fix[r] {
                RowFix::Col(c) => Some((r, c)),
                _ => None,
            })
            .collect();
        let total = pairs.iter().map(|&(r, c)| self.w.get(r, c)).sum();
        Matching { pairs, total }
    }
}

/// Maximum-weight matching; see the module docs for tie-breaking.
pub fn solve_max_weight_matching(w: &WeightMatrix) -> Matching {
    Solver::new(w).solve()
}
