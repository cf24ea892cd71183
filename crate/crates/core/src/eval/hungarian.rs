//! Maximum-similarity one-to-one assignment.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Dense `rows × cols` similarity matrix with entries in `[0, 1]`.
/// Rows are ground-truth entities, columns predicted ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, EvalError> {
        if values.len() != rows * cols {
            return Err(EvalError::InvalidMatrix(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EvalError::InvalidMatrix(format!("entry {v} outside [0, 1]")));
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, EvalError> {
        let values = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self::new(rows, cols, values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EvalError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(EvalError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub gt_index: usize,
    pub pred_index: usize,
    pub similarity: f64,
}

/// One-to-one pairing of ground-truth and predicted entities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Alignment {
    /// Sorted by `gt_index`.
    pub pairs: Vec<AlignedPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl Alignment {
    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.similarity).sum()
    }
}

/// Minimum-cost perfect matching on a square matrix via shortest
/// augmenting paths with dual potentials, O(n³). Returns the column
/// assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_slack[col] {
                    min_slack[col] = reduced;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            row_of_col[col0] = row_of_col[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for col in 1..=n {
        if row_of_col[col] > 0 {
            col_of_row[row_of_col[col] - 1] = col - 1;
        }
    }
    col_of_row
}

fn assignment_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| cost[r][c]).collect()).collect();
    min_cost_assignment(&sub).iter().enumerate().map(|(i, &j)| sub[i][j]).sum()
}

/// Among all optimal assignments, the one that is lexicographically
/// smallest when read row by row.
fn lexicographic_optimum(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let best = assignment_cost(cost, &(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>());
    let tolerance = 1e-10 * (n as f64).max(1.0);
    let mut fixed_cost = 0.0;
    let mut free_cols: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let pick = free_cols
            .iter()
            .position(|&col| {
                let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
                fixed_cost + cost[row][col] + assignment_cost(cost, &rest_rows, &rest_cols) <= best + tolerance
            })
            .expect("an optimal completion always exists");
        let col = free_cols.remove(pick);
        fixed_cost += cost[row][col];
        out.push(col);
    }
    out
}

/// Maximizes total similarity with a min-cost assignment on `1 - S`,
/// padding the shorter side with zero-cost dummies. Ties are resolved in
/// favour of the lowest `(gt_index, pred_index)`. Pairs scoring below
/// `min_similarity` are demoted to unmatched.
pub fn hungarian_align(s: &SimilarityMatrix, min_similarity: Option<f64>) -> Alignment {
    let (m, n) = (s.rows(), s.cols());
    let size = m.max(n);
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| (0..size).map(|j| if i < m && j < n { 1.0 - s.get(i, j) } else { 0.0 }).collect())
        .collect();
    let assignment = lexicographic_optimum(&cost);

    let mut alignment = Alignment::default();
    let mut pred_used = vec![false; n];
    for (gt_index, &pred_index) in assignment.iter().enumerate().take(m) {
        if pred_index >= n {
            alignment.unmatched_gt.push(gt_index);
            continue;
        }
        let similarity = s.get(gt_index, pred_index);
        if min_similarity.is_some_and(|t| similarity < t) {
            alignment.unmatched_gt.push(gt_index);
            continue;
        }
        pred_used[pred_index] = true;
        alignment.pairs.push(AlignedPair { gt_index, pred_index, similarity });
    }
    alignment.unmatched_pred = (0..n).filter(|&j| !pred_used[j]).collect();
    alignment
}
