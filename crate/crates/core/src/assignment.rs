//! Kuhn-Munkres assignment on rectangular real-valued matrices.

/// Rectangular weight matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "weight matrix size mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged weight matrix");
        Self::new(rows.len(), cols, rows.concat())
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

    fn transposed(&self) -> WeightMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        WeightMatrix::new(self.cols, self.rows, data)
    }
}

/// Minimum-cost assignment of every row to a distinct column, `rows <= cols`.
/// Shortest augmenting paths with row/column potentials, O(rows² · cols).
fn min_cost_wide(cost: &WeightMatrix) -> Vec<usize> {
    let (n, m) = (cost.rows(), cost.cols());
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // owner[j]: 1-based row matched to 1-based column j (0 = free).
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Assignment maximizing the total weight. Entry `i` is the column matched to
/// row `i`; rows are left unmatched only when there are more rows than columns.
pub fn maximize(weights: &WeightMatrix) -> Vec<Option<usize>> {
    if weights.rows() == 0 || weights.cols() == 0 {
        return vec![None; weights.rows()];
    }
    let negate = |w: &WeightMatrix| WeightMatrix::new(w.rows(), w.cols(), w.data.iter().map(|x| -x).collect());
    if weights.rows() <= weights.cols() {
        min_cost_wide(&negate(weights)).into_iter().map(Some).collect()
    } else {
        let col_to_row = min_cost_wide(&negate(&weights.transposed()));
        let mut out = vec![None; weights.rows()];
        for (c, r) in col_to_row.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}
