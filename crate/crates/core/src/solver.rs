//! Sparse storage and linear solvers.
//!
//! [`bicgstab`] is the plain (unpreconditioned) stabilised bi-conjugate
//! gradient method with shadow residual `r̂₀ = r₀`. [`dense_solve`] is LU
//! with partial pivoting, kept for cross-checks on small systems.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Bi-CGSTAB breakdown at iteration {iteration}: {quantity} vanished")]
    Breakdown {
        iteration: usize,
        quantity: &'static str,
    },
    #[error("matrix is singular to working precision (pivot column {0})")]
    Singular(usize),
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(SolverError::InvalidStructure("bad row offsets".into()));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(SolverError::InvalidStructure("offsets not monotone".into()));
        }
        let nnz = row_offsets[n_rows];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(SolverError::InvalidStructure("nnz mismatch".into()));
        }
        for r in 0..n_rows {
            let cols = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(SolverError::InvalidStructure(format!(
                    "row {r} has unsorted or out-of-range columns"
                )));
            }
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists sorted by column.
    pub fn from_sorted_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in &rows {
            for &(c, v) in row {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Keeps entries with `|a_ij| > tol`, row by row.
    pub fn from_dense(dense: &[Vec<f64>], tol: f64) -> Self {
        let n_cols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| v.abs() > tol)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(n_cols, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// `diag(d) + scale * self`, assuming a square matrix.
    pub fn scaled_plus_diagonal(&self, scale: f64, diag: &[f64]) -> CsrMatrix {
        assert_eq!(self.n_rows, diag.len());
        let rows = (0..self.n_rows)
            .map(|r| {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(self.row_offsets[r + 1] - self.row_offsets[r] + 1);
                let mut placed = false;
                for (c, v) in self.row(r) {
                    if !placed && c >= r {
                        if c == r {
                            row.push((c, diag[r] + scale * v));
                            placed = true;
                            continue;
                        }
                        row.push((r, diag[r]));
                        placed = true;
                    }
                    row.push((c, scale * v));
                }
                if !placed {
                    row.push((r, diag[r]));
                }
                row
            })
            .collect();
        CsrMatrix::from_sorted_rows(self.n_cols, rows)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yr = acc;
        }
    }
}

pub fn spmv(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>, SolverError> {
    if x.len() != a.n_cols {
        return Err(SolverError::DimensionMismatch {
            expected: a.n_cols,
            got: x.len(),
        });
    }
    let mut y = vec![0.0; a.n_rows];
    a.spmv_into(x, &mut y);
    Ok(y)
}

/// Percentage of stored entries, `100 * nnz / (rows * cols)`.
pub fn density(a: &CsrMatrix) -> f64 {
    let total = a.n_rows * a.n_cols;
    if total == 0 {
        0.0
    } else {
        100.0 * a.nnz() as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂` of the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicgstabParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BicgstabParams {
    fn default() -> Self {
        BicgstabParams {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

const BREAKDOWN: f64 = 1e-300;
const RESIDUAL_REFRESH: usize = 25;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.spmv_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

pub fn bicgstab(
    a0: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    params: BicgstabParams,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = a0.n_rows;
    if a0.n_cols != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: a0.n_cols,
        });
    }
    for v in [b, x0] {
        if v.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    if !(params.tol > 0.0) {
        return Err(SolverError::BadTolerance(params.tol));
    }

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    true_residual(a0, b, &x, &mut r);
    let mut rel = norm(&r) / b_norm;
    if rel <= params.tol {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                final_residual: rel,
                converged: true,
            },
        ));
    }

    let r_hat = r.clone();
    let (mut rho_prev, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    for i in 1..=params.max_iter {
        let rho = dot(&r_hat, &r);
        if rho.abs() < BREAKDOWN {
            return Err(SolverError::Breakdown {
                iteration: i,
                quantity: "(r̂₀, r)",
            });
        }
        let beta = (rho / rho_prev) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        a0.spmv_into(&p, &mut v);
        let rv = dot(&r_hat, &v);
        if rv.abs() < BREAKDOWN {
            return Err(SolverError::Breakdown {
                iteration: i,
                quantity: "(r̂₀, v)",
            });
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }

        if norm(&s) / b_norm <= params.tol {
            for k in 0..n {
                x[k] += alpha * p[k];
            }
            true_residual(a0, b, &x, &mut scratch);
            rel = norm(&scratch) / b_norm;
            if rel <= params.tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: i,
                        final_residual: rel,
                        converged: true,
                    },
                ));
            }
            // recurrence drifted; restart the cycle from the true residual
            r.copy_from_slice(&scratch);
            (rho_prev, alpha, omega) = (1.0, 1.0, 1.0);
            p.fill(0.0);
            v.fill(0.0);
            continue;
        }

        a0.spmv_into(&s, &mut t);
        let tt = dot(&t, &t);
        if tt < BREAKDOWN {
            return Err(SolverError::Breakdown {
                iteration: i,
                quantity: "(t, t)",
            });
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() < BREAKDOWN {
            return Err(SolverError::Breakdown {
                iteration: i,
                quantity: "ω",
            });
        }
        for k in 0..n {
            x[k] += alpha * p[k] + omega * s[k];
            r[k] = s[k] - omega * t[k];
        }
        if i % RESIDUAL_REFRESH == 0 {
            true_residual(a0, b, &x, &mut r);
        }
        if norm(&r) / b_norm <= params.tol {
            true_residual(a0, b, &x, &mut scratch);
            rel = norm(&scratch) / b_norm;
            if rel <= params.tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: i,
                        final_residual: rel,
                        converged: true,
                    },
                ));
            }
            r.copy_from_slice(&scratch);
        }
        rho_prev = rho;
    }

    true_residual(a0, b, &x, &mut scratch);
    rel = norm(&scratch) / b_norm;
    Ok((
        x,
        SolveReport {
            iterations: params.max_iter,
            final_residual: rel,
            converged: rel <= params.tol,
        },
    ))
}

/// LU factorization with partial pivoting of a dense row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &[Vec<f64>]) -> Result<Self, SolverError> {
        let n = a.len();
        if let Some(bad) = a.iter().find(|r| r.len() != n) {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let scale = a
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale * n as f64;

        let mut lu: Vec<Vec<f64>> = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| lu[i][col].abs().total_cmp(&lu[j][col].abs()))
                .unwrap();
            if lu[pivot][col].abs() <= tiny {
                return Err(SolverError::Singular(col));
            }
            lu.swap(col, pivot);
            perm.swap(col, pivot);
            let (upper, lower) = lu.split_at_mut(col + 1);
            let prow = &upper[col];
            for row in lower.iter_mut() {
                let f = row[col] / prow[col];
                row[col] = f;
                if f != 0.0 {
                    for k in col + 1..n {
                        row[k] -= f * prow[k];
                    }
                }
            }
        }
        Ok(DenseLu { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        let n = self.lu.len();
        if b.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.lu[i][k] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= self.lu[i][k] * x[k];
            }
            x[i] = acc / self.lu[i][i];
        }
        Ok(x)
    }
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, SolverError> {
    if b.len() != a.len() {
        return Err(SolverError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    DenseLu::factor(a)?.solve(b)
}
