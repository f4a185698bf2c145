//! Joint frequency/time difference operator over a `2N × T` PSD matrix.
//!
//! `V` stacks four `2TN × 2TN` blocks acting on the column-major `vec(P)`:
//!
//! | block | row `i` | partner |
//! |-------|---------|---------|
//! | `V₁`  | `+p[i]` | `-p[i-1]`, same column only |
//! | `V₂`  | `-p[i]` | `+p[i+2N]`, next period |
//! | `V₃`  | `+p[i]` | `-p[i+1]`, same column only |
//! | `V₄`  | `+p[i]` | `-p[i+2N]`, next period |
//!
//! A row whose partner falls outside the grid (or in another column, for
//! the frequency blocks) keeps its lone diagonal entry.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{invalid, shape, Result};
use crate::linalg::RMatrix;

/// One row of `V`: a diagonal coefficient plus at most one partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvRow {
    pub col: usize,
    pub val: f64,
    pub partner: Option<(usize, f64)>,
}

impl TvRow {
    fn dot(&self, p: &[f64]) -> f64 {
        let mut acc = self.val * p[self.col];
        if let Some((c, v)) = self.partner {
            acc += v * p[c];
        }
        acc
    }

    pub fn nnz(&self) -> usize {
        1 + self.partner.is_some() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvOperator {
    n2: usize,
    t: usize,
    rows: Vec<TvRow>,
}

fn lone(i: usize, val: f64) -> TvRow {
    TvRow {
        col: i,
        val,
        partner: None,
    }
}

pub fn build_tv_operator(n2: usize, t: usize) -> Result<TvOperator> {
    if n2 < 2 || !n2.is_multiple_of(2) {
        return Err(invalid(format!(
            "frequency size {n2} must be even and >= 2"
        )));
    }
    if t == 0 {
        return Err(invalid("need at least one period"));
    }
    let len = n2 * t;
    let mut rows = Vec::with_capacity(4 * len);
    // V₁: backward difference within a column
    rows.extend((0..len).map(|i| TvRow {
        partner: (i % n2 != 0).then(|| (i - 1, -1.0)),
        ..lone(i, 1.0)
    }));
    // V₂: forward difference in time, -p[i] + p[i+2N]
    rows.extend((0..len).map(|i| TvRow {
        partner: (i + n2 < len).then(|| (i + n2, 1.0)),
        ..lone(i, -1.0)
    }));
    // V₃: forward difference within a column
    rows.extend((0..len).map(|i| TvRow {
        partner: ((i + 1) % n2 != 0).then(|| (i + 1, -1.0)),
        ..lone(i, 1.0)
    }));
    // V₄: p[i] - p[i+2N]
    rows.extend((0..len).map(|i| TvRow {
        partner: (i + n2 < len).then(|| (i + n2, -1.0)),
        ..lone(i, 1.0)
    }));
    Ok(TvOperator { n2, t, rows })
}

impl TvOperator {
    /// Wraps arbitrary rows (e.g. a deliberately corrupted operator in the
    /// self-test); only the shape is checked.
    pub fn from_rows(n2: usize, t: usize, rows: Vec<TvRow>) -> Result<Self> {
        let len = n2 * t;
        if rows.len() != 4 * len {
            return Err(shape(4 * len, rows.len()));
        }
        if rows
            .iter()
            .any(|r| r.col >= len || r.partner.is_some_and(|(c, _)| c >= len))
        {
            return Err(invalid("row references a column outside the grid"));
        }
        Ok(Self { n2, t, rows })
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn periods(&self) -> usize {
        self.t
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.n2 * self.t
    }

    pub fn rows(&self) -> &[TvRow] {
        &self.rows
    }

    /// Rows of block `k` (0-based: `V₁` is block 0).
    pub fn block(&self, k: usize) -> &[TvRow] {
        let len = self.ncols();
        &self.rows[k * len..(k + 1) * len]
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.ncols() {
            return Err(shape(self.ncols(), p.len()));
        }
        Ok(self.rows.iter().map(|r| r.dot(p)).collect())
    }

    pub(crate) fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r.dot(p);
        }
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.nrows() {
            return Err(shape(self.nrows(), y.len()));
        }
        let mut out = vec![0.0; self.ncols()];
        self.apply_transpose_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in self.rows.iter().zip(y) {
            out[r.col] += r.val * yr;
            if let Some((c, v)) = r.partner {
                out[c] += v * yr;
            }
        }
    }

    /// `VᵀV` as a dense matrix.
    pub fn gram(&self) -> RMatrix {
        let n = self.ncols();
        let mut g = DMatrix::zeros(n, n);
        for r in &self.rows {
            let mut entries = vec![(r.col, r.val)];
            entries.extend(r.partner);
            for &(a, va) in &entries {
                for &(b, vb) in &entries {
                    g[(a, b)] += va * vb;
                }
            }
        }
        g
    }

    pub fn to_dense(&self) -> RMatrix {
        let mut v = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, r) in self.rows.iter().enumerate() {
            v[(i, r.col)] += r.val;
            if let Some((c, val)) = r.partner {
                v[(i, c)] += val;
            }
        }
        v
    }

    /// Debug dump as `row,col,val` triplets.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "row,col,val")?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(out, "{i},{},{}", r.col, r.val)?;
            if let Some((c, v)) = r.partner {
                writeln!(out, "{i},{c},{v}")?;
            }
        }
        Ok(())
    }
}

/// `‖V p‖₁`.
pub fn total_variation_operator_norm(v: &TvOperator, p: &[f64]) -> Result<f64> {
    Ok(v.apply(p)?.iter().map(|x| x.abs()).sum())
}

/// True when `p` vanishes on the first and last bin of every period and on
/// the whole last period. The anchor rows of `V` then see zeros, and
/// `‖V vec(p)‖₁` equals [`total_variation_sum`].
pub fn is_interior_supported(p: &RMatrix) -> bool {
    let (rows, cols) = p.shape();
    (0..cols).all(|j| p[(0, j)] == 0.0 && p[(rows - 1, j)] == 0.0)
        && (0..rows).all(|i| p[(i, cols - 1)] == 0.0)
}

/// Four-neighbour sum `Σ_{i,j} |P(i,j) - P(i±1,j)| + |P(i,j) - P(i,j±1)|`,
/// skipping neighbours that fall off the grid.
pub fn total_variation_sum(p: &RMatrix) -> f64 {
    let (rows, cols) = p.shape();
    let mut acc = 0.0;
    for j in 0..cols {
        for i in 0..rows {
            let v = p[(i, j)];
            if i > 0 {
                acc += (v - p[(i - 1, j)]).abs();
            }
            if i + 1 < rows {
                acc += (v - p[(i + 1, j)]).abs();
            }
            if j > 0 {
                acc += (v - p[(i, j - 1)]).abs();
            }
            if j + 1 < cols {
                acc += (v - p[(i, j + 1)]).abs();
            }
        }
    }
    acc
}
