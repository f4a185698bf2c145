//! Dense matrix helpers shared by the operator builders.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Hankel matrix with first column `a` and last row `b`.
///
/// Entry `(i, j)` depends only on `i + j`. When `a` and `b` disagree on the
/// shared corner element, `a` wins.
pub fn hankel(a: &[Complex64], b: &[Complex64]) -> CMatrix {
    let (rows, cols) = (a.len(), b.len());
    DMatrix::from_fn(rows, cols, |i, j| {
        let k = i + j;
        if k < rows {
            a[k]
        } else {
            b[k + 1 - rows]
        }
    })
}

/// Toeplitz matrix with first column `a` and first row `b`.
///
/// Entry `(i, j)` depends only on `i - j`. The diagonal is taken from `a`.
pub fn toeplitz(a: &[Complex64], b: &[Complex64]) -> CMatrix {
    DMatrix::from_fn(
        a.len(),
        b.len(),
        |i, j| if i >= j { a[i - j] } else { b[j - i] },
    )
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_element(rows, cols, ZERO)
}

/// Stacks real then imaginary parts.
pub fn lift(v: &[Complex64]) -> Vec<f64> {
    v.iter()
        .map(|z| z.re)
        .chain(v.iter().map(|z| z.im))
        .collect()
}

/// Real matrix `[Re M; Im M]` acting on real vectors.
pub fn lift_matrix(m: &CMatrix) -> RMatrix {
    let rows = m.nrows();
    DMatrix::from_fn(2 * rows, m.ncols(), |i, j| {
        if i < rows {
            m[(i, j)].re
        } else {
            m[(i - rows, j)].im
        }
    })
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cnorm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `‖a - b‖₂ / ‖b‖₂`, or the absolute error when `b` is zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let base = norm2(b);
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Sidecar metadata for [`write_matrix_bin`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
}

/// Writes `m` row-major as little-endian `complex64` (two `f32` per entry)
/// to `path`, and a `{rows, cols, dtype}` JSON sidecar next to it
/// (`path` with `.json` appended).
pub fn write_matrix_bin(path: &Path, m: &CMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.write_all(&(z.re as f32).to_le_bytes())?;
            out.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    let sidecar = MatrixSidecar {
        rows: m.nrows(),
        cols: m.ncols(),
        dtype: "complex64".into(),
    };
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    std::fs::write(side, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_bin`].
pub fn read_matrix_bin(path: &Path) -> Result<CMatrix> {
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let meta: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(side)?)?;
    if meta.dtype != "complex64" {
        return Err(invalid(format!("unsupported dtype {}", meta.dtype)));
    }
    let bytes = std::fs::read(path)?;
    if bytes.len() != meta.rows * meta.cols * 8 {
        return Err(invalid(format!(
            "{} bytes do not hold a {}x{} complex64 matrix",
            bytes.len(),
            meta.rows,
            meta.cols
        )));
    }
    let f = |k: usize| f32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as f64;
    Ok(DMatrix::from_fn(meta.rows, meta.cols, |i, j| {
        let k = 8 * (i * meta.cols + j);
        Complex64::new(f(k), f(k + 4))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn hankel_matches_definition() {
        let a = [c(1.0), c(2.0), c(3.0)];
        let b = [c(3.0), c(4.0), c(5.0)];
        let h = hankel(&a, &b);
        // first column a, last row b, constant anti-diagonals
        for i in 0..3 {
            assert_eq!(h[(i, 0)], a[i]);
            assert_eq!(h[(2, i)], b[i]);
        }
        assert_eq!(h[(0, 2)], h[(1, 1)]);
        assert_eq!(h[(0, 2)], c(3.0));
    }

    #[test]
    fn toeplitz_matches_definition() {
        let a = [c(1.0), c(2.0), c(3.0)];
        let b = [c(1.0), c(7.0), c(8.0)];
        let t = toeplitz(&a, &b);
        assert_eq!(t[(0, 2)], c(8.0));
        assert_eq!(t[(2, 0)], c(3.0));
        assert_eq!(t[(1, 1)], c(1.0));
        assert_eq!(t[(1, 2)], t[(0, 1)]);
    }

    #[test]
    fn lift_stacks_real_then_imag() {
        let v = [Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)];
        assert_eq!(lift(&v), vec![1.0, 3.0, 2.0, 4.0]);
        let m = DMatrix::from_row_slice(1, 2, &v);
        let l = lift_matrix(&m);
        assert_eq!(l.shape(), (2, 2));
        assert_eq!(l[(1, 1)], 4.0);
    }

    #[test]
    fn matrix_binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = DMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, -(j as f64) * 0.5));
        write_matrix_bin(&path, &m).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 48);
        assert_eq!(read_matrix_bin(&path).unwrap(), m);
    }
}
