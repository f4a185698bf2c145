//! Random row-subsampling model of the analog-to-information converter.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::linalg::CMatrix;
use crate::model::NyquistFrame;
use crate::seed;

/// A linear sub-Nyquist sampler mapping `N` Nyquist samples to `M` outputs.
pub trait SensingOperator {
    fn m(&self) -> usize;
    fn n(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    fn to_dense(&self) -> CMatrix;
}

/// `Φ = S`: `M` distinct rows of the `N × N` identity, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct MeasurementMatrix {
    n: usize,
    rows: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    m: usize,
    n: usize,
    rows: Vec<usize>,
}

impl TryFrom<MatrixDoc> for MeasurementMatrix {
    type Error = crate::Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        if doc.rows.len() != doc.m {
            return Err(invalid(format!(
                "m = {} but {} rows listed",
                doc.m,
                doc.rows.len()
            )));
        }
        MeasurementMatrix::from_rows(doc.n, doc.rows)
    }
}

impl From<MeasurementMatrix> for MatrixDoc {
    fn from(p: MeasurementMatrix) -> Self {
        MatrixDoc {
            m: p.rows.len(),
            n: p.n,
            rows: p.rows,
        }
    }
}

impl MeasurementMatrix {
    /// Wraps an explicit row selection; rows must be strictly increasing and `< n`.
    pub fn from_rows(n: usize, rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || rows.len() > n {
            return Err(invalid(format!(
                "need 1 <= m <= n, got m = {}, n = {n}",
                rows.len()
            )));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("selected rows must be strictly increasing"));
        }
        if rows[rows.len() - 1] >= n {
            return Err(invalid(format!(
                "row index {} out of range for n = {n}",
                rows[rows.len() - 1]
            )));
        }
        Ok(Self { n, rows })
    }

    pub fn selected_rows(&self) -> &[usize] {
        &self.rows
    }
}

impl SensingOperator for MeasurementMatrix {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return Err(shape(
                format!("frame of length {}", self.n),
                format!("length {}", x.len()),
            ));
        }
        Ok(self.rows.iter().map(|&r| x[r]).collect())
    }

    fn to_dense(&self) -> CMatrix {
        let mut phi = DMatrix::from_element(self.rows.len(), self.n, Complex64::new(0.0, 0.0));
        for (i, &r) in self.rows.iter().enumerate() {
            phi[(i, r)] = Complex64::new(1.0, 0.0);
        }
        phi
    }
}

/// Number of kept samples for a sub-sampling rate: `round(rate · n)` clipped to `[1, n]`.
pub fn m_from_rate(rate: f64, n: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(invalid(format!("sub-sampling rate {rate} outside (0, 1]")));
    }
    Ok(((rate * n as f64).round() as usize).clamp(1, n))
}

/// Picks `m` of `n` rows uniformly without replacement.
pub fn make_subsampling_matrix(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    if m == 0 || m > n {
        return Err(invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, m).into_vec();
    rows.sort_unstable();
    Ok(MeasurementMatrix { n, rows })
}

/// `M` sub-Nyquist samples of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressiveFrame {
    pub index: usize,
    pub samples: Vec<Complex64>,
}

impl AsRef<[Complex64]> for CompressiveFrame {
    fn as_ref(&self) -> &[Complex64] {
        &self.samples
    }
}

pub fn compress_frame(phi: &impl SensingOperator, x: &NyquistFrame) -> Result<CompressiveFrame> {
    Ok(CompressiveFrame {
        index: x.index,
        samples: phi.apply(&x.samples)?,
    })
}
