use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{norm2, RMatrix};

/// Largest column count the exhaustive search accepts.
pub const MAX_COLUMNS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    pub p: Vec<f64>,
    pub support: Vec<usize>,
    pub residual: f64,
}

/// Sparsest `p` with `‖b − D p‖₂ ≤ tol`, found by trying every support of
/// size `0..=max_support` in lexicographic order and fitting least squares
/// on each.
///
/// Among supports of the smallest feasible size the one with the smallest
/// residual wins; exact residual ties keep the lexicographically first.
pub fn l0_oracle(d: &RMatrix, b: &[f64], max_support: usize, tol: f64) -> Result<L0Solution> {
    let (m, n) = d.shape();
    if b.len() != m {
        return Err(shape(format!("measurement of length {m}"), b.len()));
    }
    if n > MAX_COLUMNS {
        return Err(invalid(format!(
            "{n} columns exceed the exhaustive limit of {MAX_COLUMNS}"
        )));
    }
    if !(tol >= 0.0) {
        return Err(invalid(format!("tol = {tol} must be >= 0")));
    }
    let bv = DVector::from_column_slice(b);
    let b_norm = norm2(b);
    if b_norm <= tol {
        return Ok(L0Solution {
            p: vec![0.0; n],
            support: Vec::new(),
            residual: b_norm,
        });
    }
    for size in 1..=max_support.min(n) {
        let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
        for cols in (0..n).combinations(size) {
            let sub = d.select_columns(&cols);
            let svd = sub.clone().svd(true, true);
            let eps = svd.singular_values.max() * 1e-12;
            let Ok(x) = svd.solve(&bv, eps) else { continue };
            let res = (&bv - &sub * &x).norm();
            if res <= tol && best.as_ref().is_none_or(|(r, _, _)| res < *r) {
                best = Some((res, cols, x));
            }
        }
        if let Some((residual, support, x)) = best {
            let mut p = vec![0.0; n];
            for (&j, &v) in support.iter().zip(x.iter()) {
                p[j] = v;
            }
            return Ok(L0Solution {
                p,
                support,
                residual,
            });
        }
    }
    Err(Error::NotFound { max_support, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_measurement() {
        let d = RMatrix::from_fn(3, 5, |i, j| (i + 2 * j) as f64);
        let s = l0_oracle(&d, &[0.0; 3], 2, 1e-9).unwrap();
        assert!(s.support.is_empty());
        assert!(s.p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_unit_vector() {
        let d = RMatrix::identity(6, 6);
        let mut b = vec![0.0; 6];
        b[3] = 1.0;
        let s = l0_oracle(&d, &b, 3, 1e-9).unwrap();
        assert_eq!(s.support, vec![3]);
        assert!(s.p.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    fn rank(m: &RMatrix) -> usize {
        let sv = m.clone().svd(false, false).singular_values;
        let tol = sv.max() * 1e-10;
        sv.iter().filter(|&&x| x > tol).count()
    }

    #[test]
    fn planted_two_sparse() {
        let mut hits = 0;
        let mut eligible = 0;
        for seed in 0..20 {
            let mut r = rng(seed);
            let d = RMatrix::from_fn(6, 12, |_, _| StandardNormal.sample(&mut r));
            let spark_ok = (0..12)
                .combinations(4)
                .all(|c| rank(&d.select_columns(&c)) == 4);
            if !spark_ok {
                continue;
            }
            eligible += 1;
            let mut p0 = vec![0.0; 12];
            p0[(seed as usize) % 12] = 1.5;
            p0[(seed as usize * 5 + 3) % 12] = -0.7;
            let b = d.clone() * DVector::from_column_slice(&p0);
            let s = l0_oracle(&d, b.as_slice(), 3, 1e-9).unwrap();
            let mut want: Vec<usize> = (0..12).filter(|&i| p0[i] != 0.0).collect();
            want.sort();
            if s.support == want {
                hits += 1;
            }
        }
        assert!(eligible > 10);
        assert_eq!(hits, eligible);
    }

    #[test]
    fn not_found_is_explicit() {
        let d = RMatrix::identity(4, 4);
        let err = l0_oracle(&d, &[1.0, 1.0, 1.0, 0.0], 2, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NotFound { max_support: 2, .. }));
    }

    #[test]
    fn rejects_wide_dictionaries() {
        let d = RMatrix::zeros(2, 21);
        assert!(l0_oracle(&d, &[0.0, 0.0], 1, 0.0).is_err());
    }
}
