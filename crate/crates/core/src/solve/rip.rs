use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::linalg::RMatrix;
use crate::seed::rng;

/// Empirical lower bound on the restricted isometry constant `δ_s`.
///
/// Each trial draws a random column order and Gaussian coefficients; the
/// first `k` entries define a `k`-sparse unit vector for every `k ≤ s`.
/// The result is the largest `|‖A v‖₂² − 1|` seen. Since the candidates for
/// `s` include those for every smaller sparsity under the same seed, the
/// probe is nondecreasing in `s`. It never certifies RIP.
pub fn rip_probe(a: &RMatrix, s: usize, trials: usize, seed: u64) -> Result<f64> {
    let n = a.ncols();
    if s == 0 || s > n {
        return Err(invalid(format!("sparsity {s} must lie in 1..={n}")));
    }
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        order.shuffle(&mut r);
        let coeffs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let mut av = DVector::zeros(a.nrows());
        let mut norm_sq = 0.0;
        for k in 0..s {
            let j = order[k];
            av.axpy(coeffs[j], &a.column(j), 1.0);
            norm_sq += coeffs[j] * coeffs[j];
            if norm_sq == 0.0 {
                continue;
            }
            let gain = av.norm_squared() / norm_sq;
            worst = worst.max((gain - 1.0).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns() {
        let q = RMatrix::from_fn(10, 6, |i, j| ((i * 7 + j * 3) as f64).sin())
            .qr()
            .q();
        for s in 1..=6 {
            assert!(rip_probe(&q, s, 50, 3).unwrap() < 1e-10);
        }
    }

    #[test]
    fn zero_matrix() {
        let z = RMatrix::zeros(4, 8);
        assert_eq!(rip_probe(&z, 3, 10, 0).unwrap(), 1.0);
    }

    #[test]
    fn monotone_in_sparsity() {
        let mut r = rng(11);
        let a = RMatrix::from_fn(8, 16, |_, _| {
            let g: f64 = StandardNormal.sample(&mut r);
            g / 8f64.sqrt()
        });
        let vals: Vec<f64> = (1..=16)
            .map(|s| rip_probe(&a, s, 30, 42).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = RMatrix::identity(3, 3);
        assert!(rip_probe(&a, 0, 1, 0).is_err());
        assert!(rip_probe(&a, 4, 1, 0).is_err());
        assert!(rip_probe(&a, 2, 0, 0).is_err());
    }
}
