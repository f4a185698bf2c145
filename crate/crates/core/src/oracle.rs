//! Independent reference constructions used by the self-test and the test
//! suites. Nothing here shares code with the builders it checks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::CMatrix;

/// Builds `A` entry by entry from the Hankel/Toeplitz index rules, without
/// forming `Φ̄` or `Φ₁…Φ₄`.
pub fn link_matrix_entrywise(phi: &CMatrix) -> CMatrix {
    let (m, n) = phi.shape();
    let zero = Complex64::new(0.0, 0.0);
    let f = |k: usize| phi[(0, k)];
    let bar = |r: usize, k: usize| if r == 0 { zero } else { phi[(m - r, k)] };
    let h1 = |k: usize, c: usize| {
        if k + c >= n {
            f(k + c - n).conj()
        } else {
            zero
        }
    };
    let h2 = |k: usize, c: usize| if k + c < n { f(k + c).conj() } else { zero };
    let t3 = |k: usize, c: usize| if c > k { f(n - (c - k)) } else { zero };
    let t4 = |k: usize, c: usize| if k >= c { f(k - c) } else { zero };
    DMatrix::from_fn(2 * m, 2 * n, |r, c| {
        let mut acc = zero;
        for k in 0..n {
            acc += match (r < m, c < n) {
                (true, true) => bar(r, k) * h1(k, c),
                (true, false) => bar(r, k) * h2(k, c - n),
                (false, true) => phi[(r - m, k)] * t3(k, c),
                (false, false) => phi[(r - m, k)] * t4(k, c - n),
            };
        }
        acc
    })
}
