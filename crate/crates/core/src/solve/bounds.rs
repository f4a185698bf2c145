use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sufficient measurement counts for LASSO and TV recovery over `t` periods.
///
/// `s` is the sparsity of one spectrum, `k` the number of occupied blocks,
/// `delta` the number of entries that change between periods and `c` the
/// unspecified universal constant. The ratio `m_tvm / m_lasso` does not
/// depend on `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub delta: usize,
    pub t: usize,
    pub c: f64,
    pub m_lasso: f64,
    pub m_tvm: f64,
    pub ratio: f64,
}

/// `m_lasso = T C S ln(n/S)`, `m_tvm = C ((T−1) Δ ln(n/Δ) + K ln(n/2K))`.
pub fn measurement_bounds(
    n: usize,
    s: usize,
    k: usize,
    delta: usize,
    t: usize,
    c: f64,
) -> Result<BoundsReport> {
    for (name, v) in [("n", n), ("s", s), ("k", k), ("delta", delta), ("t", t)] {
        if v == 0 {
            return Err(invalid(format!("{name} must be positive")));
        }
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("c = {c} must be positive and finite")));
    }
    if delta > s {
        return Err(invalid(format!("delta = {delta} exceeds s = {s}")));
    }
    if 2 * k > n {
        return Err(invalid(format!("2k = {} exceeds n = {n}", 2 * k)));
    }
    if s > n {
        return Err(invalid(format!("s = {s} exceeds n = {n}")));
    }
    let nf = n as f64;
    let m_lasso = t as f64 * c * s as f64 * (nf / s as f64).ln();
    let m_tvm = c
        * ((t - 1) as f64 * delta as f64 * (nf / delta as f64).ln()
            + k as f64 * (nf / (2 * k) as f64).ln());
    let ratio = if m_lasso > 0.0 {
        m_tvm / m_lasso
    } else {
        f64::NAN
    };
    Ok(BoundsReport {
        n,
        s,
        k,
        delta,
        t,
        c,
        m_lasso,
        m_tvm,
        ratio,
    })
}
