//! Release-gate checks run by `cwss selftest`.
//!
//! The TV builder is injected so a deliberately broken operator can be fed
//! through the same gate and shown to fail it.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correlate::{build_stacked_operator, AutocorrVector, DictionaryBundle, LinkMatrix};
use crate::error::Result;
use crate::linalg::{lift, lift_matrix, norm2, CMatrix, RMatrix};
use crate::oracle::link_matrix_entrywise;
use crate::sampling::{make_subsampling_matrix, SensingOperator};
use crate::seed::rng;
use crate::solve::{l0_oracle, solve_lasso_cwss, support, RealOperator, SolverConfig};
use crate::tvops::{
    build_tv_operator, total_variation_operator_norm, total_variation_sum, TvOperator,
};

pub type TvBuilder = fn(usize, usize) -> Result<TvOperator>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status}  {:width$}  {}", c.name, c.detail);
        }
        out
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn gaussian_complex(rows: usize, cols: usize, r: &mut impl Rng) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(r);
        let im: f64 = StandardNormal.sample(r);
        Complex64::new(re, im)
    })
}

/// Block assembly of `A` against the entrywise construction: exact on
/// random row-subsampling matrices, to rounding on dense complex `Φ`.
pub fn link_oracle_check(pairs: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut exact = 0;
    let mut worst_dense = 0.0f64;
    for _ in 0..pairs {
        let n = r.random_range(1..=32);
        let m = r.random_range(1..=n);
        let phi = make_subsampling_matrix(m, n, r.random())
            .expect("valid sizes")
            .to_dense();
        if LinkMatrix::build(&phi).matrix() == &link_matrix_entrywise(&phi) {
            exact += 1;
        }
        let dense = gaussian_complex(m, n, &mut r);
        let a = LinkMatrix::build(&dense);
        let b = link_matrix_entrywise(&dense);
        worst_dense = worst_dense.max((a.matrix() - &b).norm() / b.norm().max(1.0));
    }
    check(
        "link matrix oracle",
        exact == pairs && worst_dense < 1e-12,
        format!("{exact}/{pairs} exact on subsampling, dense rel diff {worst_dense:.1e}"),
    )
}

/// Random integer-valued `2N × T` matrix, zero on the first and last bins and
/// on the last period. Integer entries keep both sums exact.
pub fn random_interior_matrix(n2: usize, t: usize, r: &mut impl Rng) -> RMatrix {
    RMatrix::from_fn(n2, t, |i, j| {
        if i == 0 || i + 1 == n2 || j + 1 == t {
            0.0
        } else {
            r.random_range(-8i32..=8) as f64
        }
    })
}

/// `‖V vec(P)‖₁` against the neighbour sum on interior-supported inputs.
pub fn tv_equivalence_check(builder: TvBuilder, per_shape: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut mismatches = 0;
    let mut total = 0;
    for (n2, t) in [(8, 2), (16, 4)] {
        let Ok(v) = builder(n2, t) else {
            return check(
                "tv operator equivalence",
                false,
                format!("builder failed at ({n2}, {t})"),
            );
        };
        let zero = vec![0.0; n2 * t];
        if total_variation_operator_norm(&v, &zero).ok() != Some(0.0)
            || total_variation_sum(&RMatrix::zeros(n2, t)) != 0.0
        {
            mismatches += 1;
        }
        for _ in 0..per_shape {
            let p = random_interior_matrix(n2, t, &mut r);
            total += 1;
            match total_variation_operator_norm(&v, p.as_slice()) {
                Ok(x) if x == total_variation_sum(&p) => {}
                _ => mismatches += 1,
            }
        }
    }
    check(
        "tv operator equivalence",
        mismatches == 0,
        format!(
            "{} of {total} interior inputs agree exactly",
            total - mismatches.min(total)
        ),
    )
}

/// One noiseless sparse-recovery instance on a `2N = 16` grid.
pub struct SparseInstance {
    pub bundle: DictionaryBundle,
    pub lifted: RMatrix,
    pub p0: Vec<f64>,
    pub r_y: AutocorrVector,
}

/// `N = 8`, `M` drawn from `5..=8` (so `r_y` has at least 10 entries), two
/// occupied bins with levels in `[0.5, 1)`.
pub fn sparse_instance(seed: u64) -> SparseInstance {
    let mut r = rng(seed);
    let n = 8;
    let m = r.random_range(5..=n);
    let phi = make_subsampling_matrix(m, n, r.random()).expect("valid sizes");
    let bundle = DictionaryBundle::for_measurement(&phi).expect("valid sampler");
    let mut p0 = vec![0.0; 2 * n];
    for b in rand::seq::index::sample(&mut r, 2 * n, 2) {
        p0[b] = r.random_range(0.5..1.0);
    }
    let r_y = bundle.apply(&p0).expect("matching length");
    let lifted = lift_matrix(&bundle.d);
    SparseInstance {
        bundle,
        lifted,
        p0,
        r_y,
    }
}

/// Whether LASSO and the exhaustive search pick the same support.
pub fn l0_lasso_agree(inst: &SparseInstance) -> Result<bool> {
    let b = lift(inst.r_y.values());
    let tol = 1e-9 * norm2(&b);
    let l0 = l0_oracle(&inst.lifted, &b, 2, tol)?;
    let cfg = SolverConfig {
        mu_factor: 1e-6,
        ..SolverConfig::default()
    };
    let lasso = solve_lasso_cwss(&inst.bundle, &inst.r_y, &cfg)?;
    Ok(lasso.converged && support(&lasso.p_hat, 1e-3) == l0.support)
}

pub fn l0_lasso_check(instances: usize, seed: u64) -> Check {
    let agree = (0..instances)
        .filter(|&i| l0_lasso_agree(&sparse_instance(seed.wrapping_add(i as u64))).unwrap_or(false))
        .count();
    check(
        "l0 vs lasso support",
        agree as f64 >= 0.95 * instances as f64,
        format!("{agree}/{instances} agree (need 95%)"),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨Bx, y⟩ = ⟨x, Bᴴy⟩` for the stacked dictionary (complex and lifted) and
/// `⟨Vx, y⟩ = ⟨x, Vᵀy⟩` for the TV operator.
pub fn adjoint_check(builder: TvBuilder, seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (rows, cols, t) = (
            r.random_range(2..10),
            r.random_range(2..12),
            r.random_range(1..4),
        );
        let d = gaussian_complex(rows, cols, &mut r);
        let op = build_stacked_operator(&d, t).expect("valid sizes");
        let x: Vec<Complex64> = gaussian_complex(cols * t, 1, &mut r).as_slice().to_vec();
        let y: Vec<Complex64> = gaussian_complex(rows * t, 1, &mut r).as_slice().to_vec();
        let bx = op.apply(&x).expect("length");
        let bty = op.apply_adjoint(&y).expect("length");
        let lhs: Complex64 = bx.iter().zip(&y).map(|(a, b)| b.conj() * a).sum();
        let rhs: Complex64 = x.iter().zip(&bty).map(|(a, b)| b.conj() * a).sum();
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));

        let xr: Vec<f64> = (0..cols * t)
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        let yr: Vec<f64> = (0..RealOperator::nrows(&op))
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        let mut bt = vec![0.0; cols * t];
        op.apply_transpose_into(&yr, &mut bt);
        let a = dot(&RealOperator::apply(&op, &xr), &yr);
        worst = worst.max((a - dot(&xr, &bt)).abs() / a.abs().max(1.0));

        let n2 = 2 * r.random_range(1..6);
        let Ok(v) = builder(n2, t) else {
            return check("adjoint identities", false, "tv builder failed".into());
        };
        let xv: Vec<f64> = (0..n2 * t).map(|_| StandardNormal.sample(&mut r)).collect();
        let yv: Vec<f64> = (0..v.nrows())
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        let (Ok(vx), Ok(vty)) = (v.apply(&xv), v.apply_transpose(&yv)) else {
            return check("adjoint identities", false, "tv shapes inconsistent".into());
        };
        let a = dot(&vx, &yv);
        worst = worst.max((a - dot(&xv, &vty)).abs() / a.abs().max(1.0));
    }
    check(
        "adjoint identities",
        worst < 1e-12,
        format!("worst rel defect {worst:.1e}"),
    )
}

pub fn run_selftest() -> SelftestReport {
    run_selftest_with(build_tv_operator)
}

pub fn run_selftest_with(tv_builder: TvBuilder) -> SelftestReport {
    let start = Instant::now();
    let checks = vec![
        link_oracle_check(50, 1),
        tv_equivalence_check(tv_builder, 100, 2),
        l0_lasso_check(100, 3),
        adjoint_check(tv_builder, 4),
    ];
    SelftestReport {
        checks,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tvops::TvRow;

    #[test]
    fn fresh_build_passes() {
        let r = run_selftest();
        assert!(r.passed(), "{}", r.table());
        assert_eq!(r.checks.len(), 4);
    }

    fn flipped_partner(n2: usize, t: usize) -> Result<TvOperator> {
        let v = build_tv_operator(n2, t)?;
        let mut rows: Vec<TvRow> = v.rows().to_vec();
        // a frequency-difference row whose partner is an interior bin
        let row = &mut rows[n2 / 2];
        row.partner = row.partner.map(|(c, x)| (c, -x));
        TvOperator::from_rows(n2, t, rows)
    }

    fn dropped_row(n2: usize, t: usize) -> Result<TvOperator> {
        let v = build_tv_operator(n2, t)?;
        let mut rows: Vec<TvRow> = v.rows().to_vec();
        let mid = rows.len() / 2 + 1;
        rows[mid].partner = None;
        TvOperator::from_rows(n2, t, rows)
    }

    #[test]
    fn corrupted_tv_builder_is_caught() {
        for builder in [flipped_partner as TvBuilder, dropped_row] {
            let c = tv_equivalence_check(builder, 100, 2);
            assert!(!c.passed, "{}", c.detail);
        }
        let r = run_selftest_with(flipped_partner);
        assert_eq!(r.failures(), vec!["tv operator equivalence"]);
    }

    #[test]
    fn table_lists_every_check() {
        let r = SelftestReport {
            checks: vec![
                check("a", true, "ok".into()),
                check("bb", false, "bad".into()),
            ],
            elapsed_s: 0.0,
        };
        assert_eq!(r.table(), "PASS  a   ok\nFAIL  bb  bad\n");
        assert!(!r.passed());
    }
}
