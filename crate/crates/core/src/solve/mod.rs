//! Constrained-ℓ1 recovery.
//!
//! Both recovery programs share one engine,
//!
//! ```text
//! minimize ‖W p‖₁   subject to   ‖b − B p‖₂ ≤ μ
//! ```
//!
//! over real `p`, with `W = I` for LASSO and `W = V` (the difference
//! operator of [`crate::tvops`]) for total-variation recovery. Complex
//! dictionaries and measurements are lifted to the stacked real system
//! `[Re; Im]`.

mod admm;
mod bounds;
mod l0;
mod rip;

pub use admm::solve_constrained_l1;
pub use bounds::{measurement_bounds, BoundsReport};
pub use l0::{l0_oracle, L0Solution};
pub use rip::rip_probe;

use nalgebra::{DVectorView, DVectorViewMut, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlate::{AutocorrVector, DictionaryBundle, StackedOperator};
use crate::error::{invalid, shape, Result};
use crate::linalg::{lift, CMatrix, RMatrix};
use crate::tvops::TvOperator;

/// Real linear map `B` as seen by the solver.
pub trait RealOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]);
    /// `BᵀB`.
    fn gram(&self) -> RMatrix;
    /// Minimum-norm least-squares solution of `B x ≈ b`.
    fn min_norm_solution(&self, b: &[f64]) -> Vec<f64>;

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows()];
        self.apply_into(x, &mut out);
        out
    }
}

fn svd_solve(m: &RMatrix, b: &[f64]) -> Vec<f64> {
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.max();
    let rhs = nalgebra::DVector::from_column_slice(b);
    svd.solve(&rhs, smax * 1e-12)
        .map(|x| x.as_slice().to_vec())
        .unwrap_or_else(|_| vec![0.0; m.ncols()])
}

impl RealOperator for RMatrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let x = DVectorView::from_slice(x, self.ncols());
        let mut o = DVectorViewMut::from_slice(out, self.nrows());
        o.gemv(1.0, self, &x, 0.0);
    }

    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let y = DVectorView::from_slice(y, self.nrows());
        let mut o = DVectorViewMut::from_slice(out, self.ncols());
        o.gemv_tr(1.0, self, &y, 0.0);
    }

    fn gram(&self) -> RMatrix {
        self.tr_mul(self)
    }

    fn min_norm_solution(&self, b: &[f64]) -> Vec<f64> {
        svd_solve(self, b)
    }
}

/// Lifted layout: period `t` occupies rows `[2R t, 2R (t+1))`, real parts first.
impl RealOperator for StackedOperator {
    fn nrows(&self) -> usize {
        2 * self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let blk = self.lifted_block();
        let (r, c) = blk.shape();
        for t in 0..self.periods() {
            let xv = DVectorView::from_slice(&x[t * c..(t + 1) * c], c);
            let mut o = DVectorViewMut::from_slice(&mut out[t * r..(t + 1) * r], r);
            o.gemv(1.0, blk, &xv, 0.0);
        }
    }

    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let blk = self.lifted_block();
        let (r, c) = blk.shape();
        for t in 0..self.periods() {
            let yv = DVectorView::from_slice(&y[t * r..(t + 1) * r], r);
            let mut o = DVectorViewMut::from_slice(&mut out[t * c..(t + 1) * c], c);
            o.gemv_tr(1.0, blk, &yv, 0.0);
        }
    }

    fn gram(&self) -> RMatrix {
        let blk = self.lifted_block();
        let g = blk.tr_mul(blk);
        let c = blk.ncols();
        let mut out = RMatrix::zeros(self.cols(), self.cols());
        for t in 0..self.periods() {
            out.view_mut((t * c, t * c), (c, c)).copy_from(&g);
        }
        out
    }

    fn min_norm_solution(&self, b: &[f64]) -> Vec<f64> {
        let blk = self.lifted_block();
        let (r, c) = blk.shape();
        let svd = SVD::new(blk.clone(), true, true);
        let eps = svd.singular_values.max() * 1e-12;
        let mut out = Vec::with_capacity(self.cols());
        for t in 0..self.periods() {
            let rhs = nalgebra::DVector::from_column_slice(&b[t * r..(t + 1) * r]);
            match svd.solve(&rhs, eps) {
                Ok(x) => out.extend(x.iter().copied()),
                Err(_) => out.extend(std::iter::repeat_n(0.0, c)),
            }
        }
        out
    }
}

/// The analysis operator `W` in `‖W p‖₁`.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    Identity,
    TotalVariation(&'a TvOperator),
}

/// Settings for [`solve_constrained_l1`] and the two recovery programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Absolute residual-ball radius. When unset the radius is
    /// `mu_factor · ‖b‖₂`.
    pub mu: Option<f64>,
    pub mu_factor: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Initial ADMM penalty.
    pub penalty_rho: f64,
    /// Rebalance the penalty when primal and dual residuals drift apart.
    pub adaptive_rho: bool,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    pub nonneg_constraint: bool,
    pub constraint_slack_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: None,
            mu_factor: 0.05,
            max_iter: 10_000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            penalty_rho: 1.0,
            adaptive_rho: true,
            relaxation: 1.6,
            nonneg_constraint: false,
            constraint_slack_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(invalid(format!("mu = {mu} must be finite and >= 0")));
            }
        }
        if !(self.mu_factor >= 0.0 && self.mu_factor.is_finite()) {
            return Err(invalid(format!(
                "mu_factor = {} must be finite and >= 0",
                self.mu_factor
            )));
        }
        for (name, v) in [
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("penalty_rho", self.penalty_rho),
            ("constraint_slack_tol", self.constraint_slack_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(invalid(format!(
                "relaxation = {} must lie in (0, 2)",
                self.relaxation
            )));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    /// Radius for a measurement of norm `b_norm`.
    pub fn radius(&self, b_norm: f64) -> f64 {
        self.mu.unwrap_or(self.mu_factor * b_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Column-major `2N × periods` estimate (a single column for LASSO).
    pub p_hat: Vec<f64>,
    pub periods: usize,
    pub iterations: usize,
    /// Relative ADMM residuals at exit.
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖W p̂‖₁`.
    pub objective: f64,
    /// `‖b − B p̂‖₂` and the radius it is held to.
    pub constraint_residual: f64,
    pub mu: f64,
    pub converged: bool,
}

impl SolveResult {
    pub fn column(&self, t: usize) -> &[f64] {
        let len = self.p_hat.len() / self.periods;
        &self.p_hat[t * len..(t + 1) * len]
    }

    pub fn last_column(&self) -> &[f64] {
        self.column(self.periods - 1)
    }
}

/// Lifts a complex dictionary and measurement and solves the real program.
pub fn solve_constrained_l1_complex(
    d: &CMatrix,
    penalty: Penalty<'_>,
    b: &[Complex64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    if b.len() != d.nrows() {
        return Err(shape(
            format!("measurement of length {}", d.nrows()),
            b.len(),
        ));
    }
    solve_constrained_l1(&crate::linalg::lift_matrix(d), penalty, &lift(b), config)
}

/// LASSO recovery: `min ‖p‖₁ s.t. ‖r_y − D p‖₂ ≤ μ`.
pub fn solve_lasso_cwss(
    bundle: &DictionaryBundle,
    r_y: &AutocorrVector,
    config: &SolverConfig,
) -> Result<SolveResult> {
    if r_y.values().len() != bundle.d.nrows() {
        return Err(shape(
            format!("r_y of length {}", bundle.d.nrows()),
            r_y.values().len(),
        ));
    }
    let op = crate::correlate::build_stacked_operator(&bundle.d, 1)?;
    solve_constrained_l1(&op, Penalty::Identity, &lift(r_y.values()), config)
}

/// Total-variation recovery over `T` periods:
/// `min ‖V vec(P)‖₁ s.t. ‖vec(R) − B vec(P)‖₂ ≤ μ`.
///
/// `r_stack` is the column-major stack of the `T` compressive
/// autocorrelation vectors (see [`crate::correlate::stack_autocorr`]).
pub fn solve_tvm_cwss(
    bundle: &DictionaryBundle,
    v: &TvOperator,
    r_stack: &[Complex64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    let (rows, cols) = bundle.d.shape();
    let t = v.periods();
    if v.n2() != cols {
        return Err(shape(format!("TV operator over {cols} bins"), v.n2()));
    }
    if r_stack.len() != rows * t {
        return Err(shape(
            format!("stacked measurement of length {}", rows * t),
            r_stack.len(),
        ));
    }
    let op = crate::correlate::build_stacked_operator(&bundle.d, t)?;
    let lifted: Vec<f64> = r_stack.chunks(rows).flat_map(lift).collect();
    solve_constrained_l1(&op, Penalty::TotalVariation(v), &lifted, config)
}

/// Indices with `|p_i| > rel_tol · max|p|`.
pub fn support(p: &[f64], rel_tol: f64) -> Vec<usize> {
    let peak = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return Vec::new();
    }
    p.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > rel_tol * peak)
        .map(|(i, _)| i)
        .collect()
}
