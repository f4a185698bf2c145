//! Over-relaxed scaled-form ADMM for `min ‖W p‖₁ s.t. ‖b − B p‖₂ ≤ μ`.
//!
//! Splitting: `z = W p` (soft threshold), `u = B p − b` (projection onto the
//! μ-ball) and, optionally, `w = p` (projection onto `p ≥ 0`). All blocks
//! share one penalty, so the `p`-update matrix `WᵀW + BᵀB (+ I)` does not
//! depend on ρ and is factored once.
//!
//! The problem is normalized before iterating (`‖b‖ = 1`, largest column of
//! `B` of unit norm) and the iterate is rescaled afterwards. The returned
//! point is then pushed onto the feasible set by a convex combination with
//! the least-squares solution, which keeps the ball constraint exact up to
//! rounding.

use nalgebra::{Cholesky, DVector};

use super::{Penalty, RealOperator, SolveResult, SolverConfig};
use crate::error::{shape, Result};
use crate::linalg::{norm1, norm2, RMatrix};

/// Absolute feasibility floor, relative to `‖b‖`, that covers `μ = 0`.
const FEASIBILITY_FLOOR: f64 = 1e-12;
const CHECK_EVERY: usize = 5;

fn soft(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}

fn project_ball(v: &mut [f64], radius: f64) {
    let n = norm2(v);
    if n > radius {
        let s = if n > 0.0 { radius / n } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }
}

struct Analysis<'a> {
    penalty: Penalty<'a>,
    n: usize,
}

impl Analysis<'_> {
    fn rows(&self) -> usize {
        match self.penalty {
            Penalty::Identity => self.n,
            Penalty::TotalVariation(v) => v.nrows(),
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self.penalty {
            Penalty::Identity => out.copy_from_slice(x),
            Penalty::TotalVariation(v) => v.apply_into(x, out),
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        match self.penalty {
            Penalty::Identity => out.copy_from_slice(y),
            Penalty::TotalVariation(v) => v.apply_transpose_into(y, out),
        }
    }

    fn gram(&self) -> RMatrix {
        match self.penalty {
            Penalty::Identity => RMatrix::identity(self.n, self.n),
            Penalty::TotalVariation(v) => v.gram(),
        }
    }
}

fn finish(
    p_hat: Vec<f64>,
    periods: usize,
    analysis: &Analysis<'_>,
    op: &impl RealOperator,
    b: &[f64],
    mu: f64,
    iterations: usize,
    residuals: (f64, f64),
    converged: bool,
) -> SolveResult {
    let mut wp = vec![0.0; analysis.rows()];
    analysis.apply(&p_hat, &mut wp);
    let bp = op.apply(&p_hat);
    let resid: Vec<f64> = b.iter().zip(&bp).map(|(x, y)| x - y).collect();
    SolveResult {
        objective: norm1(&wp),
        constraint_residual: norm2(&resid),
        p_hat,
        periods,
        iterations,
        primal_residual: residuals.0,
        dual_residual: residuals.1,
        mu,
        converged,
    }
}

/// Solves `min ‖W p‖₁ s.t. ‖b − B p‖₂ ≤ μ` with `μ` from `config`.
///
/// Non-convergence within `max_iter`, or an empty feasible set, is reported
/// through `converged = false`; the returned point is still the best
/// available estimate.
pub fn solve_constrained_l1(
    op: &impl RealOperator,
    penalty: Penalty<'_>,
    b: &[f64],
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    let (m, n) = (op.nrows(), op.ncols());
    if b.len() != m {
        return Err(shape(format!("measurement of length {m}"), b.len()));
    }
    if let Penalty::TotalVariation(v) = penalty {
        if v.ncols() != n {
            return Err(shape(format!("TV operator with {n} columns"), v.ncols()));
        }
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(crate::error::invalid(
            "measurement contains non-finite values",
        ));
    }
    let periods = match penalty {
        Penalty::TotalVariation(v) => v.periods(),
        Penalty::Identity => 1,
    };
    let analysis = Analysis { penalty, n };
    let b_norm = norm2(b);
    let mu = config.radius(b_norm);

    // zero is feasible with objective zero
    if b_norm <= mu {
        return Ok(finish(
            vec![0.0; n],
            periods,
            &analysis,
            op,
            b,
            mu,
            0,
            (0.0, 0.0),
            true,
        ));
    }

    let gram = op.gram();
    let col_scale = (0..n).map(|j| gram[(j, j)]).fold(0.0f64, f64::max).sqrt();
    if col_scale == 0.0 {
        // B = 0 and b lies outside the ball: infeasible
        return Ok(finish(
            vec![0.0; n],
            periods,
            &analysis,
            op,
            b,
            mu,
            0,
            (f64::INFINITY, 0.0),
            false,
        ));
    }

    // normalized problem in q = c p / ‖b‖: ‖b' − B' q‖ ≤ μ', B' = B / c, b' = b / ‖b‖
    let bn: Vec<f64> = b.iter().map(|x| x / b_norm).collect();
    let mu_n = mu / b_norm;
    let inv_c = 1.0 / col_scale;

    let mut k = analysis.gram() + gram * (inv_c * inv_c);
    if config.nonneg_constraint {
        for i in 0..n {
            k[(i, i)] += 1.0;
        }
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        crate::error::invalid(
            "p-update matrix is singular; the penalty and operator share a null space",
        )
    })?;

    let kw = analysis.rows();
    let alpha = config.relaxation;
    let mut rho = config.penalty_rho;

    let mut q = vec![0.0; n];
    let mut z = vec![0.0; kw];
    let mut lam = vec![0.0; kw];
    let mut u = vec![0.0; m];
    let mut nu = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut kap = vec![0.0; n];

    let mut wq = vec![0.0; kw];
    let mut bq = vec![0.0; m];
    let mut tmp_m = vec![0.0; m];
    let mut tmp_kw = vec![0.0; kw];
    let mut tmp_n = vec![0.0; n];
    let mut rhs = DVector::zeros(n);
    let mut z_prev = vec![0.0; kw];
    let mut u_prev = vec![0.0; m];
    let mut w_prev = vec![0.0; n];

    let mut residuals = (f64::INFINITY, f64::INFINITY);
    let mut admm_converged = false;
    let mut iterations = 0;

    for it in 1..=config.max_iter {
        iterations = it;
        let check = it % CHECK_EVERY == 0 || it == config.max_iter;

        // q-update
        for i in 0..kw {
            tmp_kw[i] = z[i] - lam[i];
        }
        analysis.apply_transpose(&tmp_kw, rhs.as_mut_slice());
        for i in 0..m {
            tmp_m[i] = (u[i] + bn[i] - nu[i]) * inv_c;
        }
        op.apply_transpose_into(&tmp_m, &mut tmp_n);
        for i in 0..n {
            rhs[i] += tmp_n[i];
            if config.nonneg_constraint {
                rhs[i] += w[i] - kap[i];
            }
        }
        chol.solve_mut(&mut rhs);
        q.copy_from_slice(rhs.as_slice());

        analysis.apply(&q, &mut wq);
        op.apply_into(&q, &mut bq);
        bq.iter_mut().for_each(|x| *x *= inv_c);

        if check {
            z_prev.copy_from_slice(&z);
            u_prev.copy_from_slice(&u);
            w_prev.copy_from_slice(&w);
        }

        // z-update
        let thresh = 1.0 / rho;
        for i in 0..kw {
            let hz = alpha * wq[i] + (1.0 - alpha) * z[i];
            let v = hz + lam[i];
            z[i] = soft(v, thresh);
            lam[i] = v - z[i];
        }
        // u-update
        for i in 0..m {
            let hu = alpha * bq[i] + (1.0 - alpha) * (u[i] + bn[i]);
            tmp_m[i] = hu - bn[i] + nu[i];
        }
        let mut u_new = tmp_m.clone();
        project_ball(&mut u_new, mu_n);
        for i in 0..m {
            nu[i] = tmp_m[i] - u_new[i];
        }
        u = u_new;
        // w-update
        if config.nonneg_constraint {
            for i in 0..n {
                let hw = alpha * q[i] + (1.0 - alpha) * w[i];
                let v = hw + kap[i];
                w[i] = v.max(0.0);
                kap[i] = v - w[i];
            }
        }

        if !check {
            continue;
        }

        let mut prim = 0.0;
        let mut ax = 0.0;
        let mut bz = 0.0;
        for i in 0..kw {
            prim += (wq[i] - z[i]).powi(2);
            ax += wq[i] * wq[i];
            bz += z[i] * z[i];
        }
        for i in 0..m {
            prim += (bq[i] - u[i] - bn[i]).powi(2);
            ax += bq[i] * bq[i];
            bz += (u[i] + bn[i]).powi(2);
        }
        if config.nonneg_constraint {
            for i in 0..n {
                prim += (q[i] - w[i]).powi(2);
                ax += q[i] * q[i];
                bz += w[i] * w[i];
            }
        }

        // dual residual ‖Wᵀ Δz + B'ᵀ Δu + Δw‖ relative to the largest of
        // ‖Wᵀλ‖, ‖B'ᵀν‖, ‖κ‖ (their sum vanishes at the optimum)
        let terms = |dz: &[f64], du: &[f64], dw: &[f64]| {
            let mut a = vec![0.0; n];
            analysis.apply_transpose(dz, &mut a);
            let du_s: Vec<f64> = du.iter().map(|x| x * inv_c).collect();
            let mut bt = vec![0.0; n];
            op.apply_transpose_into(&du_s, &mut bt);
            let dw = if config.nonneg_constraint {
                dw.to_vec()
            } else {
                vec![0.0; n]
            };
            (a, bt, dw)
        };
        let dz: Vec<f64> = z.iter().zip(&z_prev).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = u.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
        let dw: Vec<f64> = w.iter().zip(&w_prev).map(|(a, b)| a - b).collect();
        let (a, bt, cw) = terms(&dz, &du, &dw);
        let dual_v: Vec<f64> = (0..n).map(|i| a[i] + bt[i] + cw[i]).collect();
        let (a, bt, cw) = terms(&lam, &nu, &kap);
        let dual_scale = norm2(&a).max(norm2(&bt)).max(norm2(&cw));

        let rel_prim = prim.sqrt() / ax.sqrt().max(bz.sqrt()).max(f64::MIN_POSITIVE);
        // duals are scaled by 1/ρ, so ρ cancels in the ratio
        let rel_dual = norm2(&dual_v) / dual_scale.max(f64::MIN_POSITIVE);
        residuals = (rel_prim, rel_dual);
        if rel_prim <= config.primal_tol && rel_dual <= config.dual_tol {
            admm_converged = true;
            break;
        }

        if config.adaptive_rho && it % (4 * CHECK_EVERY) == 0 {
            let factor = if rel_prim > 10.0 * rel_dual {
                2.0
            } else if rel_dual > 10.0 * rel_prim {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                let s = 1.0 / factor;
                lam.iter_mut().for_each(|x| *x *= s);
                nu.iter_mut().for_each(|x| *x *= s);
                kap.iter_mut().for_each(|x| *x *= s);
            }
        }
    }

    if config.nonneg_constraint {
        q.copy_from_slice(&w);
    }

    // Feasibility restoration: step along δ = B'⁺ r, r = b' − B'q, with the
    // smallest θ for which ‖r − θ B'δ‖ reaches the target radius. The step
    // is as small as the residual excess, so sparsity is kept. It is
    // repeated because B'⁺ is inexact on ill-conditioned operators and
    // because clipping (sign constraint) undoes part of it.
    let allowed = mu_n * (1.0 + config.constraint_slack_tol) + FEASIBILITY_FLOOR;
    let target = mu_n + 0.5 * FEASIBILITY_FLOOR;
    let residual_of = |q: &[f64]| -> Vec<f64> {
        let bq = op.apply(q);
        bn.iter().zip(&bq).map(|(b, x)| b - x * inv_c).collect()
    };
    let mut r = residual_of(&q);
    let mut feasible = norm2(&r) <= allowed;
    let rounds = if config.nonneg_constraint { 8 } else { 4 };
    for _ in 0..rounds {
        if feasible {
            break;
        }
        let delta: Vec<f64> = op
            .min_norm_solution(&r)
            .iter()
            .map(|x| x * col_scale)
            .collect();
        let g: Vec<f64> = op.apply(&delta).iter().map(|x| x * inv_c).collect();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        let rg: f64 = r.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rr: f64 = r.iter().map(|x| x * x).sum();
        let disc = rg * rg - gg * (rr - target * target);
        if gg == 0.0 || rg <= 0.0 {
            break;
        }
        // closest point along the ray when the target is out of reach
        let theta = if disc >= 0.0 {
            (rg - disc.sqrt()) / gg
        } else {
            rg / gg
        };
        q.iter_mut().zip(&delta).for_each(|(a, d)| *a += theta * d);
        if config.nonneg_constraint {
            q.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        r = residual_of(&q);
        feasible = norm2(&r) <= allowed;
    }

    let p_hat: Vec<f64> = q.iter().map(|x| x * b_norm * inv_c).collect();
    Ok(finish(
        p_hat,
        periods,
        &analysis,
        op,
        b,
        mu,
        iterations,
        residuals,
        admm_converged && feasible,
    ))
}
