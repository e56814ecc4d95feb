//! Primal-dual interior-point solver over the block problem structure.
//!
//! Inequality rows receive slacks with box bounds; bounds on variables and
//! slacks enter through a logarithmic barrier whose multipliers are kept
//! explicitly (primal-dual). Each Newton step solves one symmetric
//! quasi-definite KKT system with the banded LDL^T factorization; a knot-major
//! interleaving of variables, slacks, and duals keeps the band narrow for
//! transcription problems. Inertia failures trigger a primal regularization
//! ladder. The solver is deterministic: no randomness, no wall clock.

use super::banded::{BandedLdl, FactorOutcome};
use super::eval::{block_jacobian, eval_objective};
use super::{IterationLog, NlpProblem, NlpSolution, SolveOptions, SolveStatus};
use crate::math::Ad;

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const MU_MIN: f64 = 1e-11;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;

struct RowInfo {
    block: usize,
    local_row: usize,
    lower: f64,
    upper: f64,
    /// Slack index when the row is an inequality.
    slack: Option<usize>,
}

struct Layout {
    n: usize,
    m: usize,
    m_ineq: usize,
    rows: Vec<RowInfo>,
    /// KKT position of each variable / slack / dual row.
    pos_x: Vec<usize>,
    pos_s: Vec<usize>,
    pos_y: Vec<usize>,
    bandwidth: usize,
    kkt_dim: usize,
}

fn build_layout(problem: &NlpProblem) -> Layout {
    let n = problem.n_vars;
    let mut rows = Vec::new();
    for (bi, b) in problem.blocks.iter().enumerate() {
        for r in 0..b.dim {
            rows.push(RowInfo {
                block: bi,
                local_row: r,
                lower: b.lower[r],
                upper: b.upper[r],
                slack: None,
            });
        }
    }
    let mut m_ineq = 0;
    for row in rows.iter_mut() {
        if row.lower < row.upper {
            row.slack = Some(m_ineq);
            m_ineq += 1;
        }
    }
    let m = rows.len();

    // Order KKT unknowns so each dual (and its slack) sits right after the
    // last variable its row touches; chain-structured problems become banded.
    #[derive(Clone, Copy)]
    struct Entity {
        key: usize,
        tie: usize,
        kind: u8, // 0 = x, 1 = s, 2 = y
        idx: usize,
    }
    let mut entities = Vec::with_capacity(n + m_ineq + m);
    for j in 0..n {
        entities.push(Entity {
            key: 2 * j,
            tie: 0,
            kind: 0,
            idx: j,
        });
    }
    for (r, row) in rows.iter().enumerate() {
        let maxvar = problem.blocks[row.block]
            .vars
            .iter()
            .copied()
            .max()
            .unwrap_or(0);
        let key = 2 * maxvar + 1;
        if let Some(si) = row.slack {
            entities.push(Entity {
                key,
                tie: 2 * r,
                kind: 1,
                idx: si,
            });
        }
        entities.push(Entity {
            key,
            tie: 2 * r + 1,
            kind: 2,
            idx: r,
        });
    }
    entities.sort_by_key(|e| (e.key, e.tie));
    let mut pos_x = vec![0; n];
    let mut pos_s = vec![0; m_ineq];
    let mut pos_y = vec![0; m];
    for (pos, e) in entities.iter().enumerate() {
        match e.kind {
            0 => pos_x[e.idx] = pos,
            1 => pos_s[e.idx] = pos,
            _ => pos_y[e.idx] = pos,
        }
    }
    let kkt_dim = n + m_ineq + m;

    // Structural bandwidth: Hessian couples variables within one block;
    // Jacobian couples a row's dual with its variables and slack.
    let mut bw = 0usize;
    let coupled = |a: usize, b: usize| a.abs_diff(b);
    for t in problem.objective.iter() {
        for &vi in &t.vars {
            for &vj in &t.vars {
                bw = bw.max(coupled(pos_x[vi], pos_x[vj]));
            }
        }
    }
    let mut r0 = 0;
    for b in problem.blocks.iter() {
        for r in r0..r0 + b.dim {
            let py = pos_y[r];
            for &vi in &b.vars {
                bw = bw.max(coupled(py, pos_x[vi]));
                for &vj in &b.vars {
                    bw = bw.max(coupled(pos_x[vi], pos_x[vj]));
                }
            }
            if let Some(si) = rows[r].slack {
                bw = bw.max(coupled(py, pos_s[si]));
            }
        }
        r0 += b.dim;
    }
    Layout {
        n,
        m,
        m_ineq,
        rows,
        pos_x,
        pos_s,
        pos_y,
        bandwidth: bw,
        kkt_dim,
    }
}

/// Two-sided bound data for one primal entry (variable or slack).
#[derive(Clone, Copy)]
struct BoundPair {
    lower: f64,
    upper: f64,
}

struct State {
    /// Primal: variables then slacks.
    p: Vec<f64>,
    y: Vec<f64>,
    z_lo: Vec<f64>,
    z_up: Vec<f64>,
    bounds: Vec<BoundPair>,
}

impl State {
    fn x(&self, n: usize) -> &[f64] {
        &self.p[..n]
    }
}

fn interior_start(v: f64, b: &BoundPair) -> f64 {
    let kappa = 1e-2;
    let mut lo = f64::NEG_INFINITY;
    let mut up = f64::INFINITY;
    if b.lower.is_finite() && b.upper.is_finite() {
        let w = (b.upper - b.lower).min(1.0 + b.lower.abs()) * kappa;
        lo = b.lower + w.min(0.5 * (b.upper - b.lower));
        up = b.upper - w.min(0.5 * (b.upper - b.lower));
    } else if b.lower.is_finite() {
        lo = b.lower + kappa * (1.0 + b.lower.abs());
    } else if b.upper.is_finite() {
        up = b.upper - kappa * (1.0 + b.upper.abs());
    }
    v.clamp(lo, up)
}

struct Workspace {
    residuals: Vec<f64>,
    jac_blocks: Vec<Vec<Vec<f64>>>,
    grad: Vec<f64>,
    hess_blocks: Vec<Vec<Vec<f64>>>,
    hess_obj: Vec<Vec<Vec<f64>>>,
}

fn eval_all(problem: &NlpProblem, x: &[f64], ws: &mut Workspace) {
    let mut local = Vec::new();
    // residuals + jacobians
    ws.residuals.clear();
    for (bi, b) in problem.blocks.iter().enumerate() {
        local.clear();
        local.extend(b.vars.iter().map(|&j| x[j]));
        let start = ws.residuals.len();
        ws.residuals.resize(start + b.dim, 0.0);
        b.eval.eval_f64(&local, &mut ws.residuals[start..start + b.dim]);
        block_jacobian(b.eval.as_ref(), &local, b.dim, &mut ws.jac_blocks[bi]);
    }
    // gradient
    ws.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut jac1: Vec<Vec<f64>> = Vec::new();
    for t in &problem.objective {
        local.clear();
        local.extend(t.vars.iter().map(|&j| x[j]));
        block_jacobian(t.eval.as_ref(), &local, 1, &mut jac1);
        for (c, &j) in t.vars.iter().enumerate() {
            ws.grad[j] += jac1[0][c];
        }
    }
}

/// Local gradient of `sum_r w_r * c_r` for one block via a single AD pass.
fn weighted_block_gradient(
    eval: &dyn super::BlockEval,
    local: &[f64],
    weights: &[f64],
    out: &mut Vec<f64>,
) {
    let k = local.len();
    out.clear();
    out.resize(k, 0.0);
    let mut seeded: Vec<Ad> = local.iter().map(|&v| Ad::constant(v)).collect();
    let mut rows = vec![Ad::constant(0.0); weights.len()];
    let mut chunk0 = 0;
    while chunk0 < k {
        let chunk = (k - chunk0).min(crate::math::AD_LANES);
        for (lane, j) in (chunk0..chunk0 + chunk).enumerate() {
            seeded[j] = Ad::variable(local[j], lane);
        }
        for r in rows.iter_mut() {
            *r = Ad::constant(0.0);
        }
        eval.eval_ad(&seeded, &mut rows);
        for (lane, j) in (chunk0..chunk0 + chunk).enumerate() {
            let mut acc = 0.0;
            for (r, w) in rows.iter().zip(weights) {
                acc += w * r.d[lane];
            }
            out[j] = acc;
        }
        for j in chunk0..chunk0 + chunk {
            seeded[j] = Ad::constant(local[j]);
        }
        chunk0 += chunk;
    }
}

/// Forward-difference Hessian of `sum_r w_r c_r` over the block locals,
/// symmetrized. Falls back to the exact value for affine blocks (zero).
fn block_hessian(
    eval: &dyn super::BlockEval,
    local: &mut Vec<f64>,
    weights: &[f64],
    hess: &mut Vec<Vec<f64>>,
) {
    let k = local.len();
    hess.clear();
    hess.resize(k, vec![0.0; k]);
    if weights.iter().all(|w| *w == 0.0) {
        return;
    }
    let mut g0 = Vec::new();
    weighted_block_gradient(eval, local, weights, &mut g0);
    let mut gp = Vec::new();
    for j in 0..k {
        let h = 1e-6 * (1.0 + local[j].abs());
        let keep = local[j];
        local[j] = keep + h;
        weighted_block_gradient(eval, local, weights, &mut gp);
        local[j] = keep;
        for i in 0..k {
            hess[i][j] = (gp[i] - g0[i]) / h;
        }
    }
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
}

fn true_violation(layout: &Layout, residuals: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for (r, row) in layout.rows.iter().enumerate() {
        let c = residuals[r];
        v = v.max(row.lower - c).max(c - row.upper);
    }
    v.max(0.0)
}

/// Interior-point solve of the problem. Deterministic for fixed inputs.
pub fn solve(problem: &NlpProblem, options: &SolveOptions) -> NlpSolution {
    if let Err(msg) = problem.validate() {
        return failed_solution(problem, SolveStatus::NumericalFailure, &msg);
    }
    let layout = build_layout(problem);
    let n = layout.n;
    let m = layout.m;
    let mi = layout.m_ineq;

    // Bounds for the stacked primal (variables, then slacks).
    let mut bounds = Vec::with_capacity(n + mi);
    for j in 0..n {
        bounds.push(BoundPair {
            lower: problem.x_lower[j],
            upper: problem.x_upper[j],
        });
    }
    for row in layout.rows.iter() {
        if row.slack.is_some() {
            bounds.push(BoundPair {
                lower: row.lower,
                upper: row.upper,
            });
        }
    }

    let mut ws = Workspace {
        residuals: Vec::new(),
        jac_blocks: vec![Vec::new(); problem.blocks.len()],
        grad: vec![0.0; n],
        hess_blocks: vec![Vec::new(); problem.blocks.len()],
        hess_obj: vec![Vec::new(); problem.objective.len()],
    };

    // Strictly interior start.
    let mut st = State {
        p: Vec::with_capacity(n + mi),
        y: vec![0.0; m],
        z_lo: Vec::new(),
        z_up: Vec::new(),
        bounds,
    };
    for j in 0..n {
        st.p.push(interior_start(problem.x0[j], &st.bounds[j]));
    }
    eval_all(problem, &st.p[..n].to_vec(), &mut ws);
    for (r, row) in layout.rows.iter().enumerate() {
        if row.slack.is_some() {
            let b = st.bounds[st.p.len()];
            st.p.push(interior_start(ws.residuals[r], &b));
        }
    }
    let mut mu = 0.1;
    st.z_lo = (0..n + mi)
        .map(|k| {
            if st.bounds[k].lower.is_finite() {
                mu / (st.p[k] - st.bounds[k].lower)
            } else {
                0.0
            }
        })
        .collect();
    st.z_up = (0..n + mi)
        .map(|k| {
            if st.bounds[k].upper.is_finite() {
                mu / (st.bounds[k].upper - st.p[k])
            } else {
                0.0
            }
        })
        .collect();

    let mut ldl = BandedLdl::new(layout.kkt_dim, layout.bandwidth);
    let mut log = Vec::new();
    let mut nu: f64 = 1.0; // merit penalty
    let mut delta_last = 0.0;
    let mut ls_failures = 0usize;
    let mut best_feas = f64::INFINITY;
    let mut best_feas_iter = 0usize;

    let mut status = SolveStatus::MaxIter;
    let mut iter = 0;
    let mut last_alpha = 0.0;
    let mut tol_met_streak = 0usize;
    let (mut feas, mut stat_scaled) = (f64::INFINITY, f64::INFINITY);

    while iter < options.max_iter {
        let x_now: Vec<f64> = st.p[..n].to_vec();
        eval_all(problem, &x_now, &mut ws);
        let f_now = eval_objective(problem, &x_now);

        // Lagrangian gradient over the stacked primal.
        let mut grad_l = vec![0.0; n + mi];
        grad_l[..n].copy_from_slice(&ws.grad);
        let mut r0 = 0;
        for (bi, b) in problem.blocks.iter().enumerate() {
            for lr in 0..b.dim {
                let r = r0 + lr;
                for (c, &j) in b.vars.iter().enumerate() {
                    grad_l[j] += st.y[r] * ws.jac_blocks[bi][lr][c];
                }
                if let Some(si) = layout.rows[r].slack {
                    grad_l[n + si] -= st.y[r];
                }
            }
            r0 += b.dim;
        }
        let mut dual_inf: f64 = 0.0;
        let mut comp: f64 = 0.0;
        let mut mult_sum = 0.0;
        let mut mult_cnt = 0usize;
        for k in 0..n + mi {
            let b = st.bounds[k];
            let mut gl = grad_l[k];
            if b.lower.is_finite() {
                gl -= st.z_lo[k];
                comp = comp.max((st.z_lo[k] * (st.p[k] - b.lower)).abs());
                mult_sum += st.z_lo[k].abs();
                mult_cnt += 1;
            }
            if b.upper.is_finite() {
                gl += st.z_up[k];
                comp = comp.max((st.z_up[k] * (b.upper - st.p[k])).abs());
                mult_sum += st.z_up[k].abs();
                mult_cnt += 1;
            }
            dual_inf = dual_inf.max(gl.abs());
        }
        for r in 0..m {
            mult_sum += st.y[r].abs();
            mult_cnt += 1;
        }
        let s_d = ((mult_sum / mult_cnt.max(1) as f64).max(S_MAX)) / S_MAX;
        feas = true_violation(&layout, &ws.residuals);
        stat_scaled = dual_inf / s_d;
        let comp_scaled = comp / s_d;

        if feas < best_feas * 0.999 {
            best_feas = feas;
            best_feas_iter = iter;
        }

        // The spec tolerances gate convergence, but the barrier is driven to
        // its floor first so the returned point is pinned well inside them
        // (argmin invariance under objective scaling relies on this).
        if feas <= options.feas_tol && stat_scaled <= options.opt_tol && comp_scaled <= options.opt_tol
        {
            tol_met_streak += 1;
            if mu <= 1e-9 || tol_met_streak >= 30 {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            tol_met_streak = 0;
        }
        if iter > best_feas_iter + 150 && feas > 10.0 * options.feas_tol {
            status = SolveStatus::InfeasiblePoint;
            break;
        }

        // Barrier parameter update (may tighten repeatedly).
        loop {
            let e_mu = comp_with_mu(&st, n + mi, mu)
                .max(stat_scaled)
                .max(feas);
            if e_mu <= KAPPA_EPS * mu && mu > MU_MIN {
                mu = (KAPPA_MU * mu).min(mu.powf(THETA_MU)).max(MU_MIN);
            } else {
                break;
            }
        }

        // Hessian of the Lagrangian, block by block.
        let mut local = Vec::new();
        r0 = 0;
        for (bi, b) in problem.blocks.iter().enumerate() {
            local.clear();
            local.extend(b.vars.iter().map(|&j| x_now[j]));
            let weights: Vec<f64> = (0..b.dim).map(|lr| st.y[r0 + lr]).collect();
            block_hessian(b.eval.as_ref(), &mut local, &weights, &mut ws.hess_blocks[bi]);
            r0 += b.dim;
        }
        for (ti, t) in problem.objective.iter().enumerate() {
            local.clear();
            local.extend(t.vars.iter().map(|&j| x_now[j]));
            block_hessian(t.eval.as_ref(), &mut local, &[1.0], &mut ws.hess_obj[ti]);
        }

        // Assemble and factor the KKT system, walking the regularization
        // ladder until the inertia is right.
        let sigma: Vec<f64> = (0..n + mi)
            .map(|k| {
                let b = st.bounds[k];
                let mut s = 0.0;
                if b.lower.is_finite() {
                    s += st.z_lo[k] / (st.p[k] - b.lower);
                }
                if b.upper.is_finite() {
                    s += st.z_up[k] / (b.upper - st.p[k]);
                }
                s
            })
            .collect();

        let mut delta = if delta_last == 0.0 { 0.0 } else { delta_last / 3.0 };
        let delta_c = 1e-9;
        let mut factored = false;
        for _try in 0..14 {
            ldl.clear();
            assemble_kkt(problem, &layout, &ws, &sigma, delta, delta_c, &mut ldl);
            match ldl.factor(1e-13) {
                FactorOutcome::Ok { negative_pivots } => {
                    if negative_pivots == m {
                        factored = true;
                        break;
                    }
                }
                FactorOutcome::Breakdown { .. } => {}
            }
            delta = if delta == 0.0 { 1e-8 } else { delta * 100.0 };
        }
        if !factored {
            status = SolveStatus::NumericalFailure;
            break;
        }
        delta_last = delta;

        // Right-hand side.
        let mut rhs = vec![0.0; layout.kkt_dim];
        for k in 0..n + mi {
            let b = st.bounds[k];
            let mut r = grad_l[k];
            if b.lower.is_finite() {
                r -= mu / (st.p[k] - b.lower);
            }
            if b.upper.is_finite() {
                r += mu / (b.upper - st.p[k]);
            }
            let pos = if k < n {
                layout.pos_x[k]
            } else {
                layout.pos_s[k - n]
            };
            rhs[pos] = -r;
        }
        for (r, row) in layout.rows.iter().enumerate() {
            let c = ws.residuals[r];
            let resid = match row.slack {
                Some(si) => c - st.p[n + si],
                None => c - row.lower,
            };
            rhs[layout.pos_y[r]] = -resid;
        }
        ldl.solve(&mut rhs);

        // Unpack the step.
        let mut dp = vec![0.0; n + mi];
        for j in 0..n {
            dp[j] = rhs[layout.pos_x[j]];
        }
        for si in 0..mi {
            dp[n + si] = rhs[layout.pos_s[si]];
        }
        let dy: Vec<f64> = (0..m).map(|r| rhs[layout.pos_y[r]]).collect();

        // Bound-multiplier steps.
        let mut dz_lo = vec![0.0; n + mi];
        let mut dz_up = vec![0.0; n + mi];
        for k in 0..n + mi {
            let b = st.bounds[k];
            if b.lower.is_finite() {
                let d = st.p[k] - b.lower;
                dz_lo[k] = mu / d - st.z_lo[k] - st.z_lo[k] / d * dp[k];
            }
            if b.upper.is_finite() {
                let d = b.upper - st.p[k];
                dz_up[k] = mu / d - st.z_up[k] + st.z_up[k] / d * dp[k];
            }
        }

        // Fraction-to-boundary step lengths.
        let tau = 0.99f64.max(1.0 - mu);
        let mut alpha_max: f64 = 1.0;
        for k in 0..n + mi {
            let b = st.bounds[k];
            if b.lower.is_finite() && dp[k] < 0.0 {
                alpha_max = alpha_max.min(-tau * (st.p[k] - b.lower) / dp[k]);
            }
            if b.upper.is_finite() && dp[k] > 0.0 {
                alpha_max = alpha_max.min(tau * (b.upper - st.p[k]) / dp[k]);
            }
        }
        let mut alpha_z: f64 = 1.0;
        for k in 0..n + mi {
            if dz_lo[k] < 0.0 && st.z_lo[k] > 0.0 {
                alpha_z = alpha_z.min(-tau * st.z_lo[k] / dz_lo[k]);
            }
            if dz_up[k] < 0.0 && st.z_up[k] > 0.0 {
                alpha_z = alpha_z.min(-tau * st.z_up[k] / dz_up[k]);
            }
        }

        // Merit line search (L1 penalty on the shifted residuals).
        let c_norm = |residuals: &[f64], p: &[f64]| -> f64 {
            let mut s = 0.0;
            for (r, row) in layout.rows.iter().enumerate() {
                let resid = match row.slack {
                    Some(si) => residuals[r] - p[n + si],
                    None => residuals[r] - row.lower,
                };
                s += resid.abs();
            }
            s
        };
        let barrier = |p: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..n + mi {
                let b = st.bounds[k];
                if b.lower.is_finite() {
                    let d = p[k] - b.lower;
                    if d <= 0.0 {
                        return f64::INFINITY;
                    }
                    s -= mu * d.ln();
                }
                if b.upper.is_finite() {
                    let d = b.upper - p[k];
                    if d <= 0.0 {
                        return f64::INFINITY;
                    }
                    s -= mu * d.ln();
                }
            }
            s
        };
        let c0 = c_norm(&ws.residuals, &st.p);
        // Penalty large enough that the step's linear model decreases phi.
        let y_inf = st
            .y
            .iter()
            .zip(&dy)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0f64, f64::max);
        nu = nu.max(1.2 * y_inf + 1e-2);
        let phi0 = f_now + barrier(&st.p) + nu * c0;
        // Directional derivative of the barrier objective along dp.
        let mut dphi = 0.0;
        for k in 0..n + mi {
            let b = st.bounds[k];
            let mut g = if k < n { ws.grad[k] } else { 0.0 };
            if b.lower.is_finite() {
                g -= mu / (st.p[k] - b.lower);
            }
            if b.upper.is_finite() {
                g += mu / (b.upper - st.p[k]);
            }
            dphi += g * dp[k];
        }
        dphi -= nu * c0;

        let mut alpha = alpha_max;
        let mut accepted = false;
        let mut trial_x = vec![0.0; n];
        for _bt in 0..40 {
            let mut trial_p = st.p.clone();
            for k in 0..n + mi {
                trial_p[k] += alpha * dp[k];
            }
            trial_x.copy_from_slice(&trial_p[..n]);
            let f_t = eval_objective(problem, &trial_x);
            let mut res_t = vec![0.0; m];
            let mut lcl = Vec::new();
            let mut rr = 0;
            for b in problem.blocks.iter() {
                lcl.clear();
                lcl.extend(b.vars.iter().map(|&j| trial_x[j]));
                b.eval.eval_f64(&lcl, &mut res_t[rr..rr + b.dim]);
                rr += b.dim;
            }
            let phi_t = f_t + barrier(&trial_p) + nu * c_norm(&res_t, &trial_p);
            if phi_t.is_finite() && phi_t <= phi0 + 1e-4 * alpha * dphi.min(0.0) {
                accepted = true;
                st.p = trial_p;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break;
            }
        }
        if !accepted {
            ls_failures += 1;
            delta_last = if delta_last == 0.0 { 1e-6 } else { delta_last * 100.0 };
            if ls_failures >= 8 {
                status = if feas > options.feas_tol {
                    SolveStatus::InfeasiblePoint
                } else {
                    SolveStatus::NumericalFailure
                };
                break;
            }
            iter += 1;
            continue;
        }
        ls_failures = 0;
        last_alpha = alpha;

        for r in 0..m {
            st.y[r] += alpha * dy[r];
        }
        for k in 0..n + mi {
            let b = st.bounds[k];
            if b.lower.is_finite() {
                st.z_lo[k] = (st.z_lo[k] + alpha_z * dz_lo[k]).max(1e-16);
                // keep multipliers in a box around mu / distance
                let d = st.p[k] - b.lower;
                let lo = mu / (KAPPA_SIGMA * d);
                let hi = KAPPA_SIGMA * mu / d;
                st.z_lo[k] = st.z_lo[k].clamp(lo, hi);
            }
            if b.upper.is_finite() {
                st.z_up[k] = (st.z_up[k] + alpha_z * dz_up[k]).max(1e-16);
                let d = b.upper - st.p[k];
                let lo = mu / (KAPPA_SIGMA * d);
                let hi = KAPPA_SIGMA * mu / d;
                st.z_up[k] = st.z_up[k].clamp(lo, hi);
            }
        }

        if options.log_iterations {
            log.push(IterationLog {
                iter,
                objective: f_now,
                feasibility: feas,
                stationarity: stat_scaled,
                step_length: alpha,
            });
        }
        iter += 1;
    }

    // Final report.
    let x_final: Vec<f64> = st.p[..n].to_vec();
    eval_all(problem, &x_final, &mut ws);
    let feas_final = true_violation(&layout, &ws.residuals);
    let worst = worst_block(problem, &layout, &ws.residuals);
    if options.log_iterations {
        log.push(IterationLog {
            iter,
            objective: eval_objective(problem, &x_final),
            feasibility: feas_final,
            stationarity: stat_scaled,
            step_length: last_alpha,
        });
    }
    let _ = feas;
    NlpSolution {
        objective: eval_objective(problem, &x_final),
        x_opt: x_final,
        constraint_violation: feas_final,
        stationarity: stat_scaled,
        iterations: iter,
        status,
        worst_block: worst,
        iteration_log: log,
    }
}

fn comp_with_mu(st: &State, np: usize, mu: f64) -> f64 {
    let mut c: f64 = 0.0;
    for k in 0..np {
        let b = st.bounds[k];
        if b.lower.is_finite() {
            c = c.max((st.z_lo[k] * (st.p[k] - b.lower) - mu).abs());
        }
        if b.upper.is_finite() {
            c = c.max((st.z_up[k] * (b.upper - st.p[k]) - mu).abs());
        }
    }
    c
}

fn assemble_kkt(
    problem: &NlpProblem,
    layout: &Layout,
    ws: &Workspace,
    sigma: &[f64],
    delta: f64,
    delta_c: f64,
    ldl: &mut BandedLdl,
) {
    let n = layout.n;
    // Sigma + primal regularization on the diagonal.
    for j in 0..n {
        ldl.add(layout.pos_x[j], layout.pos_x[j], sigma[j] + delta);
    }
    for si in 0..layout.m_ineq {
        ldl.add(layout.pos_s[si], layout.pos_s[si], sigma[n + si] + delta);
    }
    // Lagrangian Hessian (objective terms + weighted constraint blocks),
    // scattered once per unordered local pair.
    let mut scatter = |vars: &[usize], h: &Vec<Vec<f64>>| {
        for a in 0..vars.len() {
            for b in 0..=a {
                let v = h[a][b];
                if v != 0.0 {
                    ldl.add(layout.pos_x[vars[a]], layout.pos_x[vars[b]], v);
                }
            }
        }
    };
    for (ti, t) in problem.objective.iter().enumerate() {
        scatter(&t.vars, &ws.hess_obj[ti]);
    }
    for (bi, b) in problem.blocks.iter().enumerate() {
        scatter(&b.vars, &ws.hess_blocks[bi]);
    }
    // Jacobian and slack couplings; dual diagonal gets -delta_c.
    let mut r0 = 0;
    for (bi, b) in problem.blocks.iter().enumerate() {
        for lr in 0..b.dim {
            let r = r0 + lr;
            let py = layout.pos_y[r];
            for &(row, c) in &b.sparsity {
                if row == lr {
                    let v = ws.jac_blocks[bi][lr][c];
                    if v != 0.0 {
                        ldl.add(py, layout.pos_x[b.vars[c]], v);
                    }
                }
            }
            if let Some(si) = layout.rows[r].slack {
                ldl.add(py, layout.pos_s[si], -1.0);
            }
            ldl.add(py, py, -delta_c);
        }
        r0 += b.dim;
    }
}

fn worst_block(
    problem: &NlpProblem,
    layout: &Layout,
    residuals: &[f64],
) -> Option<(String, f64)> {
    let mut worst: Option<(String, f64)> = None;
    for (r, row) in layout.rows.iter().enumerate() {
        let c = residuals[r];
        let v = (row.lower - c).max(c - row.upper).max(0.0);
        if worst.as_ref().map_or(true, |(_, w)| v > *w) {
            worst = Some((problem.blocks[row.block].name.clone(), v));
        }
    }
    worst
}

fn failed_solution(problem: &NlpProblem, status: SolveStatus, _msg: &str) -> NlpSolution {
    NlpSolution {
        x_opt: problem.x0.clone(),
        objective: f64::NAN,
        constraint_violation: f64::INFINITY,
        stationarity: f64::INFINITY,
        iterations: 0,
        status,
        worst_block: None,
        iteration_log: Vec::new(),
    }
}
