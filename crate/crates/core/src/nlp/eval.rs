//! Derivative evaluation over the block structure.

use crate::math::{Ad, AD_LANES};

use super::{NlpProblem, ObjectiveTerm};

/// Stacked constraint Jacobian in triplet form.
#[derive(Debug, Clone)]
pub struct SparseJacobian {
    pub rows: usize,
    pub cols: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseJacobian {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c, v) in &self.triplets {
            d[r][c] += v;
        }
        d
    }
}

/// Error raised when an evaluation produces a non-finite entry.
#[derive(Debug, Clone, thiserror::Error)]
#[error("non-finite Jacobian entry in block `{block}` at (row {row}, col {col})")]
pub struct NonFiniteEntry {
    pub block: String,
    pub row: usize,
    pub col: usize,
}

fn gather(x: &[f64], idx: &[usize], out: &mut Vec<f64>) {
    out.clear();
    out.extend(idx.iter().map(|&j| x[j]));
}

/// Evaluate all constraint rows at `x` (clamped to the variable bounds).
pub fn eval_residuals(problem: &NlpProblem, x: &[f64]) -> Vec<f64> {
    let xc = clamp_to_bounds(problem, x);
    let mut out = vec![0.0; problem.total_rows()];
    let mut local = Vec::new();
    let mut row0 = 0;
    for b in &problem.blocks {
        gather(&xc, &b.vars, &mut local);
        b.eval.eval_f64(&local, &mut out[row0..row0 + b.dim]);
        row0 += b.dim;
    }
    out
}

fn clamp_to_bounds(problem: &NlpProblem, x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(j, &v)| v.clamp(problem.x_lower[j], problem.x_upper[j]))
        .collect()
}

/// Evaluate one block's local Jacobian rows with AD, chunking the seed lanes
/// when the block has more than [`AD_LANES`] local variables.
///
/// `jac[r][c]` is the derivative of row `r` with respect to local var `c`.
pub fn block_jacobian(
    eval: &dyn super::BlockEval,
    local: &[f64],
    dim: usize,
    jac: &mut Vec<Vec<f64>>,
) {
    let k = local.len();
    jac.clear();
    jac.resize(dim, vec![0.0; k]);
    let mut seeded: Vec<Ad> = local.iter().map(|&v| Ad::constant(v)).collect();
    let mut out = vec![Ad::constant(0.0); dim];
    let mut chunk0 = 0;
    while chunk0 < k {
        let chunk = (k - chunk0).min(AD_LANES);
        for (lane, j) in (chunk0..chunk0 + chunk).enumerate() {
            seeded[j] = Ad::variable(local[j], lane);
        }
        for o in out.iter_mut() {
            *o = Ad::constant(0.0);
        }
        eval.eval_ad(&seeded, &mut out);
        for r in 0..dim {
            for (lane, j) in (chunk0..chunk0 + chunk).enumerate() {
                jac[r][j] = out[r].d[lane];
            }
        }
        for j in chunk0..chunk0 + chunk {
            seeded[j] = Ad::constant(local[j]);
        }
        chunk0 += chunk;
    }
}

/// Stacked constraint Jacobian at `x`; entries outside each block's declared
/// sparsity pattern are exactly zero (dropped at scatter time).
pub fn eval_jacobian(problem: &NlpProblem, x: &[f64]) -> Result<SparseJacobian, NonFiniteEntry> {
    let xc = clamp_to_bounds(problem, x);
    let mut triplets = Vec::new();
    let mut local = Vec::new();
    let mut jac: Vec<Vec<f64>> = Vec::new();
    let mut row0 = 0;
    for b in &problem.blocks {
        gather(&xc, &b.vars, &mut local);
        block_jacobian(b.eval.as_ref(), &local, b.dim, &mut jac);
        for &(r, c) in &b.sparsity {
            let v = jac[r][c];
            if !v.is_finite() {
                return Err(NonFiniteEntry {
                    block: b.name.clone(),
                    row: row0 + r,
                    col: b.vars[c],
                });
            }
            if v != 0.0 {
                triplets.push((row0 + r, b.vars[c], v));
            }
        }
        row0 += b.dim;
    }
    Ok(SparseJacobian {
        rows: problem.total_rows(),
        cols: problem.n_vars,
        triplets,
    })
}

/// Objective value at `x`.
pub fn eval_objective(problem: &NlpProblem, x: &[f64]) -> f64 {
    let mut local = Vec::new();
    let mut out = [0.0];
    let mut f = 0.0;
    for t in &problem.objective {
        gather(x, &t.vars, &mut local);
        t.eval.eval_f64(&local, &mut out);
        f += out[0];
    }
    f
}

/// Objective gradient at `x` (dense).
pub fn eval_gradient(problem: &NlpProblem, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; problem.n_vars];
    let mut local = Vec::new();
    let mut jac: Vec<Vec<f64>> = Vec::new();
    for t in &problem.objective {
        gather(x, &t.vars, &mut local);
        block_jacobian(t.eval.as_ref(), &local, 1, &mut jac);
        for (c, &j) in t.vars.iter().enumerate() {
            g[j] += jac[0][c];
        }
    }
    g
}

/// Gradient of one objective term with respect to its local variables.
pub fn term_local_gradient(term: &ObjectiveTerm, local: &[f64], out: &mut Vec<f64>) {
    let mut jac: Vec<Vec<f64>> = Vec::new();
    block_jacobian(term.eval.as_ref(), local, 1, &mut jac);
    out.clear();
    out.extend_from_slice(&jac[0]);
}

/// Verify by randomized finite-difference probing that each block's true
/// Jacobian nonzeros are inside its declared sparsity pattern. Returns the
/// offending `(block name, row, local col, magnitude)` entries.
pub fn probe_sparsity(
    problem: &NlpProblem,
    samples: &[Vec<f64>],
    tol: f64,
) -> Vec<(String, usize, usize, f64)> {
    let mut bad = Vec::new();
    let mut local = Vec::new();
    for b in &problem.blocks {
        let declared: std::collections::HashSet<(usize, usize)> =
            b.sparsity.iter().copied().collect();
        for x in samples {
            gather(x, &b.vars, &mut local);
            let h = 1e-6;
            let mut out_p = vec![0.0; b.dim];
            let mut out_m = vec![0.0; b.dim];
            for c in 0..b.vars.len() {
                let keep = local[c];
                local[c] = keep + h;
                b.eval.eval_f64(&local, &mut out_p);
                local[c] = keep - h;
                b.eval.eval_f64(&local, &mut out_m);
                local[c] = keep;
                for r in 0..b.dim {
                    let d = (out_p[r] - out_m[r]) / (2.0 * h);
                    if d.abs() > tol && !declared.contains(&(r, c)) {
                        bad.push((b.name.clone(), r, c, d.abs()));
                    }
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Scalar;
    use crate::nlp::{ClosureBlock, ConstraintBlock};

    fn linear_block(a: Vec<f64>, b: f64, vars: Vec<usize>) -> ConstraintBlock {
        let a2 = a.clone();
        ConstraintBlock::dense(
            "linear",
            vars,
            vec![b],
            vec![b],
            Box::new(ClosureBlock {
                f: move |v: &[f64], out: &mut [f64]| {
                    out[0] = v.iter().zip(&a).map(|(x, c)| x * c).sum::<f64>();
                },
                g: move |v: &[Ad], out: &mut [Ad]| {
                    let mut s = Ad::constant(0.0);
                    for (x, c) in v.iter().zip(&a2) {
                        s = s + *x * Ad::from_f64(*c);
                    }
                    out[0] = s;
                },
            }),
        )
    }

    #[test]
    fn linear_block_jacobian_is_coefficient_row() {
        let mut p = NlpProblem::new(3);
        p.blocks
            .push(linear_block(vec![2.0, -1.0, 0.5], 1.0, vec![0, 1, 2]));
        let j = eval_jacobian(&p, &[0.3, -0.7, 1.1]).unwrap();
        let d = j.to_dense();
        assert_eq!(d[0], vec![2.0, -1.0, 0.5]);
        let j2 = eval_jacobian(&p, &[10.0, 3.0, -4.0]).unwrap();
        assert_eq!(j2.to_dense()[0], vec![2.0, -1.0, 0.5]);
    }

    #[test]
    fn smooth_block_matches_central_differences() {
        let mut p = NlpProblem::new(2);
        p.blocks.push(ConstraintBlock::dense(
            "smooth",
            vec![0, 1],
            vec![0.0; 2],
            vec![0.0; 2],
            Box::new(ClosureBlock {
                f: |v: &[f64], out: &mut [f64]| {
                    out[0] = v[0].sin() * v[1] + v[0] * v[0];
                    out[1] = (v[1] * v[1] + 1.0).sqrt() * v[0].cos();
                },
                g: |v: &[Ad], out: &mut [Ad]| {
                    out[0] = v[0].sin() * v[1] + v[0] * v[0];
                    out[1] = (v[1] * v[1] + Ad::constant(1.0)).sqrt() * v[0].cos();
                },
            }),
        ));
        let x = [0.8, -0.4];
        let j = eval_jacobian(&p, &x).unwrap().to_dense();
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let rp = eval_residuals(&p, &xp);
            let rm = eval_residuals(&p, &xm);
            for r in 0..2 {
                let fd = (rp[r] - rm[r]) / (2.0 * h);
                let denom = fd.abs().max(1.0);
                assert!(
                    ((j[r][c] - fd) / denom).abs() < 1e-4,
                    "({r},{c}): {} vs {}",
                    j[r][c],
                    fd
                );
            }
        }
    }

    #[test]
    fn probing_detects_pattern_violation() {
        // Declared pattern claims row 0 depends only on var 0; the true
        // function also depends on var 1.
        let mut p = NlpProblem::new(2);
        let mut b = ConstraintBlock::dense(
            "lying",
            vec![0, 1],
            vec![0.0],
            vec![0.0],
            Box::new(ClosureBlock {
                f: |v: &[f64], out: &mut [f64]| out[0] = v[0] + 3.0 * v[1],
                g: |v: &[Ad], out: &mut [Ad]| out[0] = v[0] + Ad::constant(3.0) * v[1],
            }),
        );
        b.sparsity = vec![(0, 0)];
        p.blocks.push(b);
        let bad = probe_sparsity(&p, &[vec![0.2, 0.4], vec![-1.0, 2.0]], 1e-8);
        assert!(!bad.is_empty());
        assert_eq!(bad[0].2, 1);
        // And the declared-honest version probes clean.
        let mut p2 = NlpProblem::new(2);
        p2.blocks.push(linear_block(vec![1.0, 3.0], 0.0, vec![0, 1]));
        assert!(probe_sparsity(&p2, &[vec![0.2, 0.4]], 1e-8).is_empty());
    }
}
