//! Sparse nonlinear program container and interior-point solver.
//!
//! A problem is a box-bounded decision vector, a sum of small objective
//! terms, and a list of constraint blocks. Each block touches a short list of
//! variables and is evaluated either in plain `f64` (residuals, line search)
//! or with [`Ad`](crate::math::Ad) duals (exact first derivatives). Second
//! derivatives come from forward differences of the AD gradient, block by
//! block, so the Lagrangian Hessian inherits the declared sparsity.

mod banded;
mod eval;
mod ipm;

pub use banded::BandedLdl;
pub use eval::{eval_gradient, eval_jacobian, eval_objective, eval_residuals, probe_sparsity,
    SparseJacobian};
pub use ipm::solve;

use crate::math::Ad;

/// Evaluation interface of one constraint block (or objective term).
///
/// Implementations must produce identical values through both paths; the
/// `f64` path exists because residual-only evaluations dominate the solve.
pub trait BlockEval: Send + Sync {
    fn eval_f64(&self, vars: &[f64], out: &mut [f64]);
    fn eval_ad(&self, vars: &[Ad], out: &mut [Ad]);
}

/// Adapter for hand-written closures (used by tests and small fixtures).
pub struct ClosureBlock<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[Ad], &mut [Ad]) + Send + Sync,
{
    pub f: F,
    pub g: G,
}

impl<F, G> BlockEval for ClosureBlock<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
    G: Fn(&[Ad], &mut [Ad]) + Send + Sync,
{
    fn eval_f64(&self, vars: &[f64], out: &mut [f64]) {
        (self.f)(vars, out)
    }
    fn eval_ad(&self, vars: &[Ad], out: &mut [Ad]) {
        (self.g)(vars, out)
    }
}

/// One block of constraint rows over a small set of variables.
pub struct ConstraintBlock {
    pub name: String,
    /// Global indices of the block's local variables.
    pub vars: Vec<usize>,
    /// Number of rows produced by `eval`.
    pub dim: usize,
    /// Per-row lower bound (equality rows have `lower == upper`).
    pub lower: Vec<f64>,
    /// Per-row upper bound.
    pub upper: Vec<f64>,
    pub eval: Box<dyn BlockEval>,
    /// Declared nonzeros as `(row, local_col)`; must be a superset of the
    /// true nonzeros. Entries outside the pattern are dropped exactly.
    pub sparsity: Vec<(usize, usize)>,
}

impl ConstraintBlock {
    /// Block with a dense declared pattern (every row touches every local var).
    pub fn dense(
        name: impl Into<String>,
        vars: Vec<usize>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        eval: Box<dyn BlockEval>,
    ) -> Self {
        assert_eq!(lower.len(), upper.len());
        let dim = lower.len();
        let sparsity = (0..dim)
            .flat_map(|r| (0..vars.len()).map(move |c| (r, c)))
            .collect();
        ConstraintBlock {
            name: name.into(),
            vars,
            dim,
            lower,
            upper,
            eval,
            sparsity,
        }
    }

    pub fn is_equality(&self, row: usize) -> bool {
        self.lower[row] == self.upper[row]
    }
}

/// One additive objective term over a small set of variables.
pub struct ObjectiveTerm {
    pub name: String,
    pub vars: Vec<usize>,
    pub eval: Box<dyn BlockEval>,
}

/// A box-bounded nonlinear program.
pub struct NlpProblem {
    pub n_vars: usize,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub x0: Vec<f64>,
    pub objective: Vec<ObjectiveTerm>,
    pub blocks: Vec<ConstraintBlock>,
}

impl NlpProblem {
    pub fn new(n_vars: usize) -> Self {
        NlpProblem {
            n_vars,
            x_lower: vec![f64::NEG_INFINITY; n_vars],
            x_upper: vec![f64::INFINITY; n_vars],
            x0: vec![0.0; n_vars],
            objective: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn total_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Consistency checks on bounds and block shapes.
    pub fn validate(&self) -> Result<(), String> {
        for j in 0..self.n_vars {
            if self.x_lower[j] > self.x_upper[j] {
                return Err(format!("variable {j}: lower bound above upper bound"));
            }
        }
        for b in &self.blocks {
            if b.lower.len() != b.dim || b.upper.len() != b.dim {
                return Err(format!("block {}: bound length mismatch", b.name));
            }
            for r in 0..b.dim {
                if b.lower[r] > b.upper[r] {
                    return Err(format!("block {} row {r}: lower above upper", b.name));
                }
            }
            for &(r, c) in &b.sparsity {
                if r >= b.dim || c >= b.vars.len() {
                    return Err(format!("block {}: sparsity entry out of range", b.name));
                }
            }
            for &v in &b.vars {
                if v >= self.n_vars {
                    return Err(format!("block {}: variable index out of range", b.name));
                }
            }
        }
        Ok(())
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InfeasiblePoint,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasiblePoint => "infeasible_point",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        write!(f, "{s}")
    }
}

/// Per-iteration log record (exported as CSV behind a CLI flag).
#[derive(Debug, Clone, Copy)]
pub struct IterationLog {
    pub iter: usize,
    pub objective: f64,
    pub feasibility: f64,
    pub stationarity: f64,
    pub step_length: f64,
}

/// Solution report of [`solve`].
#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x_opt: Vec<f64>,
    pub objective: f64,
    /// Infinity norm of the constraint violation.
    pub constraint_violation: f64,
    /// Scaled infinity norm of the KKT stationarity residual.
    pub stationarity: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Name and violation of the worst constraint block at exit.
    pub worst_block: Option<(String, f64)>,
    pub iteration_log: Vec<IterationLog>,
}

/// Solver options; the defaults match the documented interface.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iter: usize,
    /// Record a per-iteration log in the solution.
    pub log_iterations: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-6,
            opt_tol: 1e-4,
            max_iter: 3000,
            log_iterations: false,
        }
    }
}
