//! Semidefinite-program assembly and solving for the joint
//! policy/contract synthesis.

pub mod assemble;
pub mod program;
pub mod solver;

pub use assemble::{
    assemble_contract_lmi, assemble_ellipsoid_containment_check, assemble_fixed_contract_program,
    assemble_program, assemble_soc_rows, contract_lmi_value, quadratic_inequality_min_eig,
    FixedContract,
};
pub use program::{ConicProgram, ExprMatrix, LinExpr, SolveStatus, SolverReport, VarValue};
pub use solver::{solve, solve_with, ClarabelBackend, ConicSolver, SolverOptions, StandardForm};

use nalgebra::{DMatrix, DVector};

use crate::problem::PreparedProblem;
use crate::{Error, Result};

/// Typed view of an optimal solution: all named blocks as matrices and
/// vectors, with contract-side quantities defaulted on partially nested
/// instances.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub q_w: DMatrix<f64>,
    pub q_xi: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub u_bar: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub x_bar: DVector<f64>,
    pub p_w: DMatrix<f64>,
    pub p_xi: DMatrix<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub objective: f64,
}

impl SdpSolution {
    /// Extract from a report produced by the joint program (or by the
    /// partially nested program, in which case contract-side blocks take
    /// their vacuous defaults `λ = 1`, `β = 0`, `Y = 0`, `v̄ = 0`,
    /// `Q^ξ = P^ξ = 0`).
    pub fn from_report(report: &SolverReport, prep: &PreparedProblem) -> Result<Self> {
        Self::extract(report, prep, None)
    }

    /// Extract from a report produced by the fixed-contract program,
    /// reattaching the frozen `(λ, Y, v̄)`.
    pub fn from_report_fixed(
        report: &SolverReport,
        prep: &PreparedProblem,
        fixed: &FixedContract,
    ) -> Result<Self> {
        Self::extract(report, prep, Some(fixed))
    }

    fn extract(
        report: &SolverReport,
        prep: &PreparedProblem,
        fixed: Option<&FixedContract>,
    ) -> Result<Self> {
        if !report.status.is_optimal() {
            return Err(Error::NotSolved(report.status.to_string()));
        }
        let n_x = prep.model().traj_state_dim();
        let n_u = prep.model().traj_input_dim();
        let must = |name: &str| -> Result<DMatrix<f64>> {
            report
                .matrix(name)
                .ok_or_else(|| Error::NotSolved(format!("missing block {name}")))
        };
        let q_w = must("Q_w")?;
        let p_w = must("P_w")?;
        let u_bar = report
            .vector("u_bar")
            .ok_or_else(|| Error::NotSolved("missing block u_bar".into()))?;
        let x_bar = report
            .vector("x_bar")
            .ok_or_else(|| Error::NotSolved("missing block x_bar".into()))?;
        let coupled = !prep.is_partially_nested();

        let (q_xi, p_xi, beta) = if coupled {
            (
                must("Q_xi")?,
                must("P_xi")?,
                report
                    .scalar("beta")
                    .ok_or_else(|| Error::NotSolved("missing beta".into()))?,
            )
        } else {
            (
                DMatrix::zeros(n_u, n_x),
                DMatrix::zeros(n_x, n_x),
                0.0,
            )
        };
        let (lambda, y, v_bar) = match (coupled, fixed) {
            (false, _) => (1.0, DMatrix::zeros(n_x, n_x), DVector::zeros(n_x)),
            (true, Some(f)) => (f.lambda, f.y.clone(), f.v_bar.clone()),
            (true, None) => (
                report
                    .scalar("lambda")
                    .ok_or_else(|| Error::NotSolved("missing lambda".into()))?,
                must("Y")?,
                report
                    .vector("v_bar")
                    .ok_or_else(|| Error::NotSolved("missing v_bar".into()))?,
            ),
        };
        Ok(Self {
            q_w,
            q_xi,
            y,
            u_bar,
            v_bar,
            x_bar,
            p_w,
            p_xi,
            lambda,
            beta,
            objective: report
                .objective
                .ok_or_else(|| Error::NotSolved("missing objective".into()))?,
        })
    }
}
