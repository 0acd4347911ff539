//! On-disk solution and verification-report formats.
//!
//! A solution file is self-contained: it embeds the problem description,
//! the solver outcome with all variable blocks (shape metadata included),
//! and the recovered policy, so `simulate` needs no other input.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use agc_core::policy::{ContractPolicy, Ellipsoid};
use agc_core::problem::{PreparedProblem, ProblemSpec};
use agc_core::sdp::{SdpSolution, SolveStatus, SolverReport, VarValue};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub backend: String,
    pub tolerance: f64,
    pub iterations: usize,
    pub solve_time_s: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub u_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub q_w: VarValue,
    pub q_v: VarValue,
    pub lambda: f64,
    pub beta: f64,
    pub contract_center: Vec<f64>,
    pub contract_shape: VarValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub solver: SolverDiagnostics,
    pub problem: ProblemSpec,
    /// All registered variable blocks of the conic program.
    pub variables: BTreeMap<String, VarValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyFile>,
}

fn matrix_value(m: &DMatrix<f64>) -> VarValue {
    VarValue::Matrix {
        rows: m.nrows(),
        cols: m.ncols(),
        data: (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| m[(r, c)])
            .collect(),
    }
}

impl SolutionFile {
    pub fn new(
        report: &SolverReport,
        prep: &PreparedProblem,
        policy: Option<&ContractPolicy>,
        tolerance: f64,
        graph_name: Option<String>,
    ) -> Self {
        Self {
            status: report.status.clone(),
            graph_name,
            objective: report.objective,
            solver: SolverDiagnostics {
                backend: "clarabel".to_string(),
                tolerance,
                iterations: report.iterations,
                solve_time_s: report.solve_time_s,
                primal_residual: report.primal_residual,
                dual_residual: report.dual_residual,
            },
            problem: ProblemSpec::from_instance(&prep.instance),
            variables: report.values.clone(),
            policy: policy.map(|p| PolicyFile {
                u_bar: p.u_bar.iter().copied().collect(),
                v_bar: p.v_bar.iter().copied().collect(),
                q_w: matrix_value(&p.q_w),
                q_v: matrix_value(&p.q_v),
                lambda: p.lambda,
                beta: p.beta,
                contract_center: p.contract.center().iter().copied().collect(),
                contract_shape: matrix_value(p.contract.shape()),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// Rebuild the typed policy (with its coupling projector) against a
    /// re-prepared problem.
    pub fn rebuild_policy(&self, prep: &PreparedProblem) -> Result<ContractPolicy, String> {
        let pf = self.policy.as_ref().ok_or("solution has no policy")?;
        let shape = pf.contract_shape.as_matrix().ok_or("bad contract shape")?;
        let center = DVector::from_vec(pf.contract_center.clone());
        let contract = if shape.nrows() == 0 {
            Ellipsoid::empty()
        } else {
            Ellipsoid::new(center, shape).map_err(|e| e.to_string())?
        };
        Ok(ContractPolicy {
            u_bar: DVector::from_vec(pf.u_bar.clone()),
            v_bar: DVector::from_vec(pf.v_bar.clone()),
            q_w: pf.q_w.as_matrix().ok_or("bad Q_w")?,
            q_v: pf.q_v.as_matrix().ok_or("bad Q_v")?,
            lambda: pf.lambda,
            y: self
                .variables
                .get("Y")
                .and_then(VarValue::as_matrix)
                .unwrap_or_else(|| {
                    let n = prep.instance.model.traj_state_dim();
                    DMatrix::zeros(n, n)
                }),
            beta: pf.beta,
            contract,
            pi_c: prep.pi_c.clone(),
        })
    }

    /// Rebuild the typed solution blocks for margin and cost evaluation.
    pub fn rebuild_solution(&self, prep: &PreparedProblem) -> Result<SdpSolution, String> {
        let n_x = prep.instance.model.traj_state_dim();
        let n_u = prep.instance.model.traj_input_dim();
        let mat = |name: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>, String> {
            match self.variables.get(name) {
                Some(v) => v.as_matrix().ok_or_else(|| format!("bad block {name}")),
                None => Ok(DMatrix::zeros(rows, cols)),
            }
        };
        let vec = |name: &str, len: usize| -> Result<DVector<f64>, String> {
            match self.variables.get(name) {
                Some(v) => v.as_vector().ok_or_else(|| format!("bad block {name}")),
                None => Ok(DVector::zeros(len)),
            }
        };
        let scal = |name: &str, default: f64| -> f64 {
            self.variables
                .get(name)
                .and_then(VarValue::as_scalar)
                .unwrap_or(default)
        };
        Ok(SdpSolution {
            q_w: mat("Q_w", n_u, n_x)?,
            q_xi: mat("Q_xi", n_u, n_x)?,
            y: mat("Y", n_x, n_x)?,
            u_bar: vec("u_bar", n_u)?,
            v_bar: vec("v_bar", n_x)?,
            x_bar: vec("x_bar", n_x)?,
            p_w: mat("P_w", n_x, n_x)?,
            p_xi: mat("P_xi", n_x, n_x)?,
            lambda: scal("lambda", 1.0),
            beta: scal("beta", 0.0),
            objective: self.objective.unwrap_or(f64::NAN),
        })
    }
}

/// Verification report written by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub seed: u64,
    pub max_constraint_residual: f64,
    pub max_contract_membership: f64,
    /// Largest analytic robust row margin (Lemma-style reformulation);
    /// nonpositive certifies robust feasibility.
    pub worst_case_margin: f64,
    /// Analytic surrogate objective recomputed from the solution blocks.
    pub expected_cost: f64,
    pub surrogate_mc_mean: f64,
    pub surrogate_mc_stderr: f64,
    pub true_loop_mc_mean: f64,
    pub true_loop_mc_stderr: f64,
    /// Gap between the surrogate objective and the true-loop estimate
    /// (reported, no bound asserted).
    pub surrogate_gap: f64,
}
