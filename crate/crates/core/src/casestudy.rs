//! Built-in three-subsystem benchmark used by the `casestudy` and `sweep`
//! commands and by the verification suite.
//!
//! The system is time-invariant with scalar subsystem states and inputs,
//! a unit-ball disturbance support over the whole trajectory (initial
//! state included), box constraints on states and inputs, and periodic
//! diagonal costs. Two information graphs are provided: a transitive one
//! (`GI1`, partially nested) and a bare chain (`GI2`, nonclassical).

use nalgebra::{dmatrix, DMatrix};

use crate::infograph::DirectedGraph;
use crate::model::{ConstraintSet, CostSpec, EllipsoidalUncertainty, SystemModel};
use crate::problem::ProblemInstance;
use crate::Result;

/// Default horizon of the benchmark.
pub const HORIZON: usize = 15;

/// Input box bound `‖u‖_∞ ≤ 2.5`.
pub const U_MAX: f64 = 2.5;

/// Names under which the two information graphs are reported.
pub const GRAPH_NAMES: [&str; 2] = ["GI1", "GI2"];

pub fn dynamics_a() -> DMatrix<f64> {
    dmatrix![
        0.5, 0.0, 0.0;
        0.5, 0.5, 0.0;
        0.5, 1.2, -1.2;
    ]
}

pub fn dynamics_b() -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::dvector![0.1, 1.0, 1.0])
}

pub fn system_model(horizon: usize) -> Result<SystemModel> {
    SystemModel::time_invariant(
        vec![1, 1, 1],
        vec![1, 1, 1],
        horizon,
        dynamics_a(),
        dynamics_b(),
    )
}

/// Transitive information graph: `1→2`, `2→3`, `1→3` plus self-loops
/// (0-based indices internally).
pub fn info_graph_1() -> DirectedGraph {
    DirectedGraph::from_edges(3, [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]).unwrap()
}

/// Chain information graph: `1→2`, `2→3` plus self-loops.
pub fn info_graph_2() -> DirectedGraph {
    DirectedGraph::from_edges(3, [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)]).unwrap()
}

pub fn graph_by_name(name: &str) -> Option<DirectedGraph> {
    match name {
        "GI1" => Some(info_graph_1()),
        "GI2" => Some(info_graph_2()),
        _ => None,
    }
}

/// Uniform disturbance over the unit ball in trajectory space.
pub fn uncertainty(horizon: usize) -> Result<EllipsoidalUncertainty> {
    let dim = 3 * (horizon + 1);
    EllipsoidalUncertainty::uniform(DMatrix::identity(dim, dim))
}

pub fn cost(model: &SystemModel) -> Result<CostSpec> {
    CostSpec::from_periodic_weights(model, &[0.1, 0.1, 2.0], &[5.0, 5.0, 1.0])
}

pub fn constraints(model: &SystemModel, x_max: f64) -> ConstraintSet {
    ConstraintSet::inf_norm_box(model.traj_state_dim(), model.traj_input_dim(), x_max, U_MAX)
}

/// Assemble a full problem instance for the given graph name and state
/// bound.
pub fn instance(graph: &str, x_max: f64) -> Result<ProblemInstance> {
    let model = system_model(HORIZON)?;
    let info_graph = graph_by_name(graph)
        .ok_or_else(|| crate::Error::Input(format!("unknown case-study graph '{graph}'")))?;
    let constraints = constraints(&model, x_max);
    let cost = cost(&model)?;
    let uncertainty = uncertainty(HORIZON)?;
    Ok(ProblemInstance {
        model,
        uncertainty,
        constraints,
        cost,
        info_graph,
    })
}
