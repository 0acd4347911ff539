//! Synthesis of robust decentralized affine controllers for constrained
//! linear time-varying networked systems via assume-guarantee contracts.
//!
//! The crate is organized around the synthesis pipeline:
//!
//! * [`model`] — networked LTV system, disturbance support, constraints,
//!   cost, and the lifted trajectory operators `x = B u + L w`.
//! * [`infograph`] — information-structure analysis: physical coupling
//!   graphs, the nested/coupling partition of each subsystem's
//!   in-neighborhood, and the coupling-state projector.
//! * [`surrogate`] — surrogate trajectory operators in which
//!   information-coupling states are replaced by fictitious disturbances,
//!   plus the block-sparsity patterns of the admissible feedback gains.
//! * [`sdp`] — assembly of the joint policy/contract semidefinite program
//!   and a pluggable conic-solver backend.
//! * [`policy`] — recovery of the implementable affine policy, closed-loop
//!   simulation, and worst-case / Monte-Carlo verification.
//! * [`problem`] — JSON problem-file schema and end-to-end preparation.
//! * [`casestudy`] — the built-in three-subsystem benchmark system.

pub mod block;
pub mod casestudy;
pub mod infograph;
pub mod linalg;
pub mod model;
pub mod policy;
pub mod problem;
pub mod sampling;
pub mod sdp;
pub mod surrogate;

use thiserror::Error;

/// Errors produced by model validation, assembly, solving, and recovery.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix does not match the dimensions implied by the block layout.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// The horizon is zero.
    #[error("horizon must satisfy T >= 1")]
    EmptyHorizon,

    /// A matrix required to be positive definite is not.
    #[error("{context}: matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { context: String, min_eig: f64 },

    /// Graphs over the same vertex set disagree on the node count.
    #[error("node count mismatch: {0} vs {1}")]
    NodeCountMismatch(usize, usize),

    /// Disturbance reconstruction requested for a subsystem outside N(i).
    #[error("subsystem {j} is not in the nested set N({i})")]
    NotNested { i: usize, j: usize },

    /// A matrix violates its block-sparsity pattern.
    #[error("pattern violation in {context}: entry ({row},{col}) = {value:e} outside mask")]
    PatternViolation {
        context: String,
        row: usize,
        col: usize,
        value: f64,
    },

    /// Contract machinery invoked on a partially nested instance (C = ∅).
    #[error("coupling set is empty; the contract constraints are vacuous")]
    EmptyCouplingSet,

    /// Ellipsoid-sum containment check called with alpha outside (0, 1).
    #[error("alpha = {0} outside the admissible range")]
    AlphaOutOfRange(f64),

    /// The conic solver failed with a diagnostic.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Policy recovery requested from a report whose status is not optimal.
    #[error("no solution available: solver status is {0}")]
    NotSolved(String),

    /// A feedback gain has a nonzero block that looks at future states.
    #[error("causality violation: {context} has nonzero block (t={t}, s={s}) with s > t")]
    CausalityViolation { context: String, t: usize, s: usize },

    /// An ellipsoid shape matrix is numerically singular.
    #[error("singular ellipsoid shape matrix: {0}")]
    SingularShape(String),

    /// A trajectory coordinate index is out of range.
    #[error("coordinate {0} out of range (dimension {1})")]
    CoordOutOfRange(usize, usize),

    /// Malformed problem description file.
    #[error("invalid problem file: {0}")]
    Input(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
