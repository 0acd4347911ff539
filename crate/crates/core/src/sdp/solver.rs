//! Conic-solver port: lowering to cone-partitioned standard form and the
//! default interior-point backend.
//!
//! Standard form: `min qᵀx  s.t.  A x + s = b,  s ∈ K`, with `K` a product
//! of zero, nonnegative, second-order, and PSD-triangle cones, emitted in
//! that order. The convex quadratic objective of a [`ConicProgram`] is
//! lowered into per-term epigraph second-order cones
//! (`‖v‖² ≤ t  ⇔  ‖(2v, 1−t)‖ ≤ 1+t`), so backends only ever see a
//! linear objective.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::{ConicProgram, LinExpr, SolveStatus, SolverReport};
use crate::{Error, Result};

/// Options forwarded to the backend.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Feasibility/gap tolerance. KKT residuals of an optimal report are
    /// required to fall below this value.
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Let the backend decompose chordal PSD cone sparsity.
    pub chordal: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
            chordal: false,
        }
    }
}

/// Cone blocks of the standard form, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConeSpec {
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
    /// Side length of the symmetric matrix (triangle dimension n(n+1)/2).
    PsdTriangle(usize),
}

/// Cone-partitioned standard form `min qᵀx s.t. Ax + s = b, s ∈ K`.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub num_vars: usize,
    pub q: Vec<f64>,
    /// Triplets `(row, col, value)` of `A`.
    pub a_triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<ConeSpec>,
    pub num_rows: usize,
}

/// Raw backend outcome.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub solve_time_s: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Abstract conic-solver backend.
pub trait ConicSolver {
    fn name(&self) -> &'static str;
    fn solve_standard(&self, form: &StandardForm, opts: &SolverOptions) -> Result<RawSolution>;
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Lower a conic program to standard form. Returns the form; epigraph
/// variables occupy slots `program.num_vars()..form.num_vars`.
pub fn lower(program: &ConicProgram) -> StandardForm {
    let mut num_vars = program.num_vars();
    let mut q = vec![0.0; num_vars];
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0usize;

    // Constraint expression e enters as s_row = b_row - a_row·x with
    // s = e(x) + slack semantics: coefficients are negated.
    let push_expr = |a: &mut Vec<(usize, usize, f64)>,
                         b: &mut Vec<f64>,
                         row: &mut usize,
                         e: &LinExpr,
                         scale: f64| {
        for &(id, c) in &e.terms {
            a.push((*row, id, -scale * c));
        }
        b.push(scale * e.constant);
        *row += 1;
    };

    if !program.equalities.is_empty() {
        for e in &program.equalities {
            push_expr(&mut a, &mut b, &mut row, e, 1.0);
        }
        cones.push(ConeSpec::Zero(program.equalities.len()));
    }
    if !program.inequalities.is_empty() {
        for e in &program.inequalities {
            push_expr(&mut a, &mut b, &mut row, e, 1.0);
        }
        cones.push(ConeSpec::Nonneg(program.inequalities.len()));
    }
    for soc in &program.socs {
        push_expr(&mut a, &mut b, &mut row, &soc.bound, 1.0);
        for e in &soc.vector {
            push_expr(&mut a, &mut b, &mut row, e, 1.0);
        }
        cones.push(ConeSpec::Soc(soc.vector.len() + 1));
    }
    // Objective epigraphs: one rotated-cone-as-SOC per squared-norm term.
    for term in &program.objective {
        let t = num_vars;
        num_vars += 1;
        q.push(1.0);
        // s0 = 1 + t
        a.push((row, t, -1.0));
        b.push(1.0);
        row += 1;
        // middle = 2 v(x)
        for e in term {
            push_expr(&mut a, &mut b, &mut row, e, 2.0);
        }
        // last = 1 - t
        a.push((row, t, 1.0));
        b.push(1.0);
        row += 1;
        cones.push(ConeSpec::Soc(term.len() + 2));
    }
    for lmi in &program.lmis {
        // svec layout: upper triangle column-major, off-diagonals × √2.
        for c in 0..lmi.dim {
            for r in 0..=c {
                let e = &lmi.entries[super::program::LmiConstraint::entry_index(r, c)];
                let scale = if r == c { 1.0 } else { SQRT2 };
                push_expr(&mut a, &mut b, &mut row, e, scale);
            }
        }
        cones.push(ConeSpec::PsdTriangle(lmi.dim));
    }

    StandardForm {
        num_vars,
        q,
        a_triplets: a,
        b,
        cones,
        num_rows: row,
    }
}

/// Solve a conic program with the given backend, producing a typed report.
pub fn solve_with(
    program: &ConicProgram,
    backend: &dyn ConicSolver,
    opts: &SolverOptions,
) -> Result<SolverReport> {
    program.audit()?;
    let form = lower(program);
    let raw = backend.solve_standard(&form, opts)?;
    let report = match raw.status {
        SolveStatus::Optimal => {
            let values = program.extract_values(&raw.x);
            SolverReport {
                status: SolveStatus::Optimal,
                // Recomputed from the squared-norm terms rather than read
                // from the epigraph objective.
                objective: Some(program.objective_value(&raw.x)),
                values,
                iterations: raw.iterations,
                solve_time_s: raw.solve_time_s,
                primal_residual: raw.primal_residual,
                dual_residual: raw.dual_residual,
            }
        }
        status => SolverReport {
            status,
            objective: None,
            values: Default::default(),
            iterations: raw.iterations,
            solve_time_s: raw.solve_time_s,
            primal_residual: raw.primal_residual,
            dual_residual: raw.dual_residual,
        },
    };
    Ok(report)
}

/// Solve with the default backend.
pub fn solve(program: &ConicProgram, opts: &SolverOptions) -> Result<SolverReport> {
    solve_with(program, &ClarabelBackend, opts)
}

/// Default backend: the Clarabel interior-point conic solver.
pub struct ClarabelBackend;

impl ConicSolver for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve_standard(&self, form: &StandardForm, opts: &SolverOptions) -> Result<RawSolution> {
        let n = form.num_vars;
        let m = form.num_rows;
        let a = csc_from_triplets(m, n, &form.a_triplets)?;
        let p = CscMatrix::new(n, n, vec![0; n + 1], vec![], vec![]);
        let cones: Vec<SupportedConeT<f64>> = form
            .cones
            .iter()
            .map(|c| match *c {
                ConeSpec::Zero(k) => SupportedConeT::ZeroConeT(k),
                ConeSpec::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                ConeSpec::Soc(k) => SupportedConeT::SecondOrderConeT(k),
                ConeSpec::PsdTriangle(k) => SupportedConeT::PSDTriangleConeT(k),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(opts.verbose)
            .max_iter(opts.max_iter)
            .tol_gap_abs(opts.tol)
            .tol_gap_rel(opts.tol)
            .tol_feas(opts.tol)
            .chordal_decomposition_enable(opts.chordal)
            .build()
            .map_err(|e| Error::SolverFailure(format!("settings: {e}")))?;

        let mut solver = DefaultSolver::new(&p, &form.q, &a, &form.b, &cones, settings);
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            other => SolveStatus::NumericalFailure(format!("{other:?}")),
        };
        Ok(RawSolution {
            status,
            x: solver.solution.x.clone(),
            iterations: solver.info.iterations as usize,
            solve_time_s: solver.info.solve_time,
            primal_residual: solver.info.res_primal,
            dual_residual: solver.info.res_dual,
        })
    }
}

/// Sorted, duplicate-merged CSC assembly.
fn csc_from_triplets(m: usize, n: usize, triplets: &[(usize, usize, f64)]) -> Result<CscMatrix> {
    let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
    sorted.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(sorted.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut prev: Option<(usize, usize)> = None;
    for &(r, c, v) in &sorted {
        if r >= m || c >= n {
            return Err(Error::SolverFailure(format!(
                "triplet ({r},{c}) outside {m}x{n}"
            )));
        }
        if prev == Some((c, r)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        prev = Some((c, r));
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    Ok(CscMatrix::new(m, n, colptr, rowval, nzval))
}
