//! Solver-agnostic conic program representation.
//!
//! Decision variables are flat scalar slots; named blocks (scalars,
//! vectors, matrices) map mask-allowed entries onto slots and pin
//! everything off-mask to literal zero. All constraint matter is built
//! from [`LinExpr`] — an affine form in the slots — so nonlinearity in
//! the decision variables is unrepresentable by construction; that is the
//! degree bookkeeping behind the affinity audit.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::surrogate::PatternMask;
use crate::{Error, Result};

/// Affine expression `constant + Σ coeff·x[var]`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn variable(id: usize) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(id, 1.0)],
        }
    }

    pub fn scaled_variable(id: usize, coeff: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(id, coeff)],
        }
    }

    pub fn add_term(&mut self, id: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((id, coeff));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, factor: f64) {
        if factor == 0.0 {
            return;
        }
        self.constant += factor * other.constant;
        for &(id, c) in &other.terms {
            self.add_term(id, factor * c);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.constant *= factor;
        if factor == 0.0 {
            self.terms.clear();
        } else {
            for t in &mut self.terms {
                t.1 *= factor;
            }
        }
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn compact(&mut self) {
        if self.terms.is_empty() {
            return;
        }
        self.terms.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(id, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == id => last.1 += c,
                _ => out.push((id, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    /// True when the expression is literally `0` after compaction.
    pub fn is_structural_zero(&mut self) -> bool {
        self.compact();
        self.constant == 0.0 && self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(id, c)| c * x[id]).sum::<f64>()
    }
}

/// A named block of decision-variable slots; `None` entries are
/// structural zeros.
#[derive(Debug, Clone)]
pub enum VarBlock {
    Scalar(usize),
    Vector { ids: Vec<Option<usize>> },
    Matrix { rows: usize, cols: usize, ids: Vec<Option<usize>> },
}

impl VarBlock {
    pub fn num_slots(&self) -> usize {
        match self {
            VarBlock::Scalar(_) => 1,
            VarBlock::Vector { ids } => ids.iter().flatten().count(),
            VarBlock::Matrix { ids, .. } => ids.iter().flatten().count(),
        }
    }

    fn extract(&self, x: &[f64]) -> VarValue {
        match self {
            VarBlock::Scalar(id) => VarValue::Scalar(x[*id]),
            VarBlock::Vector { ids } => VarValue::Vector(
                ids.iter().map(|id| id.map_or(0.0, |i| x[i])).collect(),
            ),
            VarBlock::Matrix { rows, cols, ids } => VarValue::Matrix {
                rows: *rows,
                cols: *cols,
                data: ids.iter().map(|id| id.map_or(0.0, |i| x[i])).collect(),
            },
        }
    }
}

/// Matrix of affine expressions, row-major.
#[derive(Debug, Clone)]
pub struct ExprMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<LinExpr>,
}

impl ExprMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![LinExpr::zero(); rows * cols],
        }
    }

    pub fn from_const(m: &DMatrix<f64>) -> Self {
        let mut e = Self::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                e.entries[r * m.ncols() + c].constant = m[(r, c)];
            }
        }
        e
    }

    /// Column vector of expressions.
    pub fn from_const_vector(v: &DVector<f64>) -> Self {
        let mut e = Self::zeros(v.len(), 1);
        for r in 0..v.len() {
            e.entries[r].constant = v[r];
        }
        e
    }

    pub fn from_block(block: &VarBlock) -> Self {
        match block {
            VarBlock::Scalar(id) => {
                let mut e = Self::zeros(1, 1);
                e.entries[0] = LinExpr::variable(*id);
                e
            }
            VarBlock::Vector { ids } => {
                let mut e = Self::zeros(ids.len(), 1);
                for (r, id) in ids.iter().enumerate() {
                    if let Some(i) = id {
                        e.entries[r] = LinExpr::variable(*i);
                    }
                }
                e
            }
            VarBlock::Matrix { rows, cols, ids } => {
                let mut e = Self::zeros(*rows, *cols);
                for (k, id) in ids.iter().enumerate() {
                    if let Some(i) = id {
                        e.entries[k] = LinExpr::variable(*i);
                    }
                }
                e
            }
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> &LinExpr {
        &self.entries[r * self.cols + c]
    }

    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut LinExpr {
        &mut self.entries[r * self.cols + c]
    }

    pub fn into_entries(self) -> Vec<LinExpr> {
        self.entries
    }

    /// `const_m * self`.
    pub fn premul(&self, m: &DMatrix<f64>) -> ExprMatrix {
        assert_eq!(m.ncols(), self.rows);
        let mut out = ExprMatrix::zeros(m.nrows(), self.cols);
        for r in 0..m.nrows() {
            for k in 0..self.rows {
                let w = m[(r, k)];
                if w == 0.0 {
                    continue;
                }
                for c in 0..self.cols {
                    out.entries[r * out.cols + c].add_scaled(self.entry(k, c), w);
                }
            }
        }
        out.compact();
        out
    }

    /// `self * const_m`.
    pub fn postmul(&self, m: &DMatrix<f64>) -> ExprMatrix {
        assert_eq!(self.cols, m.nrows());
        let mut out = ExprMatrix::zeros(self.rows, m.ncols());
        for r in 0..self.rows {
            for k in 0..self.cols {
                let src = self.entry(r, k);
                if src.constant == 0.0 && src.terms.is_empty() {
                    continue;
                }
                for c in 0..m.ncols() {
                    out.entry_mut(r, c).add_scaled(src, m[(k, c)]);
                }
            }
        }
        out.compact();
        out
    }

    pub fn add(&self, other: &ExprMatrix) -> ExprMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (dst, src) in out.entries.iter_mut().zip(&other.entries) {
            dst.add_scaled(src, 1.0);
            dst.compact();
        }
        out
    }

    pub fn sub(&self, other: &ExprMatrix) -> ExprMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (dst, src) in out.entries.iter_mut().zip(&other.entries) {
            dst.add_scaled(src, -1.0);
            dst.compact();
        }
        out
    }

    /// `scalar_expr * const_m`, entrywise.
    pub fn scale_const_by_expr(m: &DMatrix<f64>, s: &LinExpr) -> ExprMatrix {
        let mut out = ExprMatrix::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.entry_mut(r, c).add_scaled(s, m[(r, c)]);
            }
        }
        out
    }

    /// Gather rows through a selection projector (`Π M`).
    pub fn gather_rows(&self, pi: &crate::infograph::Projector) -> ExprMatrix {
        assert_eq!(pi.ncols(), self.rows);
        let mut out = ExprMatrix::zeros(pi.nrows(), self.cols);
        for r in 0..pi.nrows() {
            let src = pi.selected(r);
            for c in 0..self.cols {
                *out.entry_mut(r, c) = self.entry(src, c).clone();
            }
        }
        out
    }

    /// Gather columns through a selection projector (`M Πᵀ`).
    pub fn gather_cols(&self, pi: &crate::infograph::Projector) -> ExprMatrix {
        assert_eq!(pi.ncols(), self.cols);
        let mut out = ExprMatrix::zeros(self.rows, pi.nrows());
        for c in 0..pi.nrows() {
            let src = pi.selected(c);
            for r in 0..self.rows {
                *out.entry_mut(r, c) = self.entry(r, src).clone();
            }
        }
        out
    }

    pub fn transpose(&self) -> ExprMatrix {
        let mut out = ExprMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.entry_mut(c, r) = self.entry(r, c).clone();
            }
        }
        out
    }

    fn compact(&mut self) {
        for e in &mut self.entries {
            e.compact();
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.entry(r, c).eval(x))
    }
}

/// `‖vector‖₂ ≤ bound` with both sides affine.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub bound: LinExpr,
    pub vector: Vec<LinExpr>,
}

/// Affine symmetric matrix required positive semidefinite; entries stored
/// as the upper triangle in column-major order (the svec layout,
/// unscaled).
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub dim: usize,
    pub entries: Vec<LinExpr>,
}

impl LmiConstraint {
    pub fn entry_index(r: usize, c: usize) -> usize {
        debug_assert!(r <= c);
        c * (c + 1) / 2 + r
    }

    /// Evaluate the full symmetric matrix at a solution vector.
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for c in 0..self.dim {
            for r in 0..=c {
                let v = self.entries[Self::entry_index(r, c)].eval(x);
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }
}

/// Solver-agnostic conic program: masked variables, affine equalities and
/// inequalities, second-order cones, linear matrix inequalities, and a
/// convex quadratic objective given as a sum of squared norms of affine
/// vectors.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    blocks: BTreeMap<String, VarBlock>,
    pub equalities: Vec<LinExpr>,
    pub inequalities: Vec<LinExpr>,
    pub socs: Vec<SocConstraint>,
    pub lmis: Vec<LmiConstraint>,
    pub objective: Vec<Vec<LinExpr>>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn fresh_var(&mut self) -> usize {
        let id = self.num_vars;
        self.num_vars += 1;
        id
    }

    pub fn register_scalar(&mut self, name: &str) -> VarBlock {
        let block = VarBlock::Scalar(self.fresh_var());
        self.blocks.insert(name.to_string(), block.clone());
        block
    }

    pub fn register_vector(&mut self, name: &str, len: usize, mask: Option<&[bool]>) -> VarBlock {
        let ids = (0..len)
            .map(|k| match mask {
                Some(m) if !m[k] => None,
                _ => Some(self.fresh_var()),
            })
            .collect();
        let block = VarBlock::Vector { ids };
        self.blocks.insert(name.to_string(), block.clone());
        block
    }

    pub fn register_matrix(&mut self, name: &str, mask: &PatternMask) -> VarBlock {
        let (rows, cols) = (mask.nrows(), mask.ncols());
        let mut ids = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                ids.push(if mask.is_allowed(r, c) {
                    Some(self.fresh_var())
                } else {
                    None
                });
            }
        }
        let block = VarBlock::Matrix { rows, cols, ids };
        self.blocks.insert(name.to_string(), block.clone());
        block
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.get(name)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&String, &VarBlock)> {
        self.blocks.iter()
    }

    pub fn add_equality(&mut self, mut e: LinExpr) {
        e.compact();
        self.equalities.push(e);
    }

    /// `e ≥ 0`.
    pub fn add_inequality(&mut self, mut e: LinExpr) {
        e.compact();
        self.inequalities.push(e);
    }

    pub fn add_soc(&mut self, bound: LinExpr, vector: Vec<LinExpr>) {
        self.socs.push(SocConstraint { bound, vector });
    }

    pub fn add_lmi(&mut self, lmi: LmiConstraint) {
        assert_eq!(lmi.entries.len(), lmi.dim * (lmi.dim + 1) / 2);
        self.lmis.push(lmi);
    }

    /// Add `‖vector‖²` to the objective.
    pub fn add_sq_norm_objective(&mut self, vector: Vec<LinExpr>) {
        self.objective.push(vector);
    }

    /// Objective value at a solution vector.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .flat_map(|v| v.iter())
            .map(|e| {
                let val = e.eval(x);
                val * val
            })
            .sum()
    }

    /// Structural audit: every referenced slot exists and every
    /// coefficient is finite. Affinity itself is guaranteed by the
    /// expression type.
    pub fn audit(&self) -> Result<()> {
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            if !e.constant.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "non-finite constant in {what}"
                )));
            }
            for &(id, c) in &e.terms {
                if id >= self.num_vars {
                    return Err(Error::SolverFailure(format!(
                        "unknown variable slot {id} in {what}"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::SolverFailure(format!(
                        "non-finite coefficient in {what}"
                    )));
                }
            }
            Ok(())
        };
        for e in &self.equalities {
            check(e, "equality")?;
        }
        for e in &self.inequalities {
            check(e, "inequality")?;
        }
        for s in &self.socs {
            check(&s.bound, "soc bound")?;
            for e in &s.vector {
                check(e, "soc vector")?;
            }
        }
        for l in &self.lmis {
            for e in &l.entries {
                check(e, "lmi")?;
            }
        }
        for v in &self.objective {
            for e in v {
                check(e, "objective")?;
            }
        }
        Ok(())
    }

    /// Extract named solution values from the raw solver vector.
    pub fn extract_values(&self, x: &[f64]) -> BTreeMap<String, VarValue> {
        self.blocks
            .iter()
            .map(|(name, block)| (name.clone(), block.extract(x)))
            .collect()
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure(String),
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Optimal)
    }

    pub fn as_str(&self) -> &str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure(_) => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named solution value with shape metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum VarValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix { rows: usize, cols: usize, data: Vec<f64> },
}

impl VarValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            VarValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<DVector<f64>> {
        match self {
            VarValue::Vector(v) => Some(DVector::from_vec(v.clone())),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            VarValue::Matrix { rows, cols, data } => Some(DMatrix::from_fn(*rows, *cols, |r, c| {
                data[r * cols + c]
            })),
            _ => None,
        }
    }
}

/// Solver report: status, objective, named variable values, and solver
/// diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: BTreeMap<String, VarValue>,
    pub iterations: usize,
    pub solve_time_s: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SolverReport {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(VarValue::as_scalar)
    }

    pub fn vector(&self, name: &str) -> Option<DVector<f64>> {
        self.values.get(name).and_then(VarValue::as_vector)
    }

    pub fn matrix(&self, name: &str) -> Option<DMatrix<f64>> {
        self.values.get(name).and_then(VarValue::as_matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn expr_compaction() {
        let mut e = LinExpr::zero();
        e.add_term(3, 1.0);
        e.add_term(1, 2.0);
        e.add_term(3, -1.0);
        e.compact();
        assert_eq!(e.terms, vec![(1, 2.0)]);
        assert!(!e.clone().is_structural_zero());
        e.add_term(1, -2.0);
        assert!(e.is_structural_zero());
    }

    #[test]
    fn expr_matrix_products() {
        // 2x2 variable matrix times constants on both sides.
        let block = VarBlock::Matrix {
            rows: 2,
            cols: 2,
            ids: vec![Some(0), Some(1), None, Some(2)],
        };
        let e = ExprMatrix::from_block(&block);
        let left = dmatrix![2.0, 0.0; 1.0, 1.0];
        let right = dmatrix![1.0, 1.0; 0.0, 3.0];
        let prod = e.premul(&left).postmul(&right);
        // x = [x0, x1, x2] stands for entries (0,0), (0,1), (1,1).
        let x = [1.0, 2.0, 3.0];
        let m = dmatrix![1.0, 2.0; 0.0, 3.0];
        let expect = left * m * right;
        assert_eq!(prod.eval(&x), expect);
    }

    #[test]
    fn program_registration_and_eval() {
        let mut p = ConicProgram::new();
        let lam = p.register_scalar("lambda");
        let mask = [true, false, true];
        let v = p.register_vector("v", 3, Some(&mask));
        assert_eq!(p.num_vars(), 3);
        assert_eq!(lam.num_slots(), 1);
        assert_eq!(v.num_slots(), 2);
        let x = [2.0, 5.0, 7.0];
        let vals = p.extract_values(&x);
        assert_eq!(vals["lambda"].as_scalar(), Some(2.0));
        assert_eq!(
            vals["v"].as_vector().unwrap(),
            nalgebra::dvector![5.0, 0.0, 7.0]
        );
    }

    #[test]
    fn lmi_entry_indexing() {
        // Upper triangle, column-major: (0,0), (0,1), (1,1), (0,2), ...
        assert_eq!(LmiConstraint::entry_index(0, 0), 0);
        assert_eq!(LmiConstraint::entry_index(0, 1), 1);
        assert_eq!(LmiConstraint::entry_index(1, 1), 2);
        assert_eq!(LmiConstraint::entry_index(0, 2), 3);
        assert_eq!(LmiConstraint::entry_index(2, 2), 5);
    }

    #[test]
    fn audit_rejects_bad_slot() {
        let mut p = ConicProgram::new();
        p.register_scalar("a");
        let mut e = LinExpr::zero();
        e.add_term(5, 1.0);
        p.add_equality(e);
        assert!(p.audit().is_err());
    }
}
