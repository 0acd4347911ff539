//! Surrogate dynamics and feedback-gain sparsity patterns.
//!
//! The surrogate state equation replaces, in the update of subsystem `i`,
//! every coupling state `x̃_j(t)` with `j ∈ C(i)` by the fictitious value
//! `v_j(t)`. The substitution set depends on the row `i`: the same column
//! `j` may feed row `i` through the fictitious signal and row `i'` through
//! the surrogate state. Lifting over the horizon yields
//! `x̃ = B̃ ũ + L̃ w + H̃ v_C` with all three operators lower block
//! triangular in time.
//!
//! The admissible affine gains live in block-sparsity subspaces:
//! `Q^w` reads nested disturbances (`j ∈ N(i)`, `t ≥ s`), `Q^v`/`Q^ξ` read
//! fictitious signals (`j ∈ C(i)`, `t ≥ s`, including the current step),
//! and the contract transform `Z = λI − Y` uses a strictly block lower
//! triangular `Y` whose `(i, j)` blocks vanish unless
//! `V_C⁺(i) ⊆ V_C⁺(j)` in the coupling graph. The latter condition makes
//! the subspace of `Q^v` gains invariant under right multiplication by
//! `Y`, which is what turns the contract co-optimization into a
//! semidefinite program.

use nalgebra::DMatrix;

use crate::block::{set_block, BlockLayout};
use crate::infograph::{Decomposition, DirectedGraph};
use crate::model::SystemModel;
use crate::{Error, Result};

/// Lifted operators of the surrogate identity `x̃ = B̃ ũ + L̃ w + H̃ v_C`.
#[derive(Debug, Clone)]
pub struct SurrogateOperators {
    pub btil: DMatrix<f64>,
    pub ltil: DMatrix<f64>,
    pub htil: DMatrix<f64>,
}

/// Build the surrogate trajectory operators for a model and decomposition.
pub fn build_surrogate_operators(
    model: &SystemModel,
    d: &Decomposition,
) -> Result<SurrogateOperators> {
    crate::model::validate_system(model)?;
    if d.num_nodes() != model.num_subsystems() {
        return Err(Error::NodeCountMismatch(
            model.num_subsystems(),
            d.num_nodes(),
        ));
    }
    let horizon = model.horizon();
    let n_x = model.state_dim();
    let n_xc = d.coupling_state_dim(model);

    let rows = BlockLayout::repeated(&[n_x], horizon + 1);
    let cols_w = BlockLayout::repeated(&[n_x], horizon + 1);
    let cols_u = model.input_traj_blocks();
    let cols_v = BlockLayout::repeated(&[n_xc], horizon + 1);

    let mut btil = DMatrix::zeros(rows.total(), cols_u.total());
    let mut ltil = DMatrix::zeros(rows.total(), cols_w.total());
    let mut htil = DMatrix::zeros(rows.total(), cols_v.total());

    // phis[s] = Φ̃(t, s) for the current row block t, built from the
    // coupling-substituted dynamics Ã(t).
    let mut phis: Vec<DMatrix<f64>> = vec![DMatrix::identity(n_x, n_x)];
    set_block(&mut ltil, &rows, &cols_w, 0, 0, phis[0].as_view());

    for t in 1..=horizon {
        let a_prev = substituted_dynamics(model, d, t - 1);
        for phi in phis.iter_mut() {
            *phi = &a_prev * &*phi;
        }
        phis.push(DMatrix::identity(n_x, n_x));
        for (s, phi) in phis.iter().enumerate() {
            set_block(&mut ltil, &rows, &cols_w, t, s, phi.as_view());
        }
        for s_u in 0..t {
            let blk = &phis[s_u + 1] * model.b(s_u);
            set_block(&mut btil, &rows, &cols_u, t, s_u, blk.as_view());
        }
        if n_xc > 0 {
            for s_v in 0..t {
                let blk = &phis[s_v + 1] * coupling_injection(model, d, s_v);
                set_block(&mut htil, &rows, &cols_v, t, s_v, blk.as_view());
            }
        }
    }
    Ok(SurrogateOperators { btil, ltil, htil })
}

/// `Ã(t)`: the dynamics with blocks `A_{ij}(t)`, `j ∈ C(i)`, zeroed out.
fn substituted_dynamics(model: &SystemModel, d: &Decomposition, t: usize) -> DMatrix<f64> {
    let mut a = model.a(t).clone();
    let xs = model.state_blocks();
    for i in 0..model.num_subsystems() {
        for &j in d.coupling(i) {
            a.view_mut(
                (xs.offset(i), xs.offset(j)),
                (model.nx()[i], model.nx()[j]),
            )
            .fill(0.0);
        }
    }
    a
}

/// `D(t)`: the `n_x × n_x^C` map injecting `v_C(t)` into the surrogate
/// update; row block `i` carries `A_{ij}(t)` in the column block of each
/// `j ∈ C(i)`.
fn coupling_injection(model: &SystemModel, d: &Decomposition, t: usize) -> DMatrix<f64> {
    let n_xc = d.coupling_state_dim(model);
    let mut m = DMatrix::zeros(model.state_dim(), n_xc);
    let xs = model.state_blocks();
    let mut col = 0;
    for &j in d.coupling_union() {
        for i in 0..model.num_subsystems() {
            if d.coupling(i).contains(&j) {
                m.view_mut((xs.offset(i), col), (model.nx()[i], model.nx()[j]))
                    .copy_from(&model.a_block(t, i, j));
            }
        }
        col += model.nx()[j];
    }
    m
}

/// A boolean entry mask over a trajectory-level matrix, with the time
/// block boundaries kept for rendering and enumeration.
#[derive(Debug, Clone)]
pub struct PatternMask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
    row_time: BlockLayout,
    col_time: BlockLayout,
}

impl PatternMask {
    /// Mask allowing entire time blocks `(t, s)` with `s ≤ t` (or `s < t`
    /// when `strict`); used for the derived trajectory maps `P^w`, `P^ξ`,
    /// which are lower block triangular by construction.
    pub fn time_lower_triangular(
        row_time: BlockLayout,
        col_time: BlockLayout,
        strict: bool,
    ) -> Self {
        let mut mask = Self::new(row_time, col_time);
        for tb in 0..mask.row_time.num_blocks() {
            let upper = if strict { tb } else { tb + 1 };
            for sb in 0..upper.min(mask.col_time.num_blocks()) {
                for r in mask.row_time.range(tb) {
                    for c in mask.col_time.range(sb) {
                        mask.allow(r, c);
                    }
                }
            }
        }
        mask
    }

    fn new(row_time: BlockLayout, col_time: BlockLayout) -> Self {
        Self {
            rows: row_time.total(),
            cols: col_time.total(),
            allowed: vec![false; row_time.total() * col_time.total()],
            row_time,
            col_time,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_allowed(&self, r: usize, c: usize) -> bool {
        self.allowed[r * self.cols + c]
    }

    fn allow(&mut self, r: usize, c: usize) {
        self.allowed[r * self.cols + c] = true;
    }

    /// Row-major list of free entries; these become decision variables.
    pub fn free_entries(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.is_allowed(r, c) {
                    v.push((r, c));
                }
            }
        }
        v
    }

    pub fn num_free(&self) -> usize {
        self.allowed.iter().filter(|&&b| b).count()
    }

    /// Verify that every off-mask entry of `m` is at most `tol` in
    /// magnitude.
    pub fn check_conforms(&self, m: &DMatrix<f64>, tol: f64, context: &str) -> Result<()> {
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(Error::DimensionMismatch {
                context: context.to_string(),
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.is_allowed(r, c) && m[(r, c)].abs() > tol {
                    return Err(Error::PatternViolation {
                        context: context.to_string(),
                        row: r,
                        col: c,
                        value: m[(r, c)],
                    });
                }
            }
        }
        Ok(())
    }

    /// Zero out off-mask entries.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| {
            if self.is_allowed(r, c) {
                m[(r, c)]
            } else {
                0.0
            }
        })
    }

    /// Time-block grid rendering: `#` where the block contains free
    /// entries, `.` where it is structurally zero.
    pub fn block_art(&self) -> String {
        let mut out = String::new();
        for tb in 0..self.row_time.num_blocks() {
            for sb in 0..self.col_time.num_blocks() {
                let any = self
                    .row_time
                    .range(tb)
                    .any(|r| self.col_time.range(sb).any(|c| self.is_allowed(r, c)));
                out.push(if any { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Mask for `Q^w`: entry blocks `(t, s, i, j)` free iff `j ∈ N(i)` and
/// `t ≥ s`. Column block `s` corresponds to `w(s-1)`, with `s = 0` the
/// initial state, so `u(t)` reads `w(-1), …, w(t-1)`.
pub fn pattern_qn(d: &Decomposition, model: &SystemModel) -> PatternMask {
    gain_pattern(model, |i, j| d.nested(i).contains(&j))
}

/// Mask for `Q^v` / `Q^ξ`: entry blocks free iff `j ∈ C(i)` and `t ≥ s`;
/// `u(t)` may read the current fictitious value `v_C(t)`.
pub fn pattern_qc(d: &Decomposition, model: &SystemModel) -> PatternMask {
    gain_pattern(model, |i, j| d.coupling(i).contains(&j))
}

fn gain_pattern(model: &SystemModel, pair_allowed: impl Fn(usize, usize) -> bool) -> PatternMask {
    let horizon = model.horizon();
    let n = model.num_subsystems();
    let row_time = model.input_traj_blocks();
    let col_time = BlockLayout::repeated(&[model.state_dim()], horizon + 1);
    let mut mask = PatternMask::new(row_time, col_time);
    let us = model.input_blocks();
    let xs = model.state_blocks();
    for t in 0..horizon {
        for s in 0..=t {
            for i in 0..n {
                for j in 0..n {
                    if !pair_allowed(i, j) {
                        continue;
                    }
                    for r in 0..model.nu()[i] {
                        for c in 0..model.nx()[j] {
                            mask.allow(
                                t * model.input_dim() + us.offset(i) + r,
                                s * model.state_dim() + xs.offset(j) + c,
                            );
                        }
                    }
                }
            }
        }
    }
    mask
}

/// Mask for `Y`: strictly lower block triangular in time, and block
/// `(i, j)` free iff `V_C⁺(i) ⊆ V_C⁺(j)` in the coupling graph.
pub fn pattern_y(g_c: &DirectedGraph, model: &SystemModel) -> PatternMask {
    let horizon = model.horizon();
    let n = model.num_subsystems();
    let time = BlockLayout::repeated(&[model.state_dim()], horizon + 1);
    let mut mask = PatternMask::new(time.clone(), time);
    let xs = model.state_blocks();
    let outs: Vec<_> = (0..n).map(|i| g_c.out_neighbors(i)).collect();
    for t in 0..=horizon {
        for s in 0..t {
            for i in 0..n {
                for j in 0..n {
                    if !outs[i].is_subset(&outs[j]) {
                        continue;
                    }
                    for r in 0..model.nx()[i] {
                        for c in 0..model.nx()[j] {
                            mask.allow(
                                t * model.state_dim() + xs.offset(i) + r,
                                s * model.state_dim() + xs.offset(j) + c,
                            );
                        }
                    }
                }
            }
        }
    }
    mask
}

/// Subspace-closure oracle: with `q` conforming to the `Q^v` mask and `y`
/// to the `Y` mask, `q · y` must conform again. The multiplication is
/// performed numerically and off-mask entries are required to vanish
/// exactly, since every contributing product carries a structural zero.
pub fn check_closure(
    q: &DMatrix<f64>,
    y: &DMatrix<f64>,
    qc_mask: &PatternMask,
    y_mask: &PatternMask,
) -> Result<bool> {
    qc_mask.check_conforms(q, 0.0, "Q")?;
    y_mask.check_conforms(y, 0.0, "Y")?;
    let product = q * y;
    Ok(qc_mask.check_conforms(&product, 0.0, "QY").is_ok())
}

/// `Z = λI − Y`.
pub fn z_matrix(lambda: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = -y.clone();
    for i in 0..z.nrows() {
        z[(i, i)] += lambda;
    }
    z
}

/// Right-multiply by `(λI − Y)⁻¹` using block forward substitution over
/// the time partition, never forming a general inverse. Requires
/// `λ > 0` and strictly block lower triangular `y`.
///
/// Solves `out (λI − Y) = q` block column by block column, starting from
/// the last: `out(:, s) = (q(:, s) + Σ_{r > s} out(:, r) Y(r, s)) / λ`.
pub fn apply_z_inverse_right(
    q: &DMatrix<f64>,
    lambda: f64,
    y: &DMatrix<f64>,
    time: &BlockLayout,
) -> DMatrix<f64> {
    assert!(lambda > 0.0, "lambda must be positive");
    assert_eq!(q.ncols(), time.total());
    assert_eq!(y.nrows(), time.total());
    let nb = time.num_blocks();
    let mut out = DMatrix::zeros(q.nrows(), q.ncols());
    for s in (0..nb).rev() {
        let (off_s, sz_s) = (time.offset(s), time.size(s));
        let mut col = q.columns(off_s, sz_s).into_owned();
        for r in (s + 1)..nb {
            let (off_r, sz_r) = (time.offset(r), time.size(r));
            let y_rs = y.view((off_r, off_s), (sz_r, sz_s));
            col += out.columns(off_r, sz_r) * y_rs;
        }
        out.columns_mut(off_s, sz_s).copy_from(&(col / lambda));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use crate::casestudy;
    use crate::infograph::{coupling_projector, decompose, physical_graphs, DEFAULT_GRAPH_TOL};
    use crate::model::build_trajectory_operators;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn case_study_decompositions() -> (SystemModel, Decomposition, Decomposition) {
        let model = casestudy::system_model(15).unwrap();
        let (g_a, g_b) = physical_graphs(&model, DEFAULT_GRAPH_TOL);
        let d1 = decompose(&casestudy::info_graph_1(), &g_a, &g_b).unwrap();
        let d2 = decompose(&casestudy::info_graph_2(), &g_a, &g_b).unwrap();
        (model, d1, d2)
    }

    /// Independent oracle: time stepping of the surrogate state equation.
    fn stepwise_surrogate(
        model: &SystemModel,
        d: &Decomposition,
        u: &DVector<f64>,
        w: &DVector<f64>,
        v_c: &DVector<f64>,
    ) -> DVector<f64> {
        let n_x = model.state_dim();
        let n_u = model.input_dim();
        let n_xc = d.coupling_state_dim(model);
        let xs = model.state_blocks();
        let coupling: Vec<usize> = d.coupling_union().iter().copied().collect();

        let mut x = DVector::zeros(model.traj_state_dim());
        x.rows_mut(0, n_x).copy_from(&w.rows(0, n_x));
        for t in 0..model.horizon() {
            let xt = x.rows(t * n_x, n_x).into_owned();
            let ut = u.rows(t * n_u, n_u).into_owned();
            let wt = w.rows((t + 1) * n_x, n_x).into_owned();
            let mut next = DVector::zeros(n_x);
            for i in 0..model.num_subsystems() {
                let mut acc = DVector::zeros(model.nx()[i]);
                for j in 0..model.num_subsystems() {
                    let contribution = if d.coupling(i).contains(&j) {
                        // Read v_j(t) out of the stacked v_C trajectory.
                        let mut off = t * n_xc;
                        for &jj in &coupling {
                            if jj == j {
                                break;
                            }
                            off += model.nx()[jj];
                        }
                        model.a_block(t, i, j) * v_c.rows(off, model.nx()[j]).into_owned()
                    } else {
                        model.a_block(t, i, j)
                            * xt.rows(xs.offset(j), model.nx()[j]).into_owned()
                    };
                    acc += contribution;
                }
                for j in 0..model.num_subsystems() {
                    acc += model.b_block(t, i, j)
                        * ut.rows(model.input_blocks().offset(j), model.nu()[j]).into_owned();
                }
                acc += wt.rows(xs.offset(i), model.nx()[i]).into_owned();
                next.rows_mut(xs.offset(i), model.nx()[i]).copy_from(&acc);
            }
            x.rows_mut((t + 1) * n_x, n_x).copy_from(&next);
        }
        x
    }

    #[test]
    fn nested_case_reduces_to_true_operators() {
        let (model, d1, _) = case_study_decompositions();
        let surr = build_surrogate_operators(&model, &d1).unwrap();
        let ops = build_trajectory_operators(&model).unwrap();
        assert_eq!(surr.btil, ops.bop);
        assert_eq!(surr.ltil, ops.lop);
        assert_eq!(surr.htil.ncols(), 0);
    }

    #[test]
    fn surrogate_matches_stepwise_oracle() {
        let (model, _, d2) = case_study_decompositions();
        let surr = build_surrogate_operators(&model, &d2).unwrap();
        let n_xc_traj = d2.coupling_state_dim(&model) * (model.horizon() + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u = DVector::from_fn(model.traj_input_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(model.traj_state_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let v_c = DVector::from_fn(n_xc_traj, |_, _| rng.gen_range(-1.0..1.0));
            let lifted = &surr.btil * &u + &surr.ltil * &w + &surr.htil * &v_c;
            let oracle = stepwise_surrogate(&model, &d2, &u, &w, &v_c);
            assert_abs_diff_eq!(lifted, oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn fixed_point_recovers_true_trajectory() {
        // Feeding the surrogate coupling states back as v_C makes the
        // surrogate trajectory coincide with the true one.
        let (model, _, d2) = case_study_decompositions();
        let surr = build_surrogate_operators(&model, &d2).unwrap();
        let ops = build_trajectory_operators(&model).unwrap();
        let (pi_c, _) = coupling_projector(&d2, &model);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = DVector::from_fn(model.traj_input_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(model.traj_state_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let x_true = &ops.bop * &u + &ops.lop * &w;
            let v_c = pi_c.apply(&x_true);
            let x_surr = &surr.btil * &u + &surr.ltil * &w + &surr.htil * &v_c;
            assert_abs_diff_eq!(x_surr, x_true, epsilon = 1e-9);
        }
    }

    #[test]
    fn surrogate_operators_lower_triangular() {
        let (model, _, d2) = case_study_decompositions();
        let surr = build_surrogate_operators(&model, &d2).unwrap();
        let n_x = model.state_dim();
        let n_u = model.input_dim();
        let n_xc = d2.coupling_state_dim(&model);
        for t in 0..=model.horizon() {
            for s in 0..=model.horizon() {
                if s > t {
                    assert_eq!(
                        surr.ltil.view((t * n_x, s * n_x), (n_x, n_x)).amax(),
                        0.0
                    );
                }
                if s >= t {
                    if s < model.horizon() {
                        assert_eq!(
                            surr.btil.view((t * n_x, s * n_u), (n_x, n_u)).amax(),
                            0.0
                        );
                    }
                    assert_eq!(
                        surr.htil.view((t * n_x, s * n_xc), (n_x, n_xc)).amax(),
                        0.0
                    );
                }
            }
        }
        // Block (t+1, t) of H̃ carries the raw coupling columns A_{ij}(t).
        for t in 0..model.horizon() {
            let blk = surr
                .htil
                .view(((t + 1) * n_x, t * n_xc), (n_x, n_xc))
                .clone_owned();
            assert_eq!(blk, coupling_injection(&model, &d2, t));
        }
    }

    #[test]
    fn qn_qc_patterns_case_study() {
        let (model, d1, d2) = case_study_decompositions();
        let qn = pattern_qn(&d2, &model);
        let qc = pattern_qc(&d2, &model);
        // Block (t=1, s=0): N-pairs (0,0), (1,0), (1,1); C-pairs (2,1), (2,2).
        for i in 0..3 {
            for j in 0..3 {
                let r = model.input_dim() + i;
                let c = j;
                let in_n = matches!((i, j), (0, 0) | (1, 0) | (1, 1));
                let in_c = matches!((i, j), (2, 1) | (2, 2));
                assert_eq!(qn.is_allowed(r, c), in_n, "QN ({i},{j})");
                assert_eq!(qc.is_allowed(r, c), in_c, "QC ({i},{j})");
                // QN and QC are disjoint.
                assert!(!(qn.is_allowed(r, c) && qc.is_allowed(r, c)));
            }
        }
        // Causality: t < s blocked everywhere.
        for t in 0..model.horizon() {
            for s in (t + 1)..=model.horizon() {
                for r in t * 3..(t + 1) * 3 {
                    for c in s * 3..(s + 1) * 3 {
                        assert!(!qn.is_allowed(r, c));
                        assert!(!qc.is_allowed(r, c));
                    }
                }
            }
        }
        // Partially nested instance: QC is all-false.
        let qc1 = pattern_qc(&d1, &model);
        assert_eq!(qc1.num_free(), 0);
        // Free counts: 3 scalar pairs per allowed (t, s) block, 120 blocks.
        assert_eq!(qn.num_free(), 3 * 120);
        assert_eq!(qc.num_free(), 2 * 120);
    }

    #[test]
    fn y_pattern_case_study() {
        let (model, _, d2) = case_study_decompositions();
        let y = pattern_y(d2.coupling_graph(), &model);
        // Out-neighborhoods in G_C: V⁺(0) = ∅, V⁺(1) = {2}, V⁺(2) = {2}.
        // Allowed pairs: i = 0 with any j; i ∈ {1,2} with j ∈ {1,2}.
        let t = 1;
        let s = 0;
        for i in 0..3 {
            for j in 0..3 {
                let expected = i == 0 || j != 0;
                assert_eq!(
                    y.is_allowed(t * 3 + i, s * 3 + j),
                    expected,
                    "Y pair ({i},{j})"
                );
            }
        }
        // Diagonal and upper time blocks disallowed.
        for i in 0..3 {
            for j in 0..3 {
                assert!(!y.is_allowed(i, j));
                assert!(!y.is_allowed(i, 3 + j));
            }
        }
        assert_eq!(y.num_free(), 7 * 120);
    }

    #[test]
    fn empty_coupling_graph_allows_all_pairs() {
        let model = casestudy::system_model(2).unwrap();
        let y = pattern_y(&DirectedGraph::empty(3), &model);
        for i in 0..3 {
            for j in 0..3 {
                assert!(y.is_allowed(3 + i, j));
            }
        }
    }

    fn random_conforming(mask: &PatternMask, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(mask.nrows(), mask.ncols());
        for (r, c) in mask.free_entries() {
            m[(r, c)] = rng.gen_range(-2.0..2.0);
        }
        m
    }

    #[test]
    fn closure_holds_on_random_conforming_pairs() {
        let (model, _, d2) = case_study_decompositions();
        let qc = pattern_qc(&d2, &model);
        let ym = pattern_y(d2.coupling_graph(), &model);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let q = random_conforming(&qc, &mut rng);
            let y = random_conforming(&ym, &mut rng);
            assert!(check_closure(&q, &y, &qc, &ym).unwrap());
        }
        // Degenerate cases.
        let zero_q = DMatrix::zeros(qc.nrows(), qc.ncols());
        let zero_y = DMatrix::zeros(ym.nrows(), ym.ncols());
        assert!(check_closure(&zero_q, &zero_y, &qc, &ym).unwrap());
    }

    #[test]
    fn closure_rejects_nonconforming_input() {
        let (model, _, d2) = case_study_decompositions();
        let qc = pattern_qc(&d2, &model);
        let ym = pattern_y(d2.coupling_graph(), &model);
        let mut q = DMatrix::zeros(qc.nrows(), qc.ncols());
        q[(0, 0)] = 1.0; // row block t=0, pair (0,0): not a coupling pair
        let y = DMatrix::zeros(ym.nrows(), ym.ncols());
        assert!(matches!(
            check_closure(&q, &y, &qc, &ym),
            Err(Error::PatternViolation { .. })
        ));
    }

    #[test]
    fn change_of_variable_preserves_pattern() {
        let (model, _, d2) = case_study_decompositions();
        let qc = pattern_qc(&d2, &model);
        let ym = pattern_y(d2.coupling_graph(), &model);
        let time = model.state_traj_blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let q_xi = random_conforming(&qc, &mut rng);
            let y = random_conforming(&ym, &mut rng);
            let lambda = rng.gen_range(1.0..10.0);
            let qv = apply_z_inverse_right(&q_xi, lambda, &y, &time);
            qc.check_conforms(&qv, 1e-9, "Qv").unwrap();
            // Residual of the block substitution.
            let z = z_matrix(lambda, &y);
            assert_abs_diff_eq!(&qv * &z, q_xi, epsilon = 1e-9);
        }
    }

    #[test]
    fn z_inverse_diagonal_case() {
        let (model, _, d2) = case_study_decompositions();
        let qc = pattern_qc(&d2, &model);
        let time = model.state_traj_blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let q_xi = random_conforming(&qc, &mut rng);
        let y = DMatrix::zeros(48, 48);
        let qv = apply_z_inverse_right(&q_xi, 2.0, &y, &time);
        assert_abs_diff_eq!(qv, q_xi / 2.0, epsilon = 1e-15);
    }
}
