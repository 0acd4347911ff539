//! Assembly of the joint policy/contract semidefinite program and of its
//! fixed-contract restriction, plus the numeric verification helpers for
//! the contract containment chain.
//!
//! Variable blocks: feedback gains `Q_w` (nested disturbances) and `Q_xi`
//! (primitive-disturbance image), contract transform parts `lambda` and
//! `Y`, open-loop vectors `u_bar`, `v_bar`, and the derived quantities
//! `x_bar`, `P_w`, `P_xi` pinned by defining equalities:
//!
//! * `x̄ = B̃ ū + H̃ Π_C v̄`
//! * `P^w = B̃ Q^w + L̃`
//! * `P^ξ = B̃ Q^ξ + H̃ Π_C (λI − Y)`
//!
//! Robust rows become pairs of second-order cones with epigraph slacks;
//! the contract containment becomes one linear matrix inequality coupling
//! `(λ, β, Y, P^w, P^ξ)`. On partially nested instances every
//! contract-side object is omitted and the program is a plain
//! second-order-cone program in `(ū, Q^w)`.

use nalgebra::{DMatrix, DVector};

use super::program::{ConicProgram, ExprMatrix, LinExpr, LmiConstraint, VarBlock};
use crate::linalg;
use crate::problem::PreparedProblem;
use crate::surrogate::PatternMask;
use crate::{Error, Result};

/// Frozen contract parameters for the fixed-contract program.
#[derive(Debug, Clone)]
pub struct FixedContract {
    pub lambda: f64,
    pub y: DMatrix<f64>,
    pub v_bar: DVector<f64>,
}

/// Assemble the joint policy/contract program.
pub fn assemble_program(prep: &PreparedProblem) -> Result<ConicProgram> {
    assemble(prep, None)
}

/// Assemble the convex program with `(λ, Y, v̄)` frozen; `β` remains a
/// decision variable. Used for comparing fixed contracts against
/// co-optimized ones.
pub fn assemble_fixed_contract_program(
    prep: &PreparedProblem,
    fixed: &FixedContract,
) -> Result<ConicProgram> {
    if fixed.lambda < 1.0 - 1e-12 {
        return Err(Error::PatternViolation {
            context: "fixed contract lambda (must be >= 1)".into(),
            row: 0,
            col: 0,
            value: fixed.lambda,
        });
    }
    prep.ymask.check_conforms(&fixed.y, 0.0, "fixed contract Y")?;
    if fixed.v_bar.len() != prep.model().traj_state_dim() {
        return Err(Error::DimensionMismatch {
            context: "fixed contract v_bar".into(),
            expected: format!("{}", prep.model().traj_state_dim()),
            got: format!("{}", fixed.v_bar.len()),
        });
    }
    assemble(prep, Some(fixed))
}

fn assemble(prep: &PreparedProblem, fixed: Option<&FixedContract>) -> Result<ConicProgram> {
    let model = prep.model();
    let n_x = model.traj_state_dim();
    let coupled = !prep.is_partially_nested();
    let mut program = ConicProgram::new();

    let time = model.state_traj_blocks();
    let btil = &prep.surrogate.btil;
    let ltil = &prep.surrogate.ltil;

    // Policy blocks.
    let u_bar = ExprMatrix::from_block(&program.register_vector("u_bar", model.traj_input_dim(), None));
    let q_w = ExprMatrix::from_block(&program.register_matrix("Q_w", &prep.qn));
    let x_bar = ExprMatrix::from_block(&program.register_vector("x_bar", n_x, None));
    let pw_mask = PatternMask::time_lower_triangular(time.clone(), time.clone(), false);
    let p_w = ExprMatrix::from_block(&program.register_matrix("P_w", &pw_mask));

    // Contract blocks; constants in fixed mode.
    let mut q_xi = None;
    let mut p_xi = None;
    let mut y = None;
    let mut v_bar = None;
    let mut lambda = None;
    let mut beta = None;
    let mut hpic = None;
    if coupled {
        hpic = Some(scatter_columns(&prep.surrogate.htil, &prep.pi_c, n_x));
        q_xi = Some(ExprMatrix::from_block(
            &program.register_matrix("Q_xi", &prep.qc),
        ));
        let pxi_mask = PatternMask::time_lower_triangular(time.clone(), time.clone(), true);
        p_xi = Some(ExprMatrix::from_block(
            &program.register_matrix("P_xi", &pxi_mask),
        ));
        beta = Some(scalar_expr(program.register_scalar("beta")));
        match fixed {
            None => {
                lambda = Some(scalar_expr(program.register_scalar("lambda")));
                y = Some(ExprMatrix::from_block(
                    &program.register_matrix("Y", &prep.ymask),
                ));
                let vmask = coupling_coordinate_mask(prep);
                v_bar = Some(ExprMatrix::from_block(&program.register_vector(
                    "v_bar",
                    n_x,
                    Some(&vmask),
                )));
            }
            Some(f) => {
                lambda = Some(LinExpr::constant(f.lambda));
                y = Some(ExprMatrix::from_const(&f.y));
                v_bar = Some(ExprMatrix::from_const_vector(&f.v_bar));
            }
        }
    }

    // x̄ = B̃ ū + H̃ Π_C v̄.
    let mut x_bar_def = u_bar.premul(btil);
    if let (Some(h), Some(vb)) = (&hpic, &v_bar) {
        x_bar_def = x_bar_def.add(&vb.premul(h));
    }
    for r in 0..n_x {
        let mut e = x_bar.entry(r, 0).clone();
        e.add_scaled(x_bar_def.entry(r, 0), -1.0);
        program.add_equality(e);
    }

    // P^w = B̃ Q^w + L̃.
    let pw_def = q_w.premul(btil).add(&ExprMatrix::from_const(ltil));
    add_matrix_equalities(&mut program, &p_w, &pw_def, &pw_mask, "P_w")?;

    // P^ξ = B̃ Q^ξ + λ H̃Π_C − H̃Π_C Y.
    if coupled {
        let h = hpic.as_ref().unwrap();
        let pxi_def = q_xi
            .as_ref()
            .unwrap()
            .premul(btil)
            .add(&ExprMatrix::scale_const_by_expr(h, lambda.as_ref().unwrap()))
            .sub(&y.as_ref().unwrap().premul(h));
        let pxi_mask = PatternMask::time_lower_triangular(time.clone(), time.clone(), true);
        add_matrix_equalities(&mut program, p_xi.as_ref().unwrap(), &pxi_def, &pxi_mask, "P_xi")?;

        // λ ≥ max{1, β} ≥ 0.
        let lam = lambda.as_ref().unwrap();
        let bet = beta.as_ref().unwrap();
        if fixed.is_none() {
            let mut ge_one = lam.clone();
            ge_one.constant -= 1.0;
            program.add_inequality(ge_one);
        }
        let mut lam_minus_beta = lam.clone();
        lam_minus_beta.add_scaled(bet, -1.0);
        program.add_inequality(lam_minus_beta);
        program.add_inequality(bet.clone());
    }

    assemble_soc_rows(
        &mut program,
        prep,
        &p_w,
        &q_w,
        p_xi.as_ref(),
        q_xi.as_ref(),
        &x_bar,
        &u_bar,
    );

    if coupled {
        assemble_contract_lmi(
            &mut program,
            prep,
            &p_w,
            p_xi.as_ref().unwrap(),
            lambda.as_ref().unwrap(),
            beta.as_ref().unwrap(),
            y.as_ref().unwrap(),
            &x_bar,
            v_bar.as_ref().unwrap(),
        )?;
    }

    // Objective: E[x̃ᵀ R_x x̃ + ũᵀ R_u ũ] in trace form over the second
    // moment, one squared-norm term per trace/quadratic summand.
    let m_sqrt = linalg::symmetric_sqrt(prep.second_moment(), 0.0);
    let rx_sqrt = linalg::symmetric_sqrt(&prep.instance.cost.rx, 0.0);
    let ru_sqrt = linalg::symmetric_sqrt(&prep.instance.cost.ru, 0.0);
    if let Some(pxi) = &p_xi {
        program.add_sq_norm_objective(pxi.premul(&rx_sqrt).postmul(&m_sqrt).into_entries());
    }
    program.add_sq_norm_objective(p_w.premul(&rx_sqrt).postmul(&m_sqrt).into_entries());
    program.add_sq_norm_objective(x_bar.premul(&rx_sqrt).into_entries());
    program.add_sq_norm_objective(q_w.premul(&ru_sqrt).postmul(&m_sqrt).into_entries());
    if let Some(qxi) = &q_xi {
        program.add_sq_norm_objective(qxi.premul(&ru_sqrt).postmul(&m_sqrt).into_entries());
    }
    program.add_sq_norm_objective(u_bar.premul(&ru_sqrt).into_entries());

    program.audit()?;
    Ok(program)
}

fn scalar_expr(block: VarBlock) -> LinExpr {
    match block {
        VarBlock::Scalar(id) => LinExpr::variable(id),
        _ => unreachable!("scalar registration returns a scalar block"),
    }
}

/// Boolean mask over trajectory-state coordinates that belong to coupling
/// subsystems. The remaining coordinates of `v̄` enter no constraint and
/// no objective term, so they are pinned to zero instead of floating
/// free.
fn coupling_coordinate_mask(prep: &PreparedProblem) -> Vec<bool> {
    let mut mask = vec![false; prep.model().traj_state_dim()];
    for r in 0..prep.pi_c.nrows() {
        mask[prep.pi_c.selected(r)] = true;
    }
    mask
}

/// `H̃ Π_C` as a dense `N_x × N_x` matrix (scatter the columns of `H̃`
/// onto coupling coordinates).
fn scatter_columns(
    htil: &DMatrix<f64>,
    pi_c: &crate::infograph::Projector,
    n_x: usize,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(htil.nrows(), n_x);
    for r in 0..pi_c.nrows() {
        m.column_mut(pi_c.selected(r)).copy_from(&htil.column(r));
    }
    m
}

/// Emit the defining equalities of a derived matrix block, asserting that
/// every masked-out entry of the definition is structurally zero.
fn add_matrix_equalities(
    program: &mut ConicProgram,
    var: &ExprMatrix,
    def: &ExprMatrix,
    mask: &PatternMask,
    context: &str,
) -> Result<()> {
    for r in 0..var.rows {
        for c in 0..var.cols {
            if mask.is_allowed(r, c) {
                let mut e = var.entry(r, c).clone();
                e.add_scaled(def.entry(r, c), -1.0);
                program.add_equality(e);
            } else {
                let mut e = def.entry(r, c).clone();
                if !e.is_structural_zero() {
                    return Err(Error::PatternViolation {
                        context: format!("{context} definition"),
                        row: r,
                        col: c,
                        value: e.constant,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Emit the robust linear rows as second-order cones: per constraint row
/// `i`,
/// `‖Σ^{1/2}(F_x P^w + F_u Q^w + F_w)ᵀe_i‖ + ‖Σ^{1/2}(F_x P^ξ + F_u Q^ξ)ᵀe_i‖
///  ≤ e_iᵀ(g − F_x x̄ − F_u ū)`,
/// with each norm bounded by an epigraph slack and the slack sum bounded
/// linearly. On partially nested instances the second norm is absent and
/// the row is a single cone.
#[allow(clippy::too_many_arguments)]
pub fn assemble_soc_rows(
    program: &mut ConicProgram,
    prep: &PreparedProblem,
    p_w: &ExprMatrix,
    q_w: &ExprMatrix,
    p_xi: Option<&ExprMatrix>,
    q_xi: Option<&ExprMatrix>,
    x_bar: &ExprMatrix,
    u_bar: &ExprMatrix,
) {
    let cons = &prep.instance.constraints;
    let m = cons.num_rows();
    // G1 = (F_x P^w + F_u Q^w + F_w) Σ^{1/2}; row i is the first norm term.
    let g1 = p_w
        .premul(&cons.fx)
        .add(&q_w.premul(&cons.fu))
        .add(&ExprMatrix::from_const(&cons.fw))
        .postmul(&prep.sqrt_sigma);
    let g2 = match (p_xi, q_xi) {
        (Some(pxi), Some(qxi)) => Some(
            pxi.premul(&cons.fx)
                .add(&qxi.premul(&cons.fu))
                .postmul(&prep.sqrt_sigma),
        ),
        _ => None,
    };
    // rhs_i = g_i − (F_x x̄)_i − (F_u ū)_i.
    let slack = ExprMatrix::from_const_vector(&cons.g)
        .sub(&x_bar.premul(&cons.fx))
        .sub(&u_bar.premul(&cons.fu));

    for i in 0..m {
        let row1: Vec<LinExpr> = (0..g1.cols).map(|c| g1.entry(i, c).clone()).collect();
        let rhs = slack.entry(i, 0).clone();
        match &g2 {
            Some(g2) => {
                let row2: Vec<LinExpr> = (0..g2.cols).map(|c| g2.entry(i, c).clone()).collect();
                let tau1 = LinExpr::variable(program.fresh_var());
                let tau2 = LinExpr::variable(program.fresh_var());
                program.add_soc(tau1.clone(), row1);
                program.add_soc(tau2.clone(), row2);
                let mut link = rhs;
                link.add_scaled(&tau1, -1.0);
                link.add_scaled(&tau2, -1.0);
                program.add_inequality(link);
            }
            None => program.add_soc(rhs, row1),
        }
    }
}

/// Emit the contract coupling: the centering equality `Π_C(x̄ − v̄) = 0`
/// and the containment LMI
///
/// ```text
/// [ Π_C Σ̃ Π_Cᵀ     Π_C P^w    Π_C P^ξ      ]
/// [ P^wᵀ Π_Cᵀ      β Σ⁻¹      0            ]  ⪰ 0,
/// [ P^ξᵀ Π_Cᵀ      0          (λ−β) Σ⁻¹    ]
/// ```
///
/// with `Σ̃ = λΣ − YΣ − ΣYᵀ`. Every block is affine in
/// `(λ, β, Y, Q^w, Q^ξ)` through the defining equalities.
#[allow(clippy::too_many_arguments)]
pub fn assemble_contract_lmi(
    program: &mut ConicProgram,
    prep: &PreparedProblem,
    p_w: &ExprMatrix,
    p_xi: &ExprMatrix,
    lambda: &LinExpr,
    beta: &LinExpr,
    y: &ExprMatrix,
    x_bar: &ExprMatrix,
    v_bar: &ExprMatrix,
) -> Result<()> {
    let nc = prep.pi_c.nrows();
    if nc == 0 {
        return Err(Error::EmptyCouplingSet);
    }
    let n_x = prep.model().traj_state_dim();
    let sigma = prep.sigma();
    let inv_sigma = &prep.inv_sigma;
    let pi = &prep.pi_c;

    // Π_C(x̄ − v̄) = 0.
    for r in 0..nc {
        let src = pi.selected(r);
        let mut e = x_bar.entry(src, 0).clone();
        e.add_scaled(v_bar.entry(src, 0), -1.0);
        program.add_equality(e);
    }

    // (Y Σ) restricted to coupling rows and columns.
    let ys_c = y.gather_rows(pi).postmul(sigma).gather_cols(pi);
    let sigma_c = pi.apply_left(&pi.apply_right_transpose(sigma));
    let pw_c = p_w.gather_rows(pi);
    let pxi_c = p_xi.gather_rows(pi);

    let dim = nc + 2 * n_x;
    let mut entries = vec![LinExpr::zero(); dim * (dim + 1) / 2];
    for c in 0..dim {
        for r in 0..=c {
            let e = lmi_entry(
                r, c, nc, n_x, lambda, beta, &ys_c, &sigma_c, &pw_c, &pxi_c, inv_sigma,
            );
            entries[LmiConstraint::entry_index(r, c)] = e;
        }
    }
    program.add_lmi(LmiConstraint { dim, entries });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn lmi_entry(
    r: usize,
    c: usize,
    nc: usize,
    n_x: usize,
    lambda: &LinExpr,
    beta: &LinExpr,
    ys_c: &ExprMatrix,
    sigma_c: &DMatrix<f64>,
    pw_c: &ExprMatrix,
    pxi_c: &ExprMatrix,
    inv_sigma: &DMatrix<f64>,
) -> LinExpr {
    let mut e = LinExpr::zero();
    if c < nc {
        // (0,0): λ Σ_C − (YΣ)_C − (YΣ)_Cᵀ.
        e.add_scaled(lambda, sigma_c[(r, c)]);
        e.add_scaled(ys_c.entry(r, c), -1.0);
        e.add_scaled(ys_c.entry(c, r), -1.0);
    } else if c < nc + n_x {
        let cc = c - nc;
        if r < nc {
            // (0,1): Π_C P^w.
            e = pw_c.entry(r, cc).clone();
        } else {
            // (1,1): β Σ⁻¹.
            e.add_scaled(beta, inv_sigma[(r - nc, cc)]);
        }
    } else {
        let cc = c - nc - n_x;
        if r < nc {
            // (0,2): Π_C P^ξ.
            e = pxi_c.entry(r, cc).clone();
        } else if r < nc + n_x {
            // (1,2): 0.
        } else {
            // (2,2): (λ − β) Σ⁻¹.
            e.add_scaled(lambda, inv_sigma[(r - nc - n_x, cc)]);
            e.add_scaled(beta, -inv_sigma[(r - nc - n_x, cc)]);
        }
    }
    e.compact();
    e
}

/// Numeric value of the contract LMI at given solution values.
pub fn contract_lmi_value(
    prep: &PreparedProblem,
    p_w: &DMatrix<f64>,
    p_xi: &DMatrix<f64>,
    lambda: f64,
    beta: f64,
    y: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pi = &prep.pi_c;
    let nc = pi.nrows();
    let n_x = prep.model().traj_state_dim();
    let sigma = prep.sigma();
    let sigma_tilde = lambda * sigma - y * sigma - sigma * y.transpose();
    let block00 = pi.apply_left(&pi.apply_right_transpose(&sigma_tilde));
    let block01 = pi.apply_left(p_w);
    let block02 = pi.apply_left(p_xi);

    let dim = nc + 2 * n_x;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (nc, nc)).copy_from(&block00);
    m.view_mut((0, nc), (nc, n_x)).copy_from(&block01);
    m.view_mut((nc, 0), (n_x, nc)).copy_from(&block01.transpose());
    m.view_mut((0, nc + n_x), (nc, n_x)).copy_from(&block02);
    m.view_mut((nc + n_x, 0), (n_x, nc))
        .copy_from(&block02.transpose());
    m.view_mut((nc, nc), (n_x, n_x))
        .copy_from(&(beta * &prep.inv_sigma));
    m.view_mut((nc + n_x, nc + n_x), (n_x, n_x))
        .copy_from(&((lambda - beta) * &prep.inv_sigma));
    m
}

/// Margin of the quadratic containment inequality recovered from a
/// solution through the Schur step with `α = β/λ`: the smallest
/// eigenvalue of
///
/// `Π_C(λI−Y)Σ(λI−Y)ᵀΠ_Cᵀ − α⁻¹ Π_C P^w Σ P^wᵀ Π_Cᵀ − (1−α)⁻¹ Π_C P^ξ Σ P^ξᵀ Π_Cᵀ`.
///
/// Nonnegative (up to tolerance) whenever the LMI holds.
pub fn quadratic_inequality_min_eig(
    prep: &PreparedProblem,
    p_w: &DMatrix<f64>,
    p_xi: &DMatrix<f64>,
    lambda: f64,
    beta: f64,
    y: &DMatrix<f64>,
) -> Result<f64> {
    let pi = &prep.pi_c;
    if pi.nrows() == 0 {
        return Err(Error::EmptyCouplingSet);
    }
    let sigma = prep.sigma();
    let z = crate::surrogate::z_matrix(lambda, y);
    let zc = pi.apply_left(&z);
    let mut rhs = &zc * sigma * zc.transpose();

    let pw_c = pi.apply_left(p_w);
    let pxi_c = pi.apply_left(p_xi);
    let alpha = beta / lambda;
    for (mat, weight) in [(pw_c, alpha), (pxi_c, 1.0 - alpha)] {
        let quad = &mat * sigma * mat.transpose();
        if quad.amax() == 0.0 {
            continue; // vacuous summand
        }
        if weight <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        rhs -= quad / weight;
    }
    Ok(linalg::min_eigenvalue(&rhs))
}

/// Sufficient condition for the Minkowski-sum containment
/// `L₁𝒲 ⊕ L₂𝒲 ⊆ L₃𝒲`: existence of `α ∈ [0,1]` with
/// `α⁻¹L₁ΣL₁ᵀ + (1−α)⁻¹L₂ΣL₂ᵀ ⪯ L₃ΣL₃ᵀ` (eigenvalue tolerance 1e-9).
/// The boundary values `α ∈ {0, 1}` are admitted only when the matching
/// summand is zero, degenerating to single-ellipsoid containment.
pub fn assemble_ellipsoid_containment_check(
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    l3: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    alpha: f64,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let quad = |l: &DMatrix<f64>| l * sigma * l.transpose();
    let mut rhs = quad(l3);
    for (l, weight) in [(l1, alpha), (l2, 1.0 - alpha)] {
        let q = quad(l);
        if q.amax() == 0.0 {
            continue;
        }
        if weight <= 0.0 {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        rhs -= q / weight;
    }
    Ok(linalg::min_eigenvalue(&rhs) >= -1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casestudy;
    use crate::problem::prepare;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn case_study_program_dimensions() {
        let prep = prepare(casestudy::instance("GI2", 2.5).unwrap()).unwrap();
        let program = assemble_program(&prep).unwrap();
        // One LMI of size N_x^C + 2 N_x = 32 + 96 = 128.
        assert_eq!(program.lmis.len(), 1);
        assert_eq!(program.lmis[0].dim, 128);
        // 186 robust row groups, two cones each.
        assert_eq!(prep.instance.constraints.num_rows(), 186);
        assert_eq!(program.socs.len(), 2 * 186);
        // Contract machinery registered.
        for name in ["lambda", "beta", "Y", "Q_xi", "v_bar", "P_xi"] {
            assert!(program.block(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn nested_program_has_no_contract_blocks() {
        let prep = prepare(casestudy::instance("GI1", 2.5).unwrap()).unwrap();
        let program = assemble_program(&prep).unwrap();
        assert!(program.lmis.is_empty());
        assert_eq!(program.socs.len(), 186);
        for name in ["lambda", "beta", "Y", "Q_xi", "v_bar", "P_xi"] {
            assert!(program.block(name).is_none(), "unexpected {name}");
        }
        for name in ["u_bar", "Q_w", "x_bar", "P_w"] {
            assert!(program.block(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn zero_policy_soc_row_reduces_to_ltil_norm() {
        // With all decision entries zero and F_w = 0, the first norm term
        // in row i is ‖Σ^{1/2}(F_x L̃)ᵀe_i‖ and the slack is g_i.
        let prep = prepare(casestudy::instance("GI1", 2.0).unwrap()).unwrap();
        let mut program = ConicProgram::new();
        let n_x = prep.model().traj_state_dim();
        let n_u = prep.model().traj_input_dim();
        let zero_pw = ExprMatrix::from_const(&prep.surrogate.ltil);
        let zero_qw = ExprMatrix::from_const(&DMatrix::zeros(n_u, n_x));
        let zero_xbar = ExprMatrix::from_const_vector(&DVector::zeros(n_x));
        let zero_ubar = ExprMatrix::from_const_vector(&DVector::zeros(n_u));
        assemble_soc_rows(
            &mut program,
            &prep,
            &zero_pw,
            &zero_qw,
            None,
            None,
            &zero_xbar,
            &zero_ubar,
        );
        assert_eq!(program.socs.len(), 186);
        let x: Vec<f64> = vec![];
        for (i, soc) in program.socs.iter().enumerate() {
            let bound = soc.bound.eval(&x);
            assert_abs_diff_eq!(bound, prep.instance.constraints.g[i], epsilon = 0.0);
            let norm: f64 = soc
                .vector
                .iter()
                .map(|e| e.eval(&x).powi(2))
                .sum::<f64>()
                .sqrt();
            let row = prep.instance.constraints.fx.row(i) * &prep.surrogate.ltil;
            let expected = (&prep.sqrt_sigma * row.transpose()).norm();
            assert_abs_diff_eq!(norm, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn lmi_rejected_for_nested_instance() {
        let prep = prepare(casestudy::instance("GI1", 2.0).unwrap()).unwrap();
        let mut program = ConicProgram::new();
        let dummy = ExprMatrix::zeros(1, 1);
        let err = assemble_contract_lmi(
            &mut program,
            &prep,
            &dummy,
            &dummy,
            &LinExpr::constant(1.0),
            &LinExpr::constant(0.5),
            &dummy,
            &dummy,
            &dummy,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyCouplingSet));
    }

    #[test]
    fn trivial_lmi_value_is_psd() {
        // P^w = P^ξ = 0, Y = 0, λ = 1, β = 1/2: block diagonal
        // (Σ_C, Σ⁻¹/2, Σ⁻¹/2) ⪰ 0.
        let prep = prepare(casestudy::instance("GI2", 2.0).unwrap()).unwrap();
        let n_x = prep.model().traj_state_dim();
        let zero = DMatrix::zeros(n_x, n_x);
        let m = contract_lmi_value(&prep, &zero, &zero, 1.0, 0.5, &zero);
        assert!(linalg::min_eigenvalue(&m) >= -1e-12);
    }

    #[test]
    fn beta_equal_lambda_forces_zero_coupled_pxi() {
        // With β = λ the lower-right block vanishes; any nonzero Π_C P^ξ
        // block then breaks positive semidefiniteness.
        let prep = prepare(casestudy::instance("GI2", 2.0).unwrap()).unwrap();
        let n_x = prep.model().traj_state_dim();
        let zero = DMatrix::zeros(n_x, n_x);
        let mut p_xi = DMatrix::zeros(n_x, n_x);
        p_xi[(prep.pi_c.selected(0), 0)] = 1.0;
        let m = contract_lmi_value(&prep, &zero, &p_xi, 1.0, 1.0, &zero);
        assert!(linalg::min_eigenvalue(&m) < -1e-9);
        // And with Π_C P^ξ = 0 the same matrix is PSD.
        let m0 = contract_lmi_value(&prep, &zero, &zero, 1.0, 1.0, &zero);
        assert!(linalg::min_eigenvalue(&m0) >= -1e-12);
    }

    #[test]
    fn containment_check_scalars() {
        // [−1,1] ⊕ [−1,1] = [−2,2]: 1/α + 1/(1−α) ≤ 4 at α = 1/2.
        let one = dmatrix![1.0];
        let two = dmatrix![2.0];
        let sigma = dmatrix![1.0];
        assert!(assemble_ellipsoid_containment_check(&one, &one, &two, &sigma, 0.5).unwrap());
        // Tight: L3 slightly smaller fails.
        let smaller = dmatrix![1.9];
        assert!(!assemble_ellipsoid_containment_check(&one, &one, &smaller, &sigma, 0.5).unwrap());
        // Degenerate second summand at α = 1.
        let zero = dmatrix![0.0];
        assert!(assemble_ellipsoid_containment_check(&one, &zero, &one, &sigma, 1.0).unwrap());
        // Out-of-range alpha.
        assert!(matches!(
            assemble_ellipsoid_containment_check(&one, &one, &two, &sigma, 1.5),
            Err(Error::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            assemble_ellipsoid_containment_check(&one, &one, &two, &sigma, 1.0),
            Err(Error::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn containment_check_sampled_2d() {
        use rand::{Rng, SeedableRng};
        // A random 2-D instance where the matrix inequality holds must
        // contain every sampled sum point.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let sigma = DMatrix::identity(2, 2);
        let l1 = dmatrix![0.6, 0.1; 0.0, 0.5];
        let l2 = dmatrix![0.3, 0.0; 0.2, 0.4];
        let l3 = dmatrix![1.6, 0.1; 0.2, 1.5];
        assert!(assemble_ellipsoid_containment_check(&l1, &l2, &l3, &sigma, 0.5).unwrap());
        let shape3 = &l3 * &l3.transpose();
        let inv3 = linalg::symmetric_inverse(&shape3, 1e-12);
        for _ in 0..10_000 {
            let angle1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let angle2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let w1 = nalgebra::dvector![angle1.cos(), angle1.sin()];
            let w2 = nalgebra::dvector![angle2.cos(), angle2.sin()];
            let p = &l1 * w1 + &l2 * w2;
            let val = (p.transpose() * &inv3 * &p)[(0, 0)];
            assert!(val <= 1.0 + 1e-9, "sum point escaped: {val}");
        }
    }
}
