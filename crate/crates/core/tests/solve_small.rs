//! End-to-end solves on small instances and on the benchmark system:
//! feasibility outcomes, fixed-contract comparisons, scaling invariance,
//! and the margin/recovery pipeline.

use agc_core::casestudy;
use agc_core::policy::{
    expected_cost, recover_from_solution, recover_policy, verify_policy, worst_case_margins,
};
use agc_core::problem::prepare;
use agc_core::sdp::{
    assemble_fixed_contract_program, assemble_program, quadratic_inequality_min_eig, solve,
    FixedContract, SdpSolution, SolveStatus, SolverOptions,
};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn coupled_case_study_solves_and_verifies() {
    let prep = prepare(casestudy::instance("GI2", 2.5).unwrap()).unwrap();
    let program = assemble_program(&prep).unwrap();
    let t0 = std::time::Instant::now();
    let report = solve(&program, &opts()).unwrap();
    println!(
        "GI2 x_max=2.5: status={} obj={:?} iters={} assembled+solved in {:.2}s",
        report.status,
        report.objective,
        report.iterations,
        t0.elapsed().as_secs_f64()
    );
    assert_eq!(report.status, SolveStatus::Optimal);
    let sol = SdpSolution::from_report(&report, &prep).unwrap();
    assert!(sol.lambda >= 1.0 - 1e-9);
    assert!(sol.beta >= -1e-9 && sol.beta <= sol.lambda + 1e-9);

    // Analytic robust margins are nonpositive at the optimum.
    let margins = worst_case_margins(&sol, &prep.instance.constraints, &prep.sqrt_sigma);
    assert!(margins.max() <= 1e-7, "max margin {}", margins.max());

    // Recovered policy respects its pattern and survives simulation.
    let policy = recover_policy(&report, &prep).unwrap();
    let summary = verify_policy(&prep.instance, &policy, 500, 42).unwrap();
    assert!(summary.max_constraint_residual <= 1e-6);
    assert!(summary.max_contract_membership <= 1.0 + 1e-6);

    // Schur chain at the solution.
    let chain =
        quadratic_inequality_min_eig(&prep, &sol.p_w, &sol.p_xi, sol.lambda, sol.beta, &sol.y)
            .unwrap();
    assert!(chain >= -1e-7, "chain min eig {chain}");
}

#[test]
fn nested_case_study_solves() {
    let prep = prepare(casestudy::instance("GI1", 2.5).unwrap()).unwrap();
    let program = assemble_program(&prep).unwrap();
    let report = solve(&program, &opts()).unwrap();
    assert_eq!(report.status, SolveStatus::Optimal);
    let sol = SdpSolution::from_report(&report, &prep).unwrap();
    let margins = worst_case_margins(&sol, &prep.instance.constraints, &prep.sqrt_sigma);
    assert!(margins.max() <= 1e-7);
    let policy = recover_policy(&report, &prep).unwrap();
    let summary = verify_policy(&prep.instance, &policy, 500, 7).unwrap();
    assert!(summary.max_constraint_residual <= 1e-6);
}

#[test]
fn tight_state_bound_is_infeasible() {
    // The first state block equals w(-1) plus nothing controllable; with
    // ‖w‖₂ ≤ 1 the bound 0.1 cannot hold.
    let prep = prepare(casestudy::instance("GI2", 0.1).unwrap()).unwrap();
    let program = assemble_program(&prep).unwrap();
    let report = solve(&program, &opts()).unwrap();
    assert_eq!(report.status, SolveStatus::Infeasible);
}

#[test]
fn fixed_contract_at_joint_optimum_is_tight() {
    let prep = prepare(casestudy::instance("GI2", 2.5).unwrap()).unwrap();
    let joint = solve(&assemble_program(&prep).unwrap(), &opts()).unwrap();
    let sol = SdpSolution::from_report(&joint, &prep).unwrap();

    let fixed = FixedContract {
        lambda: sol.lambda,
        y: sol.y.clone(),
        v_bar: sol.v_bar.clone(),
    };
    let restricted = solve(&assemble_fixed_contract_program(&prep, &fixed).unwrap(), &opts())
        .unwrap();
    assert_eq!(restricted.status, SolveStatus::Optimal);
    let joint_obj = joint.objective.unwrap();
    let restricted_obj = restricted.objective.unwrap();
    assert!(
        (restricted_obj - joint_obj).abs() <= 1e-6 * joint_obj.max(1.0),
        "joint {joint_obj} vs restricted {restricted_obj}"
    );

    // A naive fixed contract is dominated by co-optimization.
    let naive = FixedContract {
        lambda: 1.0,
        y: nalgebra::DMatrix::zeros(48, 48),
        v_bar: nalgebra::DVector::zeros(48),
    };
    let naive_report =
        solve(&assemble_fixed_contract_program(&prep, &naive).unwrap(), &opts()).unwrap();
    if let Some(naive_obj) = naive_report.objective {
        assert!(naive_obj >= joint_obj - 1e-6 * joint_obj.max(1.0));
    }

    // Policy recovery through the fixed route matches the joint one.
    let sol_fixed = SdpSolution::from_report_fixed(&restricted, &prep, &fixed).unwrap();
    let p = recover_from_solution(&sol_fixed, &prep).unwrap();
    assert_eq!(p.lambda, sol.lambda);
}

#[test]
fn unreachable_fixed_center_is_infeasible() {
    // x̄(0) = 0 always, so a contract center with large time-0 coupling
    // coordinates breaks the centering equality.
    let prep = prepare(casestudy::instance("GI2", 2.5).unwrap()).unwrap();
    let mut v_bar = nalgebra::DVector::zeros(48);
    v_bar[1] = 50.0; // subsystem 2 (coupling) at time 0
    v_bar[2] = -50.0;
    let fixed = FixedContract {
        lambda: 1.0,
        y: nalgebra::DMatrix::zeros(48, 48),
        v_bar,
    };
    let report = solve(&assemble_fixed_contract_program(&prep, &fixed).unwrap(), &opts())
        .unwrap();
    assert_eq!(report.status, SolveStatus::Infeasible);
}

#[test]
fn cost_scaling_leaves_policy_unchanged() {
    let base = casestudy::instance("GI2", 2.0).unwrap();
    let mut scaled = base.clone();
    scaled.cost.rx *= 3.0;
    scaled.cost.ru *= 3.0;
    let prep_a = prepare(base).unwrap();
    let prep_b = prepare(scaled).unwrap();
    let ra = solve(&assemble_program(&prep_a).unwrap(), &opts()).unwrap();
    let rb = solve(&assemble_program(&prep_b).unwrap(), &opts()).unwrap();
    let oa = ra.objective.unwrap();
    let ob = rb.objective.unwrap();
    assert!(
        (ob - 3.0 * oa).abs() <= 1e-4 * ob.max(1.0),
        "objective scaling: {oa} -> {ob}"
    );
    let sa = SdpSolution::from_report(&ra, &prep_a).unwrap();
    let sb = SdpSolution::from_report(&rb, &prep_b).unwrap();
    let pa = recover_from_solution(&sa, &prep_a).unwrap();
    let pb = recover_from_solution(&sb, &prep_b).unwrap();
    // Argmin blocks agree within solver accuracy.
    assert!((&pa.q_w - &pb.q_w).amax() < 1e-4);
    assert!((&pa.u_bar - &pb.u_bar).amax() < 1e-4);
    assert!((&pa.q_v - &pb.q_v).amax() < 1e-4);
}

#[test]
fn analytic_objective_matches_trace_formula() {
    let prep = prepare(casestudy::instance("GI2", 2.0).unwrap()).unwrap();
    let report = solve(&assemble_program(&prep).unwrap(), &opts()).unwrap();
    let sol = SdpSolution::from_report(&report, &prep).unwrap();
    let m = prep.second_moment();
    let analytic = expected_cost(&sol, m, m, &prep.instance.cost);
    let from_solver = report.objective.unwrap();
    assert!(
        (analytic - from_solver).abs() <= 1e-6 * analytic.max(1.0),
        "trace {analytic} vs solver {from_solver}"
    );
}
