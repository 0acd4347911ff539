//! Policy recovery, closed-loop simulation, and verification.
//!
//! A solved program maps to the implementable affine decentralized policy
//! `u = ū + Q^w w + Q^v (x − v̄)` with `Q^v = Q^ξ (λI − Y)⁻¹`, together
//! with the contract ellipsoid `𝒱_C` (center `Π_C v̄`, shape
//! `Π_C (λI−Y) Σ (λI−Y)ᵀ Π_Cᵀ`). Everything here verifies claims about
//! the TRUE closed loop: simulation always steps the original state
//! equation, never the surrogate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::infograph::{coupling_projector, Decomposition, Projector};
use crate::linalg;
use crate::model::{ConstraintSet, CostSpec, SystemModel};
use crate::problem::{PreparedProblem, ProblemInstance};
use crate::sampling::{sample_rng, EllipsoidSampler};
use crate::sdp::{SdpSolution, SolverReport};
use crate::surrogate::{apply_z_inverse_right, SurrogateOperators};
use crate::{Error, Result};

/// `{y : (y − c)ᵀ S⁻¹ (y − c) ≤ 1}` with precomputed inverse shape.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    inv_shape: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        if center.len() != shape.nrows() {
            return Err(Error::DimensionMismatch {
                context: "ellipsoid".into(),
                expected: format!("{0}x{0} shape", center.len()),
                got: format!("{}x{}", shape.nrows(), shape.ncols()),
            });
        }
        if shape.nrows() > 0 {
            linalg::check_positive_definite(&shape, "ellipsoid shape")
                .map_err(|e| Error::SingularShape(e.to_string()))?;
        }
        let inv_shape = linalg::symmetric_inverse(&shape, linalg::EIG_FLOOR);
        Ok(Self {
            center,
            shape,
            inv_shape,
        })
    }

    /// Zero-dimensional ellipsoid for partially nested instances.
    pub fn empty() -> Self {
        Self {
            center: DVector::zeros(0),
            shape: DMatrix::zeros(0, 0),
            inv_shape: DMatrix::zeros(0, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Membership functional `(y − c)ᵀ S⁻¹ (y − c)`; `≤ 1` inside.
    pub fn membership(&self, y: &DVector<f64>) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let d = y - &self.center;
        (d.transpose() * &self.inv_shape * &d)[(0, 0)]
    }
}

/// Membership functional of a coupling-state trajectory in a contract
/// set.
pub fn contract_membership(x_c: &DVector<f64>, e: &Ellipsoid) -> Result<f64> {
    if x_c.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            context: "contract membership".into(),
            expected: format!("{}", e.dim()),
            got: format!("{}", x_c.len()),
        });
    }
    Ok(e.membership(x_c))
}

/// Recovered affine decentralized policy with its contract.
#[derive(Debug, Clone)]
pub struct ContractPolicy {
    pub u_bar: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub q_w: DMatrix<f64>,
    pub q_v: DMatrix<f64>,
    pub lambda: f64,
    pub y: DMatrix<f64>,
    pub beta: f64,
    pub contract: Ellipsoid,
    /// Selection of coupling coordinates out of the state trajectory.
    pub pi_c: Projector,
}

/// Recover the implementable policy from an optimal report of the joint
/// program.
pub fn recover_policy(report: &SolverReport, prep: &PreparedProblem) -> Result<ContractPolicy> {
    let sol = SdpSolution::from_report(report, prep)?;
    recover_from_solution(&sol, prep)
}

/// Recover the implementable policy from typed solution values.
///
/// `Q^v = Q^ξ (λI − Y)⁻¹` is computed by block forward substitution; the
/// change-of-variable lemma guarantees it lands back in the `Q^v`
/// pattern, so off-pattern entries beyond 1e-9 signal an assembly bug and
/// are rejected rather than silently truncated.
pub fn recover_from_solution(
    sol: &SdpSolution,
    prep: &PreparedProblem,
) -> Result<ContractPolicy> {
    let model = prep.model();
    let time = model.state_traj_blocks();
    let q_v = apply_z_inverse_right(&sol.q_xi, sol.lambda, &sol.y, &time);
    prep.qc.check_conforms(&q_v, 1e-9, "recovered Q_v")?;
    let q_v = prep.qc.project(&q_v);

    let contract = if prep.is_partially_nested() {
        Ellipsoid::empty()
    } else {
        let z = crate::surrogate::z_matrix(sol.lambda, &sol.y);
        let zc = prep.pi_c.apply_left(&z);
        let shape = &zc * prep.sigma() * zc.transpose();
        Ellipsoid::new(prep.pi_c.apply(&sol.v_bar), shape)?
    };
    Ok(ContractPolicy {
        u_bar: sol.u_bar.clone(),
        v_bar: sol.v_bar.clone(),
        q_w: sol.q_w.clone(),
        q_v,
        lambda: sol.lambda,
        y: sol.y.clone(),
        beta: sol.beta,
        contract,
        pi_c: prep.pi_c.clone(),
    })
}

/// One closed-loop rollout.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    /// Contract membership functional minus one (prefix values are
    /// dominated by the full-trajectory value, so this is the max over
    /// prefixes).
    pub contract_margin: f64,
    /// `max_i (F_x x + F_u u + F_w w − g)_i`.
    pub constraint_residual: f64,
}

fn check_causal(m: &DMatrix<f64>, model: &SystemModel, context: &str) -> Result<()> {
    let n_x = model.state_dim();
    let n_u = model.input_dim();
    for t in 0..model.horizon() {
        for s in (t + 1)..=model.horizon() {
            let blk = m.view((t * n_u, s * n_x), (n_u, n_x));
            if blk.amax() != 0.0 {
                return Err(Error::CausalityViolation {
                    context: context.to_string(),
                    t,
                    s,
                });
            }
        }
    }
    Ok(())
}

/// Simulate the true closed loop under the recovered policy for one
/// disturbance trajectory (`w` starts with the initial state block).
///
/// At each step `u(t) = [ū + Q^w w + Q^v(x − v̄)]_t`; the structural
/// causality of both gains is asserted up front, so the future state
/// blocks multiply exact zeros.
pub fn simulate(
    instance: &ProblemInstance,
    policy: &ContractPolicy,
    w: &DVector<f64>,
) -> Result<SimulationResult> {
    let model = &instance.model;
    check_causal(&policy.q_w, model, "Q_w")?;
    check_causal(&policy.q_v, model, "Q_v")?;
    let (x, u) = closed_loop(model, policy, w);

    let cons = &instance.constraints;
    let residual_vec = &cons.fx * &x + &cons.fu * &u + &cons.fw * w - &cons.g;
    let constraint_residual = residual_vec.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let contract_margin = policy.contract.membership(&policy.pi_c.apply(&x)) - 1.0;
    Ok(SimulationResult {
        x,
        u,
        w: w.clone(),
        contract_margin,
        constraint_residual,
    })
}

fn closed_loop(
    model: &SystemModel,
    policy: &ContractPolicy,
    w: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n_x = model.state_dim();
    let n_u = model.input_dim();
    let horizon = model.horizon();
    let mut x = DVector::zeros(model.traj_state_dim());
    let mut u = DVector::zeros(model.traj_input_dim());
    x.rows_mut(0, n_x).copy_from(&w.rows(0, n_x));
    let feedback_w = &policy.q_w * w;
    for t in 0..horizon {
        // Future blocks of x are still zero; the causality check above
        // guarantees they meet structural zeros of Q_v.
        let centered = &x - &policy.v_bar;
        let ut = policy.u_bar.rows(t * n_u, n_u)
            + feedback_w.rows(t * n_u, n_u)
            + policy.q_v.rows(t * n_u, n_u) * centered;
        u.rows_mut(t * n_u, n_u).copy_from(&ut);
        let xt = x.rows(t * n_x, n_x).into_owned();
        let next = model.a(t) * xt
            + model.b(t) * ut
            + w.rows((t + 1) * n_x, n_x).into_owned();
        x.rows_mut((t + 1) * n_x, n_x).copy_from(&next);
    }
    (x, u)
}

/// Analytic robust margins of the SOC rows at given solution values: per
/// constraint row, left side minus right side of the reformulated robust
/// inequality. Nonpositive margins certify robust feasibility.
pub fn worst_case_margins(
    sol: &SdpSolution,
    constraints: &ConstraintSet,
    sqrt_sigma: &DMatrix<f64>,
) -> DVector<f64> {
    let g1 = (&constraints.fx * &sol.p_w + &constraints.fu * &sol.q_w + &constraints.fw)
        * sqrt_sigma;
    let g2 = (&constraints.fx * &sol.p_xi + &constraints.fu * &sol.q_xi) * sqrt_sigma;
    let rhs = &constraints.g - &constraints.fx * &sol.x_bar - &constraints.fu * &sol.u_bar;
    DVector::from_fn(constraints.num_rows(), |i, _| {
        g1.row(i).norm() + g2.row(i).norm() - rhs[i]
    })
}

/// Surrogate closed-loop map `f_φ(w, v_C)`: the surrogate trajectory
/// under the policy when the fictitious signal is `v_C`.
pub fn surrogate_closed_loop(
    ops: &SurrogateOperators,
    policy: &ContractPolicy,
    w: &DVector<f64>,
    v_c: &DVector<f64>,
) -> DVector<f64> {
    let v_full = policy.pi_c.scatter(v_c);
    let u = &policy.u_bar + &policy.q_w * w + &policy.q_v * (v_full - &policy.v_bar);
    &ops.btil * u + &ops.ltil * w + &ops.htil * v_c
}

/// Strict-causality property of the surrogate map: if two fictitious
/// signals agree up to time `t−1`, the induced coupling-state prefixes
/// agree up to time `t`. Checked on random draws for every `t`; returns
/// `false` on any violation beyond 1e-9.
pub fn strict_causality_check(
    policy: &ContractPolicy,
    model: &SystemModel,
    d: &Decomposition,
) -> Result<bool> {
    use rand::Rng;
    let ops = crate::surrogate::build_surrogate_operators(model, d)?;
    let (pi_c, prefixes) = coupling_projector(d, model);
    let n_xc_traj = pi_c.nrows();
    if n_xc_traj == 0 {
        return Ok(true);
    }
    let per_step = n_xc_traj / (model.horizon() + 1);
    let mut rng = sample_rng(0x5eed, 0);
    for t in 0..=model.horizon() {
        for _ in 0..4 {
            let w = DVector::from_fn(model.traj_state_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let v1 = DVector::from_fn(n_xc_traj, |_, _| rng.gen_range(-1.0..1.0));
            let mut v2 = DVector::from_fn(n_xc_traj, |_, _| rng.gen_range(-1.0..1.0));
            // Agree on the prefix 0..t-1.
            for k in 0..t * per_step {
                v2[k] = v1[k];
            }
            let x1 = surrogate_closed_loop(&ops, policy, &w, &v1);
            let x2 = surrogate_closed_loop(&ops, policy, &w, &v2);
            let p1 = prefixes[t].apply(&x1);
            let p2 = prefixes[t].apply(&x2);
            if (p1 - p2).amax() > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Analytic expectation of the surrogate cost at a solution, with
/// separate second moments for the disturbance and the primitive
/// disturbance (identical under the i.i.d.-copy assumption).
pub fn expected_cost(
    sol: &SdpSolution,
    m_w: &DMatrix<f64>,
    m_xi: &DMatrix<f64>,
    cost: &CostSpec,
) -> f64 {
    let quad = |a: &DMatrix<f64>, r: &DMatrix<f64>, m: &DMatrix<f64>| -> f64 {
        // Tr(Aᵀ R A M)
        (r * a * m).dot(a)
    };
    let mut total = 0.0;
    total += quad(&sol.p_w, &cost.rx, m_w);
    total += quad(&sol.p_xi, &cost.rx, m_xi);
    total += (sol.x_bar.transpose() * &cost.rx * &sol.x_bar)[(0, 0)];
    total += quad(&sol.q_w, &cost.ru, m_w);
    total += quad(&sol.q_xi, &cost.ru, m_xi);
    total += (sol.u_bar.transpose() * &cost.ru * &sol.u_bar)[(0, 0)];
    total
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of the TRUE closed-loop cost
/// `E[xᵀ R_x x + uᵀ R_u u]` under the recovered policy, sampling `w`
/// uniformly from its support.
pub fn monte_carlo_cost(
    instance: &ProblemInstance,
    policy: &ContractPolicy,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let sampler = EllipsoidSampler::new(instance.uncertainty.sigma())?;
    let cost = &instance.cost;
    let model = &instance.model;
    check_causal(&policy.q_w, model, "Q_w")?;
    check_causal(&policy.q_v, model, "Q_v")?;
    let costs: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let w = sampler.interior(&mut rng);
            let (x, u) = closed_loop(model, policy, &w);
            (x.transpose() * &cost.rx * &x)[(0, 0)] + (u.transpose() * &cost.ru * &u)[(0, 0)]
        })
        .collect();
    Ok(mean_stderr(&costs))
}

/// Monte-Carlo estimate of the surrogate cost
/// `E[x̃ᵀ R_x x̃ + ũᵀ R_u ũ]` with independent `(w, ξ)`, for
/// cross-checking the analytic objective.
pub fn surrogate_monte_carlo_cost(
    sol: &SdpSolution,
    cost: &CostSpec,
    sigma: &DMatrix<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let sampler = EllipsoidSampler::new(sigma)?;
    let costs: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let w = sampler.interior(&mut rng);
            let xi = sampler.interior(&mut rng);
            let x = &sol.x_bar + &sol.p_w * &w + &sol.p_xi * &xi;
            let u = &sol.u_bar + &sol.q_w * &w + &sol.q_xi * &xi;
            (x.transpose() * &cost.rx * &x)[(0, 0)] + (u.transpose() * &cost.ru * &u)[(0, 0)]
        })
        .collect();
    Ok(mean_stderr(&costs))
}

/// Aggregate verification of a policy over sampled disturbances (half
/// interior, half boundary).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VerificationSummary {
    pub samples: usize,
    /// `max` over samples of the worst constraint-row residual.
    pub max_constraint_residual: f64,
    /// `max` over samples of the contract membership functional.
    pub max_contract_membership: f64,
}

/// Per-sample verification outcome.
#[derive(Debug, Clone, Copy)]
pub struct SampleOutcome {
    pub constraint_residual: f64,
    pub contract_membership: f64,
}

/// Run `n_samples` true-loop simulations; sample `i` is fully determined
/// by `(seed, i)`, so parallel evaluation is reproducible.
pub fn verification_samples(
    instance: &ProblemInstance,
    policy: &ContractPolicy,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SampleOutcome>> {
    let sampler = EllipsoidSampler::new(instance.uncertainty.sigma())?;
    // Fail fast on acausal gains before spawning workers.
    check_causal(&policy.q_w, &instance.model, "Q_w")?;
    check_causal(&policy.q_v, &instance.model, "Q_v")?;
    Ok((0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let w = sampler.mixed(&mut rng, i);
            let sim = simulate(instance, policy, &w).expect("causality pre-checked");
            SampleOutcome {
                constraint_residual: sim.constraint_residual,
                contract_membership: sim.contract_margin + 1.0,
            }
        })
        .collect())
}

/// Run `n_samples` true-loop simulations and reduce the worst residuals.
pub fn verify_policy(
    instance: &ProblemInstance,
    policy: &ContractPolicy,
    n_samples: usize,
    seed: u64,
) -> Result<VerificationSummary> {
    let rows = verification_samples(instance, policy, n_samples, seed)?;
    let mut max_res = f64::NEG_INFINITY;
    let mut max_mem = 0.0f64;
    for s in rows {
        max_res = max_res.max(s.constraint_residual);
        max_mem = max_mem.max(s.contract_membership);
    }
    Ok(VerificationSummary {
        samples: n_samples,
        max_constraint_residual: max_res,
        max_contract_membership: max_mem,
    })
}
