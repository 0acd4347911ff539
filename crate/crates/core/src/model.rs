//! Networked LTV system model and its lifted trajectory-level operators.
//!
//! Trajectory stacking conventions, fixed here once for every downstream
//! module:
//!
//! * state trajectory `x = (x(0), …, x(T))`, dimension `N_x = n_x (T+1)`;
//! * input trajectory `u = (u(0), …, u(T-1))`, dimension `N_u = n_u T`;
//! * disturbance trajectory `w = (w(-1), w(0), …, w(T-1))`, dimension `N_x`,
//!   where the leading block `w(-1)` is the initial state `x(0)`.
//!
//! With these stackings the dynamics unroll to the exact identity
//! `x = B u + L w` with `B`, `L` lower block triangular in time and `L`
//! carrying identity diagonal blocks.

use nalgebra::{DMatrix, DVector};

use crate::block::{set_block, BlockLayout};
use crate::linalg;
use crate::{Error, Result};

/// Time-varying block dynamics of a network of `N` coupled subsystems.
#[derive(Debug, Clone)]
pub struct SystemModel {
    nx: Vec<usize>,
    nu: Vec<usize>,
    horizon: usize,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    state_blocks: BlockLayout,
    input_blocks: BlockLayout,
}

impl SystemModel {
    /// Build and validate a model. `a` and `b` hold one matrix per time
    /// step `t = 0..T-1`.
    pub fn new(
        nx: Vec<usize>,
        nu: Vec<usize>,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let state_blocks = BlockLayout::new(nx.clone());
        let input_blocks = BlockLayout::new(nu.clone());
        let model = Self {
            horizon: a.len(),
            nx,
            nu,
            a,
            b,
            state_blocks,
            input_blocks,
        };
        validate_system(&model)?;
        Ok(model)
    }

    /// Time-invariant convenience constructor: replicates `a`, `b` over the
    /// horizon.
    pub fn time_invariant(
        nx: Vec<usize>,
        nu: Vec<usize>,
        horizon: usize,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(nx, nu, vec![a; horizon], vec![b; horizon])
    }

    pub fn num_subsystems(&self) -> usize {
        self.nx.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Per-subsystem state dimensions.
    pub fn nx(&self) -> &[usize] {
        &self.nx
    }

    /// Per-subsystem input dimensions.
    pub fn nu(&self) -> &[usize] {
        &self.nu
    }

    /// Stacked state dimension `n_x` at a single time step.
    pub fn state_dim(&self) -> usize {
        self.state_blocks.total()
    }

    /// Stacked input dimension `n_u` at a single time step.
    pub fn input_dim(&self) -> usize {
        self.input_blocks.total()
    }

    /// Trajectory state dimension `N_x = n_x (T+1)`.
    pub fn traj_state_dim(&self) -> usize {
        self.state_dim() * (self.horizon + 1)
    }

    /// Trajectory input dimension `N_u = n_u T`.
    pub fn traj_input_dim(&self) -> usize {
        self.input_dim() * self.horizon
    }

    /// Subsystem partition of the per-step state space.
    pub fn state_blocks(&self) -> &BlockLayout {
        &self.state_blocks
    }

    /// Subsystem partition of the per-step input space.
    pub fn input_blocks(&self) -> &BlockLayout {
        &self.input_blocks
    }

    /// Time partition of the state/disturbance trajectory (`T+1` blocks).
    pub fn state_traj_blocks(&self) -> BlockLayout {
        BlockLayout::repeated(&[self.state_dim()], self.horizon + 1)
    }

    /// Time partition of the input trajectory (`T` blocks).
    pub fn input_traj_blocks(&self) -> BlockLayout {
        BlockLayout::repeated(&[self.input_dim()], self.horizon)
    }

    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        &self.a[t]
    }

    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        &self.b[t]
    }

    /// Block `A_{ij}(t)` (state coupling from subsystem `j` into `i`).
    pub fn a_block(&self, t: usize, i: usize, j: usize) -> DMatrix<f64> {
        self.a[t]
            .view(
                (self.state_blocks.offset(i), self.state_blocks.offset(j)),
                (self.nx[i], self.nx[j]),
            )
            .into_owned()
    }

    /// Block `B_{ij}(t)` (input coupling from subsystem `j` into `i`).
    pub fn b_block(&self, t: usize, i: usize, j: usize) -> DMatrix<f64> {
        self.b[t]
            .view(
                (self.state_blocks.offset(i), self.input_blocks.offset(j)),
                (self.nx[i], self.nu[j]),
            )
            .into_owned()
    }

    /// Scalar index of coordinate `k` of subsystem `i` at time `t` within
    /// the stacked state trajectory.
    pub fn state_index(&self, t: usize, i: usize, k: usize) -> usize {
        t * self.state_dim() + self.state_blocks.offset(i) + k
    }
}

/// Check all dimension invariants of a model.
pub fn validate_system(model: &SystemModel) -> Result<()> {
    if model.horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    if model.nx.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "subsystems".into(),
            expected: "N >= 1".into(),
            got: "0".into(),
        });
    }
    if model.nx.iter().any(|&n| n == 0) {
        return Err(Error::DimensionMismatch {
            context: "nx".into(),
            expected: "all nx[i] >= 1".into(),
            got: format!("{:?}", model.nx),
        });
    }
    if model.nu.len() != model.nx.len() {
        return Err(Error::DimensionMismatch {
            context: "nu".into(),
            expected: format!("{} entries", model.nx.len()),
            got: format!("{} entries", model.nu.len()),
        });
    }
    let n_x = model.state_dim();
    let n_u = model.input_dim();
    if model.a.len() != model.horizon || model.b.len() != model.horizon {
        return Err(Error::DimensionMismatch {
            context: "A/B sequences".into(),
            expected: format!("{} matrices", model.horizon),
            got: format!("{}/{}", model.a.len(), model.b.len()),
        });
    }
    for (t, m) in model.a.iter().enumerate() {
        if m.nrows() != n_x || m.ncols() != n_x {
            return Err(Error::DimensionMismatch {
                context: format!("A[{t}]"),
                expected: format!("{n_x}x{n_x}"),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    for (t, m) in model.b.iter().enumerate() {
        if m.nrows() != n_x || m.ncols() != n_u {
            return Err(Error::DimensionMismatch {
                context: format!("B[{t}]"),
                expected: format!("{n_x}x{n_u}"),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    Ok(())
}

/// Ellipsoidal disturbance support `{z : zᵀ Σ⁻¹ z ≤ 1}` together with the
/// second-moment matrix `M = E[w wᵀ]` of the trajectory distribution.
#[derive(Debug, Clone)]
pub struct EllipsoidalUncertainty {
    sigma: DMatrix<f64>,
    second_moment: DMatrix<f64>,
}

impl EllipsoidalUncertainty {
    pub fn new(sigma: DMatrix<f64>, second_moment: DMatrix<f64>) -> Result<Self> {
        linalg::check_positive_definite(&sigma, "Sigma")?;
        if !linalg::is_symmetric(&second_moment, 1e-10) {
            return Err(Error::DimensionMismatch {
                context: "M".into(),
                expected: "symmetric matrix".into(),
                got: "asymmetric".into(),
            });
        }
        if second_moment.nrows() != sigma.nrows() {
            return Err(Error::DimensionMismatch {
                context: "M".into(),
                expected: format!("{0}x{0}", sigma.nrows()),
                got: format!("{}x{}", second_moment.nrows(), second_moment.ncols()),
            });
        }
        let min_eig = linalg::min_eigenvalue(&second_moment);
        if min_eig < -1e-9 {
            return Err(Error::NotPositiveDefinite {
                context: "M".into(),
                min_eig,
            });
        }
        Ok(Self {
            sigma,
            second_moment,
        })
    }

    /// Uncertainty with `w` uniformly distributed over the support
    /// ellipsoid, so that `M = Σ / (n + 2)`.
    pub fn uniform(sigma: DMatrix<f64>) -> Result<Self> {
        let m = second_moment_uniform(&sigma)?;
        Self::new(sigma, m)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.second_moment
    }
}

/// Second moment of the uniform distribution on `{z : zᵀ Σ⁻¹ z ≤ 1}`,
/// namely `Σ / (n + 2)`.
pub fn second_moment_uniform(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::check_positive_definite(sigma, "Sigma")?;
    let n = sigma.nrows() as f64;
    Ok(sigma / (n + 2.0))
}

/// Polyhedral trajectory constraints `F_x x + F_u u + F_w w ≤ g`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub fx: DMatrix<f64>,
    pub fu: DMatrix<f64>,
    pub fw: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl ConstraintSet {
    pub fn new(fx: DMatrix<f64>, fu: DMatrix<f64>, fw: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        let m = g.len();
        for (name, rows) in [("Fx", fx.nrows()), ("Fu", fu.nrows()), ("Fw", fw.nrows())] {
            if rows != m {
                return Err(Error::DimensionMismatch {
                    context: name.into(),
                    expected: format!("{m} rows"),
                    got: format!("{rows} rows"),
                });
            }
        }
        Ok(Self { fx, fu, fw, g })
    }

    /// Box constraints `‖x‖_∞ ≤ x_max`, `‖u‖_∞ ≤ u_max` over whole
    /// trajectories, with `F_w = 0`. Rows are ordered state-plus,
    /// state-minus, input-plus, input-minus.
    pub fn inf_norm_box(n_x_traj: usize, n_u_traj: usize, x_max: f64, u_max: f64) -> Self {
        let m = 2 * n_x_traj + 2 * n_u_traj;
        let mut fx = DMatrix::zeros(m, n_x_traj);
        let mut fu = DMatrix::zeros(m, n_u_traj);
        let fw = DMatrix::zeros(m, n_x_traj);
        let mut g = DVector::zeros(m);
        for c in 0..n_x_traj {
            fx[(c, c)] = 1.0;
            g[c] = x_max;
            fx[(n_x_traj + c, c)] = -1.0;
            g[n_x_traj + c] = x_max;
        }
        let base = 2 * n_x_traj;
        for c in 0..n_u_traj {
            fu[(base + c, c)] = 1.0;
            g[base + c] = u_max;
            fu[(base + n_u_traj + c, c)] = -1.0;
            g[base + n_u_traj + c] = u_max;
        }
        Self { fx, fu, fw, g }
    }

    pub fn num_rows(&self) -> usize {
        self.g.len()
    }
}

/// Quadratic trajectory cost `E[xᵀ R_x x + uᵀ R_u u]`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub rx: DMatrix<f64>,
    pub ru: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(rx: DMatrix<f64>, ru: DMatrix<f64>) -> Result<Self> {
        for (name, m) in [("Rx", &rx), ("Ru", &ru)] {
            if !linalg::is_symmetric(m, 1e-10) {
                return Err(Error::DimensionMismatch {
                    context: name.into(),
                    expected: "symmetric matrix".into(),
                    got: "asymmetric".into(),
                });
            }
            let min_eig = linalg::min_eigenvalue(m);
            if min_eig < -1e-9 {
                return Err(Error::NotPositiveDefinite {
                    context: name.into(),
                    min_eig,
                });
            }
        }
        Ok(Self { rx, ru })
    }

    /// Expand per-period diagonal weights into trajectory cost matrices
    /// `R_x = I_{T+1} ⊗ diag(state_w)`, `R_u = I_T ⊗ diag(input_w)`.
    pub fn from_periodic_weights(
        model: &SystemModel,
        state_w: &[f64],
        input_w: &[f64],
    ) -> Result<Self> {
        if state_w.len() != model.state_dim() || input_w.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "cost weights".into(),
                expected: format!("{} state / {} input", model.state_dim(), model.input_dim()),
                got: format!("{} / {}", state_w.len(), input_w.len()),
            });
        }
        let rx = kron_identity_diag(model.horizon + 1, state_w);
        let ru = kron_identity_diag(model.horizon, input_w);
        Self::new(rx, ru)
    }
}

fn kron_identity_diag(reps: usize, weights: &[f64]) -> DMatrix<f64> {
    let n = weights.len();
    let mut m = DMatrix::zeros(reps * n, reps * n);
    for r in 0..reps {
        for (k, &w) in weights.iter().enumerate() {
            m[(r * n + k, r * n + k)] = w;
        }
    }
    m
}

/// Lifted operators of the identity `x = B u + L w`.
#[derive(Debug, Clone)]
pub struct TrajectoryOperators {
    pub bop: DMatrix<f64>,
    pub lop: DMatrix<f64>,
}

/// Unroll the dynamics into the trajectory operators `B` and `L`.
///
/// Block `(t, s)` of `L` is the state-transition product
/// `Φ(t, s) = A(t-1)···A(s)` (with `Φ(t, t) = I`), applied to `w(s-1)`;
/// the first block column corresponds to `w(-1) = x(0)`. Block `(t, s)`
/// of `B` is `Φ(t, s+1) B(s)` for `s < t` and zero otherwise.
pub fn build_trajectory_operators(model: &SystemModel) -> Result<TrajectoryOperators> {
    validate_system(model)?;
    let horizon = model.horizon();
    let ops = build_lifted_operators(
        model,
        |t| model.a(t).clone(),
        |t| model.b(t).clone(),
        horizon,
    );
    Ok(TrajectoryOperators {
        bop: ops.0,
        lop: ops.1,
    })
}

/// Shared unrolling used for both the true and the surrogate dynamics:
/// given per-step `A(t)`-like and `B(t)`-like maps, produce the lifted
/// input and disturbance operators.
pub(crate) fn build_lifted_operators(
    model: &SystemModel,
    a_of: impl Fn(usize) -> DMatrix<f64>,
    b_of: impl Fn(usize) -> DMatrix<f64>,
    horizon: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n_x = model.state_dim();
    let rows = BlockLayout::repeated(&[n_x], horizon + 1);
    let cols_w = BlockLayout::repeated(&[n_x], horizon + 1);
    let cols_u = model.input_traj_blocks();

    let mut bop = DMatrix::zeros(rows.total(), cols_u.total());
    let mut lop = DMatrix::zeros(rows.total(), cols_w.total());

    // phis[s] = Φ(t, s) for the current row block t; grows by one each step.
    let mut phis: Vec<DMatrix<f64>> = vec![DMatrix::identity(n_x, n_x)];
    set_block(&mut lop, &rows, &cols_w, 0, 0, phis[0].as_view());

    for t in 1..=horizon {
        let a_prev = a_of(t - 1);
        for phi in phis.iter_mut() {
            *phi = &a_prev * &*phi;
        }
        phis.push(DMatrix::identity(n_x, n_x));
        for (s, phi) in phis.iter().enumerate() {
            set_block(&mut lop, &rows, &cols_w, t, s, phi.as_view());
        }
        for s_u in 0..t {
            let blk = &phis[s_u + 1] * b_of(s_u);
            set_block(&mut bop, &rows, &cols_u, t, s_u, blk.as_view());
        }
    }
    (bop, lop)
}
