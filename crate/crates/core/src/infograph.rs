//! Information-structure analysis.
//!
//! Subsystems are indexed `0..N` internally (file formats use 1-based
//! labels). An edge `(j, i)` in the information graph means subsystem `i`
//! observes subsystem `j`'s local state; an edge `(j, i)` in a physical
//! graph means `j`'s state (or input) enters `i`'s state equation.
//!
//! The decomposition splits each in-neighborhood `V_I⁻(i)` into the nested
//! set `N(i)` — subsystems whose local disturbances `i` can reconstruct —
//! and the information-coupling set `C(i) = V_I⁻(i) \ N(i)`. Membership
//! `j ∈ N(i)` requires both
//!
//! * `V_A⁻(j) ⊆ V_I⁻(i)` (all states driving `j` are observed), and
//! * `⋃_{k ∈ V_B⁻(j)} V_I⁻(k) ⊆ V_I⁻(i)` (all inputs driving `j` can be
//!   reconstructed from observed information).

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::model::SystemModel;
use crate::{Error, Result};

/// Entry magnitude above which a dynamics block counts as nonzero when
/// extracting the physical coupling graphs.
pub const DEFAULT_GRAPH_TOL: f64 = 1e-12;

/// A simple directed graph over subsystem indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    num_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    /// Graph from `(from, to)` edge pairs; duplicate edges collapse.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= num_nodes || i >= num_nodes {
                return Err(Error::Input(format!(
                    "edge ({j}, {i}) out of range for {num_nodes} nodes"
                )));
            }
            set.insert((j, i));
        }
        Ok(Self {
            num_nodes,
            edges: set,
        })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(num_nodes: usize) -> Self {
        let mut edges = BTreeSet::new();
        for j in 0..num_nodes {
            for i in 0..num_nodes {
                edges.insert((j, i));
            }
        }
        Self { num_nodes, edges }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// In-neighborhood `V⁻(i) = {j : (j, i) ∈ E}`.
    pub fn in_neighbors(&self, i: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(_, to)| to == i)
            .map(|&(from, _)| from)
            .collect()
    }

    /// Out-neighborhood `V⁺(i) = {j : (i, j) ∈ E}`.
    pub fn out_neighbors(&self, i: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(from, _)| from == i)
            .map(|&(_, to)| to)
            .collect()
    }
}

/// Extract the physical coupling graphs `G_A`, `G_B` from the dynamics:
/// edge `(j, i)` is present iff some block `A_{ij}(t)` (resp. `B_{ij}(t)`)
/// has an entry exceeding `tol` in magnitude.
pub fn physical_graphs(model: &SystemModel, tol: f64) -> (DirectedGraph, DirectedGraph) {
    let n = model.num_subsystems();
    let mut ea = BTreeSet::new();
    let mut eb = BTreeSet::new();
    for t in 0..model.horizon() {
        for i in 0..n {
            for j in 0..n {
                if !ea.contains(&(j, i)) && model.a_block(t, i, j).amax() > tol {
                    ea.insert((j, i));
                }
                if !eb.contains(&(j, i)) && model.b_block(t, i, j).amax() > tol {
                    eb.insert((j, i));
                }
            }
        }
    }
    (
        DirectedGraph {
            num_nodes: n,
            edges: ea,
        },
        DirectedGraph {
            num_nodes: n,
            edges: eb,
        },
    )
}

/// The nested/coupling partition of each subsystem's information.
#[derive(Debug, Clone)]
pub struct Decomposition {
    num_nodes: usize,
    nested: Vec<BTreeSet<usize>>,
    coupling: Vec<BTreeSet<usize>>,
    coupling_union: BTreeSet<usize>,
    coupling_graph: DirectedGraph,
}

impl Decomposition {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Nested set `N(i)`.
    pub fn nested(&self, i: usize) -> &BTreeSet<usize> {
        &self.nested[i]
    }

    /// Coupling set `C(i)`.
    pub fn coupling(&self, i: usize) -> &BTreeSet<usize> {
        &self.coupling[i]
    }

    /// Union `C = ⋃ C(i)`, ascending.
    pub fn coupling_union(&self) -> &BTreeSet<usize> {
        &self.coupling_union
    }

    /// The information-coupling graph `G_C`.
    pub fn coupling_graph(&self) -> &DirectedGraph {
        &self.coupling_graph
    }

    /// Per-subsystem state dimensions restricted to `C`, ascending in the
    /// subsystem index.
    pub fn coupling_state_dims(&self, model: &SystemModel) -> Vec<usize> {
        self.coupling_union
            .iter()
            .map(|&j| model.nx()[j])
            .collect()
    }

    /// Stacked coupling-state dimension `n_x^C` at a single time step.
    pub fn coupling_state_dim(&self, model: &SystemModel) -> usize {
        self.coupling_state_dims(model).iter().sum()
    }
}

/// Compute the information decomposition from the information graph and
/// the physical coupling graphs.
pub fn decompose(
    g_i: &DirectedGraph,
    g_a: &DirectedGraph,
    g_b: &DirectedGraph,
) -> Result<Decomposition> {
    let n = g_i.num_nodes();
    for g in [g_a, g_b] {
        if g.num_nodes() != n {
            return Err(Error::NodeCountMismatch(n, g.num_nodes()));
        }
    }
    let obs: Vec<BTreeSet<usize>> = (0..n).map(|i| g_i.in_neighbors(i)).collect();
    let mut nested = Vec::with_capacity(n);
    let mut coupling = Vec::with_capacity(n);
    for i in 0..n {
        let mut n_i = BTreeSet::new();
        let mut c_i = BTreeSet::new();
        for &j in &obs[i] {
            let cond1 = g_a.in_neighbors(j).is_subset(&obs[i]);
            let cond2 = g_b
                .in_neighbors(j)
                .iter()
                .all(|&k| obs[k].is_subset(&obs[i]));
            if cond1 && cond2 {
                n_i.insert(j);
            } else {
                c_i.insert(j);
            }
        }
        nested.push(n_i);
        coupling.push(c_i);
    }
    let coupling_union: BTreeSet<usize> = coupling.iter().flatten().copied().collect();
    let coupling_edges: BTreeSet<(usize, usize)> = g_i
        .edges()
        .filter(|&(j, i)| coupling[i].contains(&j))
        .collect();
    Ok(Decomposition {
        num_nodes: n,
        nested,
        coupling,
        coupling_union,
        coupling_graph: DirectedGraph {
            num_nodes: n,
            edges: coupling_edges,
        },
    })
}

/// True iff the information structure is partially nested (`C = ∅`).
pub fn is_partially_nested(d: &Decomposition) -> bool {
    d.coupling_union.is_empty()
}

/// A coordinate-selection map from `R^domain` onto a subset of rows.
///
/// Row `r` of the dense form has a single unit entry in column `sel[r]`,
/// so `Π Πᵀ = I` holds exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projector {
    sel: Vec<usize>,
    domain: usize,
}

impl Projector {
    /// Projector with no rows (partially nested instances).
    pub fn trivial_empty(domain: usize) -> Self {
        Self {
            sel: Vec::new(),
            domain,
        }
    }

    pub fn nrows(&self) -> usize {
        self.sel.len()
    }

    pub fn ncols(&self) -> usize {
        self.domain
    }

    /// Selected source index of row `r`.
    pub fn selected(&self, r: usize) -> usize {
        self.sel[r]
    }

    /// `Π x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.sel.len(), |r, _| x[self.sel[r]])
    }

    /// `Π M` (gather rows of `M`).
    pub fn apply_left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.sel.len(), m.ncols());
        for (r, &src) in self.sel.iter().enumerate() {
            out.row_mut(r).copy_from(&m.row(src));
        }
        out
    }

    /// `M Πᵀ` (gather columns of `M`).
    pub fn apply_right_transpose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), self.sel.len());
        for (r, &src) in self.sel.iter().enumerate() {
            out.column_mut(r).copy_from(&m.column(src));
        }
        out
    }

    /// `Πᵀ y` (scatter back into the full space).
    pub fn scatter(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.domain);
        for (r, &src) in self.sel.iter().enumerate() {
            out[src] = y[r];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.sel.len(), self.domain);
        for (r, &src) in self.sel.iter().enumerate() {
            m[(r, src)] = 1.0;
        }
        m
    }
}

/// Build the coupling-state projector `Π_C` and the prefix family
/// `Π_C^{0:t}` for `t = 0..T`.
///
/// Rows are ordered time-major, then by subsystem index within `C`, then
/// by local coordinate, so each prefix is a contiguous leading row range.
pub fn coupling_projector(
    d: &Decomposition,
    model: &SystemModel,
) -> (Projector, Vec<Projector>) {
    let mut sel = Vec::new();
    for t in 0..=model.horizon() {
        for &j in d.coupling_union() {
            for k in 0..model.nx()[j] {
                sel.push(model.state_index(t, j, k));
            }
        }
    }
    let per_step = d.coupling_state_dim(model);
    let full = Projector {
        sel,
        domain: model.traj_state_dim(),
    };
    let prefixes = (0..=model.horizon())
        .map(|t| Projector {
            sel: full.sel[..per_step * (t + 1)].to_vec(),
            domain: full.domain,
        })
        .collect();
    (full, prefixes)
}

/// Reconstruct the local disturbance `w_j(t)` of a nested subsystem
/// `j ∈ N(i)` from observed states and reconstructed inputs:
/// `w_j(t) = x_j(t+1) − Σ_{k ∈ V_A⁻(j)} A_{jk}(t) x_k(t)
///           − Σ_{k ∈ V_B⁻(j)} B_{jk}(t) u_k(t)`.
pub fn reconstruct_nested_disturbance(
    d: &Decomposition,
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    i: usize,
    j: usize,
    t: usize,
) -> Result<DVector<f64>> {
    if !d.nested(i).contains(&j) {
        return Err(Error::NotNested { i, j });
    }
    let (g_a, g_b) = physical_graphs(model, DEFAULT_GRAPH_TOL);
    let n_x = model.state_dim();
    let n_u = model.input_dim();
    let xs = model.state_blocks();
    let us = model.input_blocks();

    let x_next = x
        .rows((t + 1) * n_x + xs.offset(j), model.nx()[j])
        .into_owned();
    let mut w = x_next;
    for &k in &g_a.in_neighbors(j) {
        let xk = x.rows(t * n_x + xs.offset(k), model.nx()[k]).into_owned();
        w -= model.a_block(t, j, k) * xk;
    }
    for &k in &g_b.in_neighbors(j) {
        let uk = u.rows(t * n_u + us.offset(k), model.nu()[k]).into_owned();
        w -= model.b_block(t, j, k) * uk;
    }
    Ok(w)
}
