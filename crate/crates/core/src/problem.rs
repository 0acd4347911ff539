//! Problem description files and end-to-end preparation.
//!
//! A problem JSON file carries the system, disturbance, constraint, cost,
//! and information-graph data. Matrices are dense row-major arrays; `A`
//! and `B` accept either one matrix (time-invariant) or one per time step.
//! Subsystem indices in `information_graph` are 1-based, matching the
//! labeling used in reports.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::infograph::{
    coupling_projector, decompose, physical_graphs, Decomposition, DirectedGraph, Projector,
    DEFAULT_GRAPH_TOL,
};
use crate::linalg;
use crate::model::{
    build_trajectory_operators, ConstraintSet, CostSpec, EllipsoidalUncertainty, SystemModel,
    TrajectoryOperators,
};
use crate::surrogate::{
    build_surrogate_operators, pattern_qc, pattern_qn, pattern_y, PatternMask, SurrogateOperators,
};
use crate::{Error, Result};

/// A fully validated problem instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub model: SystemModel,
    pub uncertainty: EllipsoidalUncertainty,
    pub constraints: ConstraintSet,
    pub cost: CostSpec,
    pub info_graph: DirectedGraph,
}

/// Everything derived from an instance that assembly and verification
/// consume: decomposition, lifted operators, gain patterns, projector, and
/// the factorizations of the support shape.
#[derive(Debug, Clone)]
pub struct PreparedProblem {
    pub instance: ProblemInstance,
    pub traj_ops: TrajectoryOperators,
    pub decomposition: Decomposition,
    pub surrogate: SurrogateOperators,
    pub qn: PatternMask,
    pub qc: PatternMask,
    pub ymask: PatternMask,
    pub pi_c: Projector,
    pub pi_c_prefixes: Vec<Projector>,
    pub sqrt_sigma: DMatrix<f64>,
    pub inv_sigma: DMatrix<f64>,
}

impl PreparedProblem {
    pub fn model(&self) -> &SystemModel {
        &self.instance.model
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.instance.uncertainty.sigma()
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        self.instance.uncertainty.second_moment()
    }

    /// True iff the instance is partially nested (no contract machinery).
    pub fn is_partially_nested(&self) -> bool {
        crate::infograph::is_partially_nested(&self.decomposition)
    }

    /// Stacked coupling trajectory dimension `N_x^C`.
    pub fn coupling_traj_dim(&self) -> usize {
        self.pi_c.nrows()
    }
}

/// Validate an instance and derive all synthesis inputs.
pub fn prepare(instance: ProblemInstance) -> Result<PreparedProblem> {
    let model = &instance.model;
    crate::model::validate_system(model)?;
    let n_x_traj = model.traj_state_dim();
    let n_u_traj = model.traj_input_dim();
    if instance.info_graph.num_nodes() != model.num_subsystems() {
        return Err(Error::NodeCountMismatch(
            model.num_subsystems(),
            instance.info_graph.num_nodes(),
        ));
    }
    if instance.uncertainty.dim() != n_x_traj {
        return Err(Error::DimensionMismatch {
            context: "Sigma".into(),
            expected: format!("{0}x{0}", n_x_traj),
            got: format!("{0}x{0}", instance.uncertainty.dim()),
        });
    }
    for (name, cols, want) in [
        ("Fx", instance.constraints.fx.ncols(), n_x_traj),
        ("Fu", instance.constraints.fu.ncols(), n_u_traj),
        ("Fw", instance.constraints.fw.ncols(), n_x_traj),
        ("Rx", instance.cost.rx.ncols(), n_x_traj),
        ("Ru", instance.cost.ru.ncols(), n_u_traj),
    ] {
        if cols != want {
            return Err(Error::DimensionMismatch {
                context: name.into(),
                expected: format!("{want} columns"),
                got: format!("{cols} columns"),
            });
        }
    }

    let traj_ops = build_trajectory_operators(model)?;
    let (g_a, g_b) = physical_graphs(model, DEFAULT_GRAPH_TOL);
    let decomposition = decompose(&instance.info_graph, &g_a, &g_b)?;
    let surrogate = build_surrogate_operators(model, &decomposition)?;
    let qn = pattern_qn(&decomposition, model);
    let qc = pattern_qc(&decomposition, model);
    let ymask = pattern_y(decomposition.coupling_graph(), model);
    let (pi_c, pi_c_prefixes) = coupling_projector(&decomposition, model);
    let sqrt_sigma = linalg::symmetric_sqrt(instance.uncertainty.sigma(), linalg::EIG_FLOOR);
    let inv_sigma = linalg::symmetric_inverse(instance.uncertainty.sigma(), linalg::EIG_FLOOR);

    Ok(PreparedProblem {
        instance,
        traj_ops,
        decomposition,
        surrogate,
        qn,
        qc,
        ymask,
        pi_c,
        pi_c_prefixes,
        sqrt_sigma,
        inv_sigma,
    })
}

// --- JSON schema ---------------------------------------------------------

type JsonMatrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSeq {
    Single(JsonMatrix),
    PerStep(Vec<JsonMatrix>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Keyword(String),
    Dense(JsonMatrix),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintsSpec {
    Box {
        state_inf_bound: f64,
        input_inf_bound: f64,
    },
    Explicit {
        #[serde(rename = "Fx")]
        fx: JsonMatrix,
        #[serde(rename = "Fu")]
        fu: JsonMatrix,
        #[serde(rename = "Fw")]
        fw: JsonMatrix,
        g: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostJson {
    Periodic {
        state_weights: Vec<f64>,
        input_weights: Vec<f64>,
    },
    Explicit {
        #[serde(rename = "Rx")]
        rx: JsonMatrix,
        #[serde(rename = "Ru")]
        ru: JsonMatrix,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsystemsSpec {
    pub nx: Vec<usize>,
    pub nu: Vec<usize>,
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub subsystems: SubsystemsSpec,
    pub horizon: usize,
    #[serde(rename = "A")]
    pub a: MatrixSeq,
    #[serde(rename = "B")]
    pub b: MatrixSeq,
    pub sigma: SigmaSpec,
    pub distribution: String,
    pub constraints: ConstraintsSpec,
    pub cost: CostJson,
    /// 1-based `[from, to]` pairs.
    pub information_graph: Vec<[usize; 2]>,
}

fn to_dmatrix(m: &JsonMatrix, context: &str) -> Result<DMatrix<f64>> {
    let rows = m.len();
    if rows == 0 {
        return Err(Error::Input(format!("{context}: empty matrix")));
    }
    let cols = m[0].len();
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::Input(format!("{context}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| m[r][c]))
}

fn from_dmatrix(m: &DMatrix<f64>) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec serializes")
    }

    /// Serializable snapshot of an in-memory instance (dense forms).
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let model = &instance.model;
        Self {
            subsystems: SubsystemsSpec {
                nx: model.nx().to_vec(),
                nu: model.nu().to_vec(),
            },
            horizon: model.horizon(),
            a: MatrixSeq::PerStep((0..model.horizon()).map(|t| from_dmatrix(model.a(t))).collect()),
            b: MatrixSeq::PerStep((0..model.horizon()).map(|t| from_dmatrix(model.b(t))).collect()),
            sigma: SigmaSpec::Dense(from_dmatrix(instance.uncertainty.sigma())),
            distribution: "uniform".to_string(),
            constraints: ConstraintsSpec::Explicit {
                fx: from_dmatrix(&instance.constraints.fx),
                fu: from_dmatrix(&instance.constraints.fu),
                fw: from_dmatrix(&instance.constraints.fw),
                g: instance.constraints.g.iter().copied().collect(),
            },
            cost: CostJson::Explicit {
                rx: from_dmatrix(&instance.cost.rx),
                ru: from_dmatrix(&instance.cost.ru),
            },
            information_graph: instance
                .info_graph
                .edges()
                .map(|(j, i)| [j + 1, i + 1])
                .collect(),
        }
    }

    /// Build a validated instance. `x_max_override` replaces the state
    /// bound of the box shorthand; it is rejected for explicit constraint
    /// matrices.
    pub fn to_instance(&self, x_max_override: Option<f64>) -> Result<ProblemInstance> {
        let nx = self.subsystems.nx.clone();
        let nu = self.subsystems.nu.clone();
        let expand = |seq: &MatrixSeq, name: &str| -> Result<Vec<DMatrix<f64>>> {
            match seq {
                MatrixSeq::Single(m) => Ok(vec![to_dmatrix(m, name)?; self.horizon]),
                MatrixSeq::PerStep(ms) => {
                    if ms.len() == 1 {
                        return Ok(vec![to_dmatrix(&ms[0], name)?; self.horizon]);
                    }
                    ms.iter().map(|m| to_dmatrix(m, name)).collect()
                }
            }
        };
        let model = SystemModel::new(nx, nu, expand(&self.a, "A")?, expand(&self.b, "B")?)?;
        let n_x_traj = model.traj_state_dim();
        let n_u_traj = model.traj_input_dim();

        let sigma = match &self.sigma {
            SigmaSpec::Keyword(k) if k == "identity" => DMatrix::identity(n_x_traj, n_x_traj),
            SigmaSpec::Keyword(k) => {
                return Err(Error::Input(format!("unknown sigma keyword '{k}'")))
            }
            SigmaSpec::Dense(m) => to_dmatrix(m, "sigma")?,
        };
        if self.distribution != "uniform" {
            return Err(Error::Input(format!(
                "unsupported distribution '{}'; only \"uniform\" is supported",
                self.distribution
            )));
        }
        let uncertainty = EllipsoidalUncertainty::uniform(sigma)?;

        let constraints = match (&self.constraints, x_max_override) {
            (
                ConstraintsSpec::Box {
                    state_inf_bound,
                    input_inf_bound,
                },
                over,
            ) => ConstraintSet::inf_norm_box(
                n_x_traj,
                n_u_traj,
                over.unwrap_or(*state_inf_bound),
                *input_inf_bound,
            ),
            (ConstraintsSpec::Explicit { fx, fu, fw, g }, None) => ConstraintSet::new(
                to_dmatrix(fx, "Fx")?,
                to_dmatrix(fu, "Fu")?,
                to_dmatrix(fw, "Fw")?,
                DVector::from_vec(g.clone()),
            )?,
            (ConstraintsSpec::Explicit { .. }, Some(_)) => {
                return Err(Error::Input(
                    "x_max override requires the state_inf_bound shorthand".into(),
                ))
            }
        };

        let cost = match &self.cost {
            CostJson::Periodic {
                state_weights,
                input_weights,
            } => CostSpec::from_periodic_weights(&model, state_weights, input_weights)?,
            CostJson::Explicit { rx, ru } => {
                CostSpec::new(to_dmatrix(rx, "Rx")?, to_dmatrix(ru, "Ru")?)?
            }
        };

        let n = model.num_subsystems();
        let mut edges = Vec::with_capacity(self.information_graph.len());
        for &[from, to] in &self.information_graph {
            if from == 0 || to == 0 || from > n || to > n {
                return Err(Error::Input(format!(
                    "information_graph edge [{from}, {to}] out of range 1..{n}"
                )));
            }
            edges.push((from - 1, to - 1));
        }
        let info_graph = DirectedGraph::from_edges(n, edges)?;

        Ok(ProblemInstance {
            model,
            uncertainty,
            constraints,
            cost,
            info_graph,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casestudy;

    #[test]
    fn parse_shorthand_problem() {
        let text = r#"{
            "subsystems": {"nx": [1, 1, 1], "nu": [1, 1, 1]},
            "horizon": 4,
            "A": [[0.5, 0, 0], [0.5, 0.5, 0], [0.5, 1.2, -1.2]],
            "B": [[0.1, 0, 0], [0, 1, 0], [0, 0, 1]],
            "sigma": "identity",
            "distribution": "uniform",
            "constraints": {"state_inf_bound": 2.0, "input_inf_bound": 2.5},
            "cost": {"state_weights": [0.1, 0.1, 2.0], "input_weights": [5.0, 5.0, 1.0]},
            "information_graph": [[1,1],[2,2],[3,3],[1,2],[2,3]]
        }"#;
        let spec = ProblemSpec::from_json(text).unwrap();
        let inst = spec.to_instance(None).unwrap();
        assert_eq!(inst.model.horizon(), 4);
        assert_eq!(inst.model.traj_state_dim(), 15);
        assert_eq!(inst.constraints.num_rows(), 2 * 15 + 2 * 12);
        assert_eq!(inst.uncertainty.second_moment()[(0, 0)], 1.0 / 17.0);
        assert!(inst.info_graph.has_edge(0, 1));
        assert!(!inst.info_graph.has_edge(1, 0));

        // Override the state bound.
        let inst2 = spec.to_instance(Some(1.25)).unwrap();
        assert_eq!(inst2.constraints.g[0], 1.25);
    }

    #[test]
    fn roundtrip_case_study_instance() {
        let inst = casestudy::instance("GI2", 2.0).unwrap();
        let spec = ProblemSpec::from_instance(&inst);
        let text = spec.to_json();
        let back = ProblemSpec::from_json(&text).unwrap().to_instance(None).unwrap();
        assert_eq!(back.model.horizon(), 15);
        assert_eq!(back.constraints.g, inst.constraints.g);
        assert_eq!(back.model.a(3), inst.model.a(3));
        assert_eq!(
            back.info_graph.edges().collect::<Vec<_>>(),
            inst.info_graph.edges().collect::<Vec<_>>()
        );
    }

    #[test]
    fn prepare_case_study() {
        let prep = prepare(casestudy::instance("GI2", 2.5).unwrap()).unwrap();
        assert_eq!(prep.coupling_traj_dim(), 32);
        assert!(!prep.is_partially_nested());
        let prep1 = prepare(casestudy::instance("GI1", 2.5).unwrap()).unwrap();
        assert!(prep1.is_partially_nested());
        assert_eq!(prep1.coupling_traj_dim(), 0);
    }

    #[test]
    fn reject_bad_graph_index() {
        let inst = casestudy::instance("GI2", 2.0).unwrap();
        let mut spec = ProblemSpec::from_instance(&inst);
        spec.information_graph.push([4, 1]);
        assert!(matches!(spec.to_instance(None), Err(Error::Input(_))));
    }

    #[test]
    fn xmax_override_rejected_for_explicit_rows() {
        let inst = casestudy::instance("GI2", 2.0).unwrap();
        let spec = ProblemSpec::from_instance(&inst);
        assert!(matches!(spec.to_instance(Some(1.0)), Err(Error::Input(_))));
    }
}
