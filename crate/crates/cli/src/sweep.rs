//! Parameter sweeps: solve/recover/verify across a grid of state bounds
//! and one or more information graphs, collect records, and write the
//! CSV table.

use std::io::Write as IoWrite;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use agc_core::infograph::DirectedGraph;
use agc_core::policy::{monte_carlo_cost, recover_from_solution, verify_policy, ContractPolicy};
use agc_core::problem::{prepare, PreparedProblem, ProblemInstance};
use agc_core::sdp::{assemble_program, solve, SdpSolution, SolveStatus, SolverOptions};
use agc_core::{Error, Result};

/// Sweep configuration: grid over the state bound, graphs to run, and
/// the verification effort per feasible point.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    /// `(name, graph)` pairs, each swept over the full grid.
    pub graphs: Vec<(String, DirectedGraph)>,
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| {
                self.start + (self.stop - self.start) * k as f64 / (self.count - 1).max(1) as f64
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 || !(self.stop > self.start) {
            return Err(Error::Input(
                "sweep grid must be strictly increasing with at least two points".into(),
            ));
        }
        Ok(())
    }
}

/// One sweep point in the output table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub x_max: f64,
    pub graph: String,
    pub status: String,
    pub objective: Option<f64>,
    pub solve_time_s: f64,
    pub max_constraint_margin: Option<f64>,
    pub max_contract_membership: Option<f64>,
    pub mc_cost_mean: Option<f64>,
    pub mc_cost_stderr: Option<f64>,
}

/// A solved sweep point with everything needed for plots and follow-up
/// analysis.
pub struct PointOutcome {
    pub record: SweepRecord,
    pub solved: Option<SolvedPoint>,
}

pub struct SolvedPoint {
    pub prep: PreparedProblem,
    pub report: agc_core::sdp::SolverReport,
    pub solution: SdpSolution,
    pub policy: ContractPolicy,
}

/// Build an instance for one grid point.
pub type InstanceFactory = dyn Fn(&DirectedGraph, f64) -> Result<ProblemInstance> + Sync;

/// Run the sweep; points execute in a worker pool, output order is fixed
/// (graph, then grid index). Per-point failures become records, never
/// panics.
pub fn run_sweep(spec: &SweepSpec, make_instance: &InstanceFactory) -> Result<Vec<PointOutcome>> {
    spec.validate()?;
    let grid = spec.grid();
    let tasks: Vec<(String, DirectedGraph, f64)> = spec
        .graphs
        .iter()
        .flat_map(|(name, g)| grid.iter().map(move |&x| (name.clone(), g.clone(), x)))
        .collect();
    Ok(tasks
        .into_par_iter()
        .map(|(name, graph, x_max)| run_point(&name, &graph, x_max, spec, make_instance))
        .collect())
}

fn run_point(
    name: &str,
    graph: &DirectedGraph,
    x_max: f64,
    spec: &SweepSpec,
    make_instance: &InstanceFactory,
) -> PointOutcome {
    let fail = |status: String, solve_time_s: f64| SweepRecord {
        x_max,
        graph: name.to_string(),
        status,
        objective: None,
        solve_time_s,
        max_constraint_margin: None,
        max_contract_membership: None,
        mc_cost_mean: None,
        mc_cost_stderr: None,
    };
    let started = std::time::Instant::now();
    let prep = match make_instance(graph, x_max).and_then(prepare) {
        Ok(p) => p,
        Err(e) => {
            return PointOutcome {
                record: fail(format!("error: {e}"), 0.0),
                solved: None,
            }
        }
    };
    let outcome = assemble_program(&prep).and_then(|program| solve(&program, &spec.solver));
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            return PointOutcome {
                record: fail(format!("error: {e}"), started.elapsed().as_secs_f64()),
                solved: None,
            }
        }
    };
    if !report.status.is_optimal() {
        return PointOutcome {
            record: fail(report.status.as_str().to_string(), report.solve_time_s),
            solved: None,
        };
    }
    let solved = SdpSolution::from_report(&report, &prep)
        .and_then(|sol| {
            let policy = recover_from_solution(&sol, &prep)?;
            Ok((sol, policy))
        })
        .and_then(|(sol, policy)| {
            let summary = verify_policy(&prep.instance, &policy, spec.samples, spec.seed)?;
            let (mc_mean, mc_stderr) =
                monte_carlo_cost(&prep.instance, &policy, spec.samples, spec.seed)?;
            Ok((sol, policy, summary, mc_mean, mc_stderr))
        });
    match solved {
        Ok((sol, policy, summary, mc_mean, mc_stderr)) => PointOutcome {
            record: SweepRecord {
                x_max,
                graph: name.to_string(),
                status: SolveStatus::Optimal.as_str().to_string(),
                objective: Some(sol.objective),
                solve_time_s: report.solve_time_s,
                max_constraint_margin: Some(summary.max_constraint_residual),
                max_contract_membership: Some(summary.max_contract_membership),
                mc_cost_mean: Some(mc_mean),
                mc_cost_stderr: Some(mc_stderr),
            },
            solved: Some(SolvedPoint {
                prep,
                report,
                solution: sol,
                policy,
            }),
        },
        Err(e) => PointOutcome {
            record: fail(format!("error: {e}"), report.solve_time_s),
            solved: None,
        },
    }
}

pub const CSV_HEADER: &str = "x_max,graph,status,objective,solve_time_s,max_constraint_margin,max_contract_membership,mc_cost_mean,mc_cost_stderr";

fn fmt_opt(v: Option<f64>, round: Option<usize>) -> String {
    match v {
        None => String::new(),
        Some(x) => fmt_f64(x, round),
    }
}

/// Full double precision by default; `round` gives significant digits.
pub fn fmt_f64(x: f64, round: Option<usize>) -> String {
    match round {
        None => {
            let mut s = format!("{x:?}");
            if s.ends_with(".0") {
                s.truncate(s.len() - 2);
            }
            s
        }
        Some(digits) => format!("{x:.*e}", digits.saturating_sub(1)),
    }
}

/// Serialize records in CSV schema order.
pub fn write_csv(records: &[SweepRecord], round: Option<usize>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.x_max, round),
            r.graph,
            r.status,
            fmt_opt(r.objective, round),
            fmt_f64(r.solve_time_s, round),
            fmt_opt(r.max_constraint_margin, round),
            fmt_opt(r.max_contract_membership, round),
            fmt_opt(r.mc_cost_mean, round),
            fmt_opt(r.mc_cost_stderr, round),
        ));
    }
    out
}

pub fn save(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}
