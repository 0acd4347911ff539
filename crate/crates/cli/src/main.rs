//! `agc` — synthesis and verification of robust decentralized affine
//! controllers via assume-guarantee contracts.
//!
//! Subcommands: `analyze` (information decomposition), `synthesize`
//! (solve one instance), `simulate` (Monte-Carlo verification of a
//! solution file), `sweep` (state-bound sweep of a problem file), and
//! `casestudy` (the built-in three-subsystem benchmark with two
//! information graphs).
//!
//! Exit codes: 0 success, 1 infeasible, 2 usage error, 3 solver failure.

mod plot;
mod solution;
mod svg;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agc_core::infograph::{
    coupling_projector, decompose, is_partially_nested, physical_graphs, DEFAULT_GRAPH_TOL,
};
use agc_core::policy::{
    expected_cost, monte_carlo_cost, recover_policy, surrogate_monte_carlo_cost,
    verification_samples, worst_case_margins,
};
use agc_core::problem::{prepare, ProblemSpec};
use agc_core::sdp::{assemble_program, solve, SdpSolution, SolveStatus, SolverOptions};
use agc_core::{casestudy, Error};

use solution::{SolutionFile, VerificationReport};
use sweep::{PointOutcome, SweepSpec};

#[derive(Parser)]
#[command(
    name = "agc",
    version,
    about = "Robust decentralized controller synthesis via assume-guarantee contracts"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver tolerance (overrides AGC_SOLVER_TOL, default 1e-8).
    #[arg(long)]
    solver_tol: Option<f64>,
    /// Print solver iteration output.
    #[arg(long)]
    verbose: bool,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Ok(env) = std::env::var("AGC_SOLVER_TOL") {
            if let Ok(tol) = env.parse::<f64>() {
                opts.tol = tol;
            }
        }
        if let Some(tol) = self.solver_tol {
            opts.tol = tol;
        }
        opts.verbose = self.verbose;
        opts
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the information decomposition, nestedness verdict, and
    /// coupling graph of a problem.
    Analyze {
        #[arg(long)]
        problem: PathBuf,
        /// Also dump the gain sparsity masks as block-grid art.
        #[arg(long)]
        patterns: bool,
        /// Write the coupling graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Assemble and solve one instance; write a solution file.
    Synthesize {
        #[arg(long)]
        problem: PathBuf,
        /// Override the state bound (requires the box-constraint
        /// shorthand in the problem file).
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Monte-Carlo verification of a solution file.
    Simulate {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Verification report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional per-sample CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep the state bound of a problem file.
    Sweep {
        #[arg(long)]
        problem: PathBuf,
        /// Label used in the records (defaults to the problem stem).
        #[arg(long)]
        graph: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        #[arg(long, default_value_t = 2.5)]
        stop: f64,
        #[arg(long, default_value_t = 31)]
        count: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Round CSV numbers to this many significant digits.
        #[arg(long)]
        round: Option<usize>,
        /// Worker pool width (defaults to the rayon global pool).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the built-in benchmark: sweep both information graphs, write
    /// the CSV, the cost curves, per-point solutions, and the projected
    /// set figure.
    Casestudy {
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Restrict to one named graph (GI1 or GI2).
        #[arg(long)]
        graph: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        #[arg(long, default_value_t = 2.5)]
        stop: f64,
        #[arg(long, default_value_t = 31)]
        count: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        round: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Input(_) | Error::DimensionMismatch { .. } => ExitCode::from(2),
                Error::SolverFailure(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn read_problem(path: &Path) -> Result<ProblemSpec, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    ProblemSpec::from_json(&text)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Analyze {
            problem,
            patterns,
            dot,
        } => cmd_analyze(&problem, patterns, dot.as_deref()),
        Cmd::Synthesize {
            problem,
            xmax,
            out,
            solver,
        } => cmd_synthesize(&problem, xmax, &out, &solver.options()),
        Cmd::Simulate {
            solution,
            samples,
            seed,
            out,
            csv,
        } => cmd_simulate(&solution, samples, seed, out.as_deref(), csv.as_deref()),
        Cmd::Sweep {
            problem,
            graph,
            start,
            stop,
            count,
            samples,
            seed,
            out_dir,
            round,
            jobs,
            solver,
        } => {
            configure_pool(jobs);
            let spec_file = read_problem(&problem)?;
            let label = graph.unwrap_or_else(|| {
                problem
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "problem".into())
            });
            let instance = spec_file.to_instance(None)?;
            let sweep_spec = SweepSpec {
                start,
                stop,
                count,
                graphs: vec![(label, instance.info_graph.clone())],
                samples,
                seed,
                solver: solver.options(),
            };
            let outcomes = sweep::run_sweep(&sweep_spec, &move |_, x| {
                spec_file.to_instance(Some(x))
            })?;
            write_sweep_outputs(&out_dir, &outcomes, round, sweep_spec.solver.tol)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Casestudy {
            out_dir,
            graph,
            start,
            stop,
            count,
            samples,
            seed,
            round,
            jobs,
            solver,
        } => cmd_casestudy(
            &out_dir,
            graph.as_deref(),
            (start, stop, count),
            samples,
            seed,
            round,
            jobs,
            &solver.options(),
        ),
    }
}

fn configure_pool(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_analyze(problem: &Path, patterns: bool, dot: Option<&Path>) -> Result<ExitCode, Error> {
    let spec = read_problem(problem)?;
    let instance = spec.to_instance(None)?;
    let model = &instance.model;
    let (g_a, g_b) = physical_graphs(model, DEFAULT_GRAPH_TOL);
    let d = decompose(&instance.info_graph, &g_a, &g_b)?;
    let n = model.num_subsystems();

    let set_str = |s: &std::collections::BTreeSet<usize>| {
        let items: Vec<String> = s.iter().map(|&j| (j + 1).to_string()).collect();
        format!("{{{}}}", items.join(", "))
    };
    println!("Information decomposition over {n} subsystems (1-based labels)");
    println!("{:>4} | {:<14} | {:<14} | {:<14}", "i", "observed", "N(i)", "C(i)");
    for i in 0..n {
        println!(
            "{:>4} | {:<14} | {:<14} | {:<14}",
            i + 1,
            set_str(&instance.info_graph.in_neighbors(i)),
            set_str(d.nested(i)),
            set_str(d.coupling(i)),
        );
    }
    println!("coupling set C = {}", set_str(d.coupling_union()));
    println!(
        "information structure: {}",
        if is_partially_nested(&d) {
            "partially nested"
        } else {
            "nonclassical (not partially nested)"
        }
    );
    let edges: Vec<String> = d
        .coupling_graph()
        .edges()
        .map(|(j, i)| format!("{}->{}", j + 1, i + 1))
        .collect();
    println!(
        "coupling graph G_C: {}",
        if edges.is_empty() {
            "(no edges)".to_string()
        } else {
            edges.join(", ")
        }
    );

    if patterns {
        let qn = agc_core::surrogate::pattern_qn(&d, model);
        let qc = agc_core::surrogate::pattern_qc(&d, model);
        let ym = agc_core::surrogate::pattern_y(d.coupling_graph(), model);
        let (pi_c, _) = coupling_projector(&d, model);
        println!("\nQ^w mask ({} free entries):\n{}", qn.num_free(), qn.block_art());
        println!("Q^v mask ({} free entries):\n{}", qc.num_free(), qc.block_art());
        println!("Y mask ({} free entries):\n{}", ym.num_free(), ym.block_art());
        println!("coupling trajectory dimension: {}", pi_c.nrows());
    }
    if let Some(path) = dot {
        let mut out = String::from("digraph coupling {\n");
        for i in 0..n {
            out.push_str(&format!("  {};\n", i + 1));
        }
        for (j, i) in d.coupling_graph().edges() {
            out.push_str(&format!("  {} -> {};\n", j + 1, i + 1));
        }
        out.push_str("}\n");
        sweep::save(path, &out).map_err(|e| Error::Input(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(
    problem: &Path,
    xmax: Option<f64>,
    out: &Path,
    opts: &SolverOptions,
) -> Result<ExitCode, Error> {
    let spec = read_problem(problem)?;
    let instance = spec.to_instance(xmax)?;
    let prep = prepare(instance)?;
    let program = assemble_program(&prep)?;
    let report = solve(&program, opts)?;
    eprintln!(
        "status: {} ({} iterations, {:.2}s)",
        report.status, report.iterations, report.solve_time_s
    );
    let policy = if report.status.is_optimal() {
        let p = recover_policy(&report, &prep)?;
        eprintln!("objective: {:.9}", report.objective.unwrap());
        Some(p)
    } else {
        None
    };
    let file = SolutionFile::new(&report, &prep, policy.as_ref(), opts.tol, None);
    sweep::save(out, &file.to_json()).map_err(|e| Error::Input(e.to_string()))?;
    eprintln!("wrote {}", out.display());
    Ok(match report.status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(1),
        SolveStatus::Unbounded => ExitCode::from(1),
        SolveStatus::NumericalFailure(_) => ExitCode::from(3),
    })
}

fn cmd_simulate(
    solution_path: &Path,
    samples: usize,
    seed: u64,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(solution_path)
        .map_err(|e| Error::Input(format!("{}: {e}", solution_path.display())))?;
    let file = SolutionFile::from_json(&text).map_err(Error::Input)?;
    if !matches!(file.status, SolveStatus::Optimal) {
        return Err(Error::NotSolved(file.status.to_string()));
    }
    let instance = file.problem.to_instance(None)?;
    let prep = prepare(instance)?;
    let policy = file.rebuild_policy(&prep).map_err(Error::Input)?;
    let sol = file.rebuild_solution(&prep).map_err(Error::Input)?;

    let rows = verification_samples(&prep.instance, &policy, samples, seed)?;
    let mut max_res = f64::NEG_INFINITY;
    let mut max_mem = 0.0f64;
    for r in &rows {
        max_res = max_res.max(r.constraint_residual);
        max_mem = max_mem.max(r.contract_membership);
    }
    let margins = worst_case_margins(&sol, &prep.instance.constraints, &prep.sqrt_sigma);
    let m = prep.second_moment();
    let analytic = expected_cost(&sol, m, m, &prep.instance.cost);
    let (smc_mean, smc_err) =
        surrogate_monte_carlo_cost(&sol, &prep.instance.cost, prep.sigma(), samples, seed)?;
    let (tmc_mean, tmc_err) = monte_carlo_cost(&prep.instance, &policy, samples, seed)?;

    let report = VerificationReport {
        samples,
        seed,
        max_constraint_residual: max_res,
        max_contract_membership: max_mem,
        worst_case_margin: margins.max(),
        expected_cost: analytic,
        surrogate_mc_mean: smc_mean,
        surrogate_mc_stderr: smc_err,
        true_loop_mc_mean: tmc_mean,
        true_loop_mc_stderr: tmc_err,
        surrogate_gap: analytic - tmc_mean,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => {
            sweep::save(path, &json).map_err(|e| Error::Input(e.to_string()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = csv {
        let mut body = String::from("sample,constraint_residual,contract_membership\n");
        for (i, r) in rows.iter().enumerate() {
            body.push_str(&format!(
                "{},{},{}\n",
                i,
                sweep::fmt_f64(r.constraint_residual, None),
                sweep::fmt_f64(r.contract_membership, None)
            ));
        }
        sweep::save(path, &body).map_err(|e| Error::Input(e.to_string()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_casestudy(
    out_dir: &Path,
    graph: Option<&str>,
    (start, stop, count): (f64, f64, usize),
    samples: usize,
    seed: u64,
    round: Option<usize>,
    jobs: Option<usize>,
    opts: &SolverOptions,
) -> Result<ExitCode, Error> {
    configure_pool(jobs);
    let mut graphs = Vec::new();
    for name in casestudy::GRAPH_NAMES {
        if graph.map_or(true, |g| g == name) {
            graphs.push((
                name.to_string(),
                casestudy::graph_by_name(name).expect("built-in graph"),
            ));
        }
    }
    if graphs.is_empty() {
        return Err(Error::Input(format!(
            "unknown graph '{}'; available: GI1, GI2",
            graph.unwrap_or("")
        )));
    }
    let spec = SweepSpec {
        start,
        stop,
        count,
        graphs,
        samples,
        seed,
        solver: opts.clone(),
    };
    let horizon = casestudy::HORIZON;
    let outcomes = sweep::run_sweep(&spec, &move |g, x| {
        let model = casestudy::system_model(horizon)?;
        Ok(agc_core::problem::ProblemInstance {
            constraints: casestudy::constraints(&model, x),
            cost: casestudy::cost(&model)?,
            uncertainty: casestudy::uncertainty(horizon)?,
            info_graph: g.clone(),
            model,
        })
    })?;
    write_sweep_outputs(out_dir, &outcomes, round, opts.tol)?;

    // Projected-sets figure for the coupled graph mid-sweep (the two
    // consecutive states of subsystem 3 around t = 9).
    let target = outcomes.iter().find(|o| {
        o.record.graph == "GI2" && (o.record.x_max - 1.5).abs() < 1e-9 && o.solved.is_some()
    });
    if let Some(point) = target {
        let solved = point.solved.as_ref().unwrap();
        let coords = (
            solved.prep.model().state_index(9, 2, 0),
            solved.prep.model().state_index(10, 2, 0),
        );
        let sets = plot::projected_sets(
            &solved.prep,
            &solved.solution,
            &solved.policy,
            coords,
            10_000,
            seed,
        )?;
        let svg_text = plot::projected_sets_svg(&sets, coords, Some(point.record.x_max));
        let path = out_dir.join("support_sets.svg");
        sweep::save(&path, &svg_text).map_err(|e| Error::Input(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn write_sweep_outputs(
    out_dir: &Path,
    outcomes: &[PointOutcome],
    round: Option<usize>,
    tol: f64,
) -> Result<(), Error> {
    let mut records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    records.sort_by(|a, b| {
        (a.graph.clone(), a.x_max)
            .partial_cmp(&(b.graph.clone(), b.x_max))
            .unwrap()
    });
    let csv = sweep::write_csv(&records, round);
    let csv_path = out_dir.join("sweep.csv");
    sweep::save(&csv_path, &csv).map_err(|e| Error::Input(e.to_string()))?;
    println!("wrote {}", csv_path.display());

    let curves = plot::cost_curves_svg(&records);
    let svg_path = out_dir.join("cost_curves.svg");
    sweep::save(&svg_path, &curves).map_err(|e| Error::Input(e.to_string()))?;
    println!("wrote {}", svg_path.display());

    for outcome in outcomes {
        if let Some(solved) = &outcome.solved {
            let name = format!(
                "solution_{}_x{:.3}.json",
                outcome.record.graph, outcome.record.x_max
            );
            let file = SolutionFile::new(
                &solved.report,
                &solved.prep,
                Some(&solved.policy),
                tol,
                Some(outcome.record.graph.clone()),
            );
            sweep::save(&out_dir.join(name), &file.to_json())
                .map_err(|e| Error::Input(e.to_string()))?;
        }
    }
    Ok(())
}
