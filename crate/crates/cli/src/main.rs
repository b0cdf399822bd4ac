//! `starwalk`: build, analyze, run, scan and verify scattering walks on a
//! star with an attached anomaly graph.

mod phase;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use starwalk::error::TuningSuggestion;
use starwalk::experiments::{
    default_eps_list, scan_scaling, verify_pairing_theorems, write_scaling_csv, write_theorem_csv,
    ScalingReport,
};
use starwalk::graph_file::parse_graph_file;
use starwalk::operator::{build_collective_step_operator, build_step_operator, write_matrix_csv};
use starwalk::spectral::{analyze, auto_phase, label_graph, SpectralReport, ACTIVITY_TOL};
use starwalk::walk::{optimal_step_count, write_trajectory_csv, SearchOutcome, SearchPlan};
use starwalk::{build_graph, AnomalyGraphSpec, Branch, ClassifyOptions, EdgeBasis, Error, StarGraph};

use phase::{parse_complex, snap_phase, PhiArg};

const EXIT_INPUT: u8 = 1;
const EXIT_NO_MATCH: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_NOT_FOUND: u8 = 4;
const EXIT_THRESHOLDS: u8 = 5;

#[derive(Parser)]
#[command(name = "starwalk", version, about = "Quantum-walk search for an anomaly attached to a star graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph and report the size of its state space; with
    /// `--format csv` the step operator is written as sparse entries.
    Build {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        phase: PhaseArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Spectral classification of the decoupled operator.
    Analyze {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        phase: PhaseArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Repeat the search until the anomaly is measured.
    Run {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        phase: PhaseArgs,
        /// Steps per trial; default from the coupling constant.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_trials: usize,
        /// Write the success probability after every step to this CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Optimal step count over several star sizes and its √N fit.
    Scan {
        #[arg(long)]
        graph: PathBuf,
        /// Comma-separated spoke counts.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        phase: PhaseArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Track eigenvalue families over ε and check the pairing statements.
    Verify {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        phase: PhaseArgs,
        /// Comma-separated ε grid, decreasing; default 4^-3 .. 4^-8.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Graph spec (JSON).
    #[arg(long)]
    graph: PathBuf,
    /// Override the number of spokes.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct PhaseArgs {
    /// Leaf phase: radians, a multiple of pi (`2pi`, `pi/2`) or `auto`.
    /// Defaults to the file's leaf_phase.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<PhiArg>,
    /// Target eigenvalue as `re,im`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
    lambda0: Option<Complex64>,
    /// Left eigenvalue branch `+` or `-`.
    #[arg(long, allow_hyphen_values = true)]
    branch: Option<Branch>,
    /// A phase whose left eigenvalue is this close to a right one is moved
    /// onto the exact match; 0 disables.
    #[arg(long, default_value_t = 1e-4)]
    matching_tol: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NoMatch { .. } | Error::AmbiguousMatch { .. } => EXIT_NO_MATCH,
            Error::PhaseDegeneracy { .. } => EXIT_DEGENERATE,
            Error::TrialsExhausted { .. } => EXIT_NOT_FOUND,
            _ => EXIT_INPUT,
        };
        let message = match &e {
            Error::NoMatch { suggestions } if !suggestions.is_empty() => {
                format!("{e}\n{}", describe_suggestions(suggestions))
            }
            Error::AmbiguousMatch { candidates } => {
                let list: Vec<String> = candidates
                    .iter()
                    .map(|z| format!("{:.9},{:.9}", z.re, z.im))
                    .collect();
                format!("several matched eigenvalues; choose one with --lambda0: {}", list.join("  "))
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn describe_suggestions(suggestions: &[TuningSuggestion]) -> String {
    let mut lines = vec!["right eigenvalues and the phases that would match them:".to_string()];
    for s in suggestions {
        let phases: Vec<String> = s
            .candidates
            .iter()
            .map(|c| format!("phi = {:.12} (branch {})", c.phi, c.branch))
            .collect();
        lines.push(format!(
            "  lambda = {:.9}{:+.9}i: {}",
            s.lambda.re,
            s.lambda.im,
            phases.join(", ")
        ));
    }
    lines.join("\n")
}

fn write_output(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> starwalk::Result<()>) -> CliResult {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> CliResult {
    write_output(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn write_csv_rows<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> CliResult {
    write_output(out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row).map_err(Error::from)?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn load(path: &Path, n: Option<usize>) -> CliResult<AnomalyGraphSpec> {
    let spec = parse_graph_file(path)?;
    Ok(match n {
        Some(n) => spec.with_n_spokes(n),
        None => spec,
    })
}

fn build(spec: &AnomalyGraphSpec) -> CliResult<(StarGraph, EdgeBasis)> {
    Ok(build_graph(spec)?)
}

/// Resolve `--phi` for a graph: `auto`, snapping onto a nearby exact match,
/// or the file's value.
fn resolve_phi(graph: &StarGraph, args: &PhaseArgs) -> CliResult<f64> {
    let phi = match args.phi {
        Some(PhiArg::Auto) => auto_phase(graph, args.lambda0, args.branch.unwrap_or(Branch::Plus))?,
        Some(PhiArg::Value(v)) => v,
        None => graph.spec().leaf_phase,
    };
    if let Some(snapped) = snap_phase(graph, phi, args.matching_tol)? {
        eprintln!("note: phi {phi} moved to the matching phase {snapped}");
        return Ok(snapped);
    }
    Ok(phi)
}

fn classify_options(args: &PhaseArgs, phi: f64) -> ClassifyOptions {
    ClassifyOptions {
        lambda0: args
            .lambda0
            .or_else(|| args.branch.map(|b| b.left_eigenvalue(phi))),
        ..ClassifyOptions::default()
    }
}

#[derive(Serialize)]
struct BuildReport {
    n_spokes: usize,
    attachment_spoke: String,
    anomaly_vertices: Vec<String>,
    dead_ends: Vec<String>,
    edge_states: usize,
    collective_states: usize,
    phi: f64,
    epsilon: f64,
    unitarity_defect: f64,
}

fn cmd_build(graph: GraphArgs, phase: PhaseArgs, output: OutputArgs) -> CliResult {
    let spec = load(&graph.graph, graph.n)?;
    let (g, b) = build(&spec)?;
    let phi = resolve_phi(&g, &phase)?;
    let eps = 1.0 / spec.n_spokes as f64;
    let u = build_step_operator(&g, &b, eps, phi)?;
    if output.format == Format::Csv {
        return write_output(&output.out, |w| write_matrix_csv(&u, w));
    }
    let report = BuildReport {
        n_spokes: spec.n_spokes,
        attachment_spoke: spec.attachment_spoke.clone(),
        anomaly_vertices: g.anomaly_vertices().map(str::to_string).collect(),
        dead_ends: g.dead_ends().to_vec(),
        edge_states: b.dim(),
        collective_states: build_collective_step_operator(&g, eps.min(0.5), phi)?.dim(),
        phi,
        epsilon: eps,
        unitarity_defect: u.unitarity_check(),
    };
    write_json(&output.out, &report)
}

#[derive(Serialize)]
struct AnalyzeReport {
    n_spokes: usize,
    phi: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommended_steps: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ambiguous: Vec<Complex64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    suggestions: Vec<TuningSuggestion>,
    spectrum: SpectralReport,
}

#[derive(Serialize)]
struct EigenRow {
    re: f64,
    im: f64,
    side: String,
    activity: String,
    contact: f64,
}

fn cmd_analyze(graph: GraphArgs, phase: PhaseArgs, output: OutputArgs) -> CliResult {
    let spec = load(&graph.graph, graph.n)?;
    let (g, _) = build(&spec)?;
    let phi = resolve_phi(&g, &phase)?;
    let result = analyze(&g, phi, &classify_options(&phase, phi));
    let mut report = AnalyzeReport {
        n_spokes: spec.n_spokes,
        phi,
        status: "matched",
        recommended_steps: None,
        ambiguous: Vec::new(),
        suggestions: Vec::new(),
        spectrum: SpectralReport::from_spectrum(&label_graph(&g, phi, ACTIVITY_TOL)?),
    };
    let failure = match result {
        Ok(cl) => {
            report.recommended_steps = Some(optimal_step_count(cl.c, spec.n_spokes)?);
            report.spectrum = cl.report();
            eprintln!(
                "lambda0 = {:.9}{:+.9}i, branch {}, c = {:.9}, p_target = {:.9}, steps = {}",
                cl.lambda0.re,
                cl.lambda0.im,
                cl.branch,
                cl.c,
                cl.attachment_probability(),
                report.recommended_steps.unwrap()
            );
            None
        }
        Err(e) => {
            report.status = match &e {
                Error::NoMatch { suggestions } => {
                    report.suggestions = suggestions.clone();
                    "no-match"
                }
                Error::AmbiguousMatch { candidates } => {
                    report.ambiguous = candidates.clone();
                    "ambiguous"
                }
                Error::PhaseDegeneracy { .. } => "degenerate",
                _ => return Err(e.into()),
            };
            Some(Failure::from(e))
        }
    };
    match output.format {
        Format::Json => write_json(&output.out, &report)?,
        Format::Csv => {
            let rows: Vec<EigenRow> = report
                .spectrum
                .eigenpairs
                .iter()
                .map(|p| EigenRow {
                    re: p.eigenvalue.re,
                    im: p.eigenvalue.im,
                    side: format!("{:?}", p.side).to_lowercase(),
                    activity: format!("{:?}", p.activity).to_lowercase(),
                    contact: p.contact,
                })
                .collect();
            write_csv_rows(&output.out, &rows)?;
        }
    }
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct RunReport {
    n_spokes: usize,
    phi: f64,
    branch: Branch,
    c: Option<f64>,
    steps: usize,
    success_probability: f64,
    seed: u64,
    max_trials: usize,
    found: bool,
    outcome: Option<SearchOutcome>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    graph: GraphArgs,
    phase: PhaseArgs,
    steps: Option<usize>,
    seed: u64,
    max_trials: usize,
    trajectory: Option<PathBuf>,
    output: OutputArgs,
) -> CliResult {
    let spec = load(&graph.graph, graph.n)?;
    let n = spec.n_spokes;
    let (g, b) = build(&spec)?;
    let phi = resolve_phi(&g, &phase)?;
    let (branch, c) = match analyze(&g, phi, &classify_options(&phase, phi)) {
        Ok(cl) => (cl.branch, Some(cl.c)),
        Err(e @ (Error::NoMatch { .. } | Error::PhaseDegeneracy { .. })) => {
            eprintln!("warning: {e}; using the unit-coupling step count");
            (phase.branch.unwrap_or(Branch::Plus), None)
        }
        Err(e) => return Err(e.into()),
    };
    let steps = match steps {
        Some(s) => s,
        None => optimal_step_count(c.unwrap_or(1.0), n)?,
    };
    let plan = SearchPlan::with_steps(&g, &b, phi, branch, steps)?;
    if let Some(path) = &trajectory {
        let points = plan.trajectory()?;
        write_output(&Some(path.clone()), |w| write_trajectory_csv(&points, w))?;
    }
    let result = plan.run(seed, max_trials);
    let report = RunReport {
        n_spokes: n,
        phi,
        branch,
        c,
        steps,
        success_probability: plan.success_probability(),
        seed,
        max_trials,
        found: result.is_ok(),
        outcome: result.as_ref().ok().cloned(),
    };
    match output.format {
        Format::Json => write_json(&output.out, &report)?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                n_spokes: usize,
                phi: f64,
                branch: Branch,
                steps: usize,
                success_probability: f64,
                seed: u64,
                found: bool,
                trials: Option<usize>,
                measured_tail: Option<String>,
                measured_head: Option<String>,
            }
            let o = report.outcome.as_ref();
            write_csv_rows(
                &output.out,
                &[Row {
                    n_spokes: n,
                    phi,
                    branch,
                    steps,
                    success_probability: report.success_probability,
                    seed,
                    found: report.found,
                    trials: o.map(|o| o.trials),
                    measured_tail: o.map(|o| o.measured_edge.tail.clone()),
                    measured_head: o.map(|o| o.measured_edge.head.clone()),
                }],
            )?;
        }
    }
    match result {
        Ok(o) => {
            eprintln!(
                "found on edge ({}, {}) after {} trial(s) of {} steps",
                o.measured_edge.tail, o.measured_edge.head, o.trials, steps
            );
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// With a coupling constant the fit must be good; without one nothing may
/// concentrate on the attachment edge.
fn scan_passes(report: &ScalingReport) -> bool {
    match report.c {
        Some(_) => report.r_squared > 0.99,
        None => report.rows.iter().all(|r| r.p_star < 5.0 / r.n as f64),
    }
}

fn cmd_scan(graph: PathBuf, n: Vec<usize>, phase: PhaseArgs, output: OutputArgs) -> CliResult {
    let spec = load(&graph, None)?;
    let (g, _) = build(&spec.with_n_spokes(n[0].max(2)))?;
    let phi = resolve_phi(&g, &phase)?;
    let branch = match phase.branch {
        Some(b) => b,
        None => analyze(&g, phi, &classify_options(&phase, phi))
            .map(|cl| cl.branch)
            .unwrap_or(Branch::Plus),
    };
    let report = scan_scaling(&spec, phi, branch, &n)?;
    match output.format {
        Format::Json => write_json(&output.out, &report)?,
        Format::Csv => write_output(&output.out, |w| write_scaling_csv(&report, w))?,
    }
    eprintln!("a = {:.6}, R^2 = {:.6}", report.a, report.r_squared);
    if scan_passes(&report) {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_THRESHOLDS,
            message: "scan thresholds not met".into(),
        })
    }
}

fn cmd_verify(graph: GraphArgs, phase: PhaseArgs, eps: Vec<f64>, output: OutputArgs) -> CliResult {
    let spec = load(&graph.graph, graph.n)?;
    let (g, _) = build(&spec)?;
    let phi = resolve_phi(&g, &phase)?;
    let eps = if eps.is_empty() { default_eps_list() } else { eps };
    let report = verify_pairing_theorems(&g, phi, &eps)?;
    match output.format {
        Format::Json => write_json(&output.out, &report)?,
        Format::Csv => write_output(&output.out, |w| write_theorem_csv(&report, w))?,
    }
    eprintln!(
        "pairing_found = {}, {} families, {} violations",
        report.pairing_found,
        report.families.len(),
        report.violations.len()
    );
    if report.passes() {
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Err(Failure {
            code: EXIT_THRESHOLDS,
            message: "verification thresholds not met".into(),
        })
    }
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("QWALK_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure {
            code: EXIT_INPUT,
            message: format!("QWALK_THREADS must be a positive integer, got {value:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Build { graph, phase, output } => cmd_build(graph, phase, output),
        Command::Analyze { graph, phase, output } => cmd_analyze(graph, phase, output),
        Command::Run {
            graph,
            phase,
            steps,
            seed,
            max_trials,
            trajectory,
            output,
        } => cmd_run(graph, phase, steps, seed, max_trials, trajectory, output),
        Command::Scan { graph, n, phase, output } => cmd_scan(graph, n, phase, output),
        Command::Verify { graph, phase, eps, output } => cmd_verify(graph, phase, eps, output),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::NoMatch { suggestions: vec![] }).code, EXIT_NO_MATCH);
        assert_eq!(Failure::from(Error::AmbiguousMatch { candidates: vec![] }).code, EXIT_NO_MATCH);
        let degenerate = Error::PhaseDegeneracy {
            lambda: Complex64::new(0.0, 1.0),
            value: 0.0,
        };
        assert_eq!(Failure::from(degenerate).code, EXIT_DEGENERATE);
        assert_eq!(Failure::from(Error::TrialsExhausted { trials: 3 }).code, EXIT_NOT_FOUND);
        assert_eq!(Failure::from(Error::InvalidArgument("x".into())).code, EXIT_INPUT);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unit_coupling_fallback() {
        let n = 64;
        assert_eq!(
            optimal_step_count(1.0, n).unwrap(),
            (PI * (n as f64).sqrt() / 2.0).round() as usize
        );
    }
}
