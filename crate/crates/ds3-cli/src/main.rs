//! Command-line front end: solve, threshold, sweep, outlier, assignment, and
//! synthetic-scene commands over CSV/binary dissimilarity files, reporting as
//! versioned JSON.
//!
//! Exit codes: 0 success, 2 bad input or arguments, 3 numeric failure inside
//! the solver, 4 solve hit the iteration cap without converging (the report
//! is still written).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ds3::{
    euclidean_dissimilarity, extract_representatives, gen_gaussian_mixture, hard_assign,
    lambda_max, lambda_min, load_matrix, save_matrix, solve, solve_with_outliers,
    DissimilarityMatrix, Error, MatrixFormat, NormP, OutlierConfig, Solution, SolverSettings,
    SyntheticScene,
};
use serde::Serialize;

const SCHEMA: &str = "ds3/1";

#[derive(Parser)]
#[command(
    name = "ds3",
    version,
    about = "Select representative sources for a target set from pairwise dissimilarities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the selection program and report representatives and assignments
    Solve(SolveCmd),
    /// Print the regularization thresholds of a matrix
    Lambda(LambdaCmd),
    /// Solve across a list of threshold fractions, warm-starting each from the last
    Sweep(SweepCmd),
    /// Solve with a per-target outlier option priced by weights
    Outliers(OutliersCmd),
    /// Assign each target to its nearest source among a given representative set
    Assign(AssignCmd),
    /// Generate a seeded Gaussian-mixture scene and write matrix, points, and labels
    Synth(SynthCmd),
}

#[derive(Args)]
struct MatrixArgs {
    /// Dissimilarity matrix file (rows = sources, columns = targets)
    #[arg(long)]
    dissim: PathBuf,
    /// On-disk format of the matrix file
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Keep the raw dissimilarity scale instead of dividing by the largest entry
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct WeightArgs {
    /// Regularization weight, on the same scale as the (possibly normalized) matrix
    #[arg(long)]
    lambda: Option<f64>,
    /// Regularization as a fraction of the single-representative threshold
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Row-norm exponent: 2 encourages shared encodings, inf counts row maxima
    #[arg(long, value_enum, default_value_t = PArg::Inf)]
    p: PArg,
    /// Augmented-Lagrangian penalty weight
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Convergence threshold on both residuals
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Solver worker threads (0 = one per available core)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Keep rows whose norm exceeds this fraction of the largest row norm
    #[arg(long, default_value_t = 0.01)]
    rep_threshold: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the full coefficient matrix in the report
    #[arg(long)]
    emit_z: bool,
}

#[derive(Args)]
struct SolveCmd {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct LambdaCmd {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Comma-separated fractions of the single-representative threshold
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutliersCmd {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Constant outlier price for every target
    #[arg(long, conflicts_with_all = ["beta", "tau"])]
    w: Option<f64>,
    /// Scale of dissimilarity-adaptive outlier prices
    #[arg(long, requires = "tau")]
    beta: Option<f64>,
    /// Decay of dissimilarity-adaptive outlier prices
    #[arg(long, requires = "beta")]
    tau: Option<f64>,
}

#[derive(Args)]
struct AssignCmd {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Comma-separated source indices acting as representatives
    #[arg(long, value_delimiter = ',', required = true)]
    reps: Vec<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    /// Component means as "x1,y1;x2,y2;..."
    #[arg(long)]
    means: String,
    /// Distinct target means (same syntax); targets then use a shifted seed.
    /// Without this, targets are the source points themselves.
    #[arg(long)]
    target_means: Option<String>,
    /// Standard deviation shared by all components
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    /// Points per component
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Generator seed
    #[arg(long)]
    seed: u64,
    /// Output prefix; writes <prefix>-dissim.csv, <prefix>-points.csv, <prefix>-labels.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Bin => MatrixFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PArg {
    #[value(name = "2")]
    Two,
    #[value(name = "inf")]
    Inf,
}

impl From<PArg> for NormP {
    fn from(p: PArg) -> Self {
        match p {
            PArg::Two => NormP::P2,
            PArg::Inf => NormP::PInf,
        }
    }
}

impl PArg {
    fn label(self) -> &'static str {
        match self {
            PArg::Two => "2",
            PArg::Inf => "inf",
        }
    }
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericFailure { .. } => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 2, message: e.to_string() }
    }
}

#[derive(Serialize)]
struct SettingsEcho {
    p: &'static str,
    mu: f64,
    eps: f64,
    max_iter: usize,
    normalized: bool,
    rep_threshold: f64,
}

#[derive(Serialize)]
struct SolveReport {
    schema: &'static str,
    command: &'static str,
    representatives: Vec<usize>,
    row_norms: Vec<f64>,
    assignment_hard: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outliers: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outlier_flags: Option<Vec<bool>>,
    objective: f64,
    lambda_used: f64,
    lambda_max: Option<f64>,
    iterations: usize,
    converged: bool,
    residual_final: (f64, f64),
    settings: SettingsEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct ThresholdSide {
    lambda_max: f64,
    l_star: usize,
    degenerate: bool,
}

#[derive(Serialize)]
struct ThresholdReport {
    schema: &'static str,
    command: &'static str,
    p2: ThresholdSide,
    pinf: ThresholdSide,
    lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_min_note: Option<String>,
    normalized: bool,
}

#[derive(Serialize)]
struct SweepEntry {
    alpha: f64,
    lambda_used: f64,
    n_representatives: usize,
    representatives: Vec<usize>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct SweepReport {
    schema: &'static str,
    command: &'static str,
    lambda_max: f64,
    entries: Vec<SweepEntry>,
    settings: SettingsEcho,
}

#[derive(Serialize)]
struct AssignReport {
    schema: &'static str,
    command: &'static str,
    representatives: Vec<usize>,
    assignment_hard: Vec<usize>,
    assigned_cost: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(cmd) => cmd_solve(cmd),
        Command::Lambda(cmd) => cmd_lambda(cmd),
        Command::Sweep(cmd) => cmd_sweep(cmd),
        Command::Outliers(cmd) => cmd_outliers(cmd),
        Command::Assign(cmd) => cmd_assign(cmd),
        Command::Synth(cmd) => cmd_synth(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_input(args: &MatrixArgs) -> Result<DissimilarityMatrix, Failure> {
    let d = load_matrix(&args.dissim, args.format.into())?;
    Ok(if args.no_normalize { d } else { d.normalize() })
}

fn solver_settings(args: &SolverArgs) -> SolverSettings {
    SolverSettings {
        mu: args.mu,
        eps: args.eps,
        max_iter: args.max_iter,
        p: args.p.into(),
        workers: args.threads,
        ..SolverSettings::default()
    }
}

fn settings_echo(args: &SolverArgs, normalized: bool) -> SettingsEcho {
    SettingsEcho {
        p: args.p.label(),
        mu: args.mu,
        eps: args.eps,
        max_iter: args.max_iter,
        normalized,
        rep_threshold: args.rep_threshold,
    }
}

/// The weight actually used, plus the single-representative threshold when
/// the matrix is fully observed (it is undefined otherwise).
fn resolve_lambda(
    d: &DissimilarityMatrix,
    weight: &WeightArgs,
    p: NormP,
) -> Result<(f64, Option<f64>), Failure> {
    let threshold = if d.mask().is_some() { None } else { Some(lambda_max(d, p)?.lambda_max) };
    match (weight.lambda, weight.alpha) {
        (Some(lambda), None) => Ok((lambda, threshold)),
        (None, Some(alpha)) => {
            let Some(t) = threshold else {
                return Err(Failure::input(
                    "--alpha needs the single-representative threshold, which requires a fully observed matrix; pass --lambda instead",
                ));
            };
            Ok((alpha * t, threshold))
        }
        _ => Err(Failure::input("exactly one of --lambda or --alpha must be given")),
    }
}

fn emit(report: &impl Serialize, out: Option<&PathBuf>) -> Result<(), Failure> {
    let body = serde_json::to_string_pretty(report)
        .map_err(|e| Failure::input(format!("could not serialize report: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, body + "\n")?,
        None => {
            use std::io::Write as _;
            let mut stdout = std::io::stdout().lock();
            // Tolerate a closed pipe (e.g. piping into `head`) instead of panicking.
            if let Err(e) = writeln!(stdout, "{body}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn nested_rows(z: &ds3::DenseMatrix) -> Vec<Vec<f64>> {
    (0..z.rows()).map(|i| z.row(i).to_vec()).collect()
}

fn finish_solve_report(
    command: &'static str,
    d: &DissimilarityMatrix,
    sol: &Solution,
    lambda_used: f64,
    threshold: Option<f64>,
    cmd_solver: &SolverArgs,
    cmd_matrix: &MatrixArgs,
    output: &OutputArgs,
) -> Result<u8, Failure> {
    let reps = extract_representatives(&sol.z, cmd_solver.rep_threshold)?;
    let assignment_hard = hard_assign(d, &reps.indices)?;
    let (outliers, outlier_flags) = match &sol.outliers {
        Some(e) => (Some(e.clone()), Some(e.iter().map(|&v| v > 0.5).collect())),
        None => (None, None),
    };
    let report = SolveReport {
        schema: SCHEMA,
        command,
        representatives: reps.indices,
        row_norms: reps.row_norms,
        assignment_hard,
        outliers,
        outlier_flags,
        objective: sol.objective,
        lambda_used,
        lambda_max: threshold,
        iterations: sol.iterations,
        converged: sol.converged,
        residual_final: *sol.residual_history.last().expect("at least one iteration runs"),
        settings: settings_echo(cmd_solver, !cmd_matrix.no_normalize),
        z: output.emit_z.then(|| nested_rows(&sol.z)),
    };
    emit(&report, output.out.as_ref())?;
    Ok(if report.converged { 0 } else { 4 })
}

fn cmd_solve(cmd: SolveCmd) -> Result<u8, Failure> {
    let d = load_input(&cmd.matrix)?;
    let p = cmd.solver.p.into();
    let (lambda, threshold) = resolve_lambda(&d, &cmd.weight, p)?;
    let sol = solve(&d, lambda, &solver_settings(&cmd.solver))?;
    finish_solve_report("solve", &d, &sol, lambda, threshold, &cmd.solver, &cmd.matrix, &cmd.output)
}

fn cmd_outliers(cmd: OutliersCmd) -> Result<u8, Failure> {
    let d = load_input(&cmd.matrix)?;
    let p = cmd.solver.p.into();
    let (lambda, threshold) = resolve_lambda(&d, &cmd.weight, p)?;
    let config = match (cmd.w, cmd.beta, cmd.tau) {
        (Some(w), None, None) => OutlierConfig::Constant(w),
        (None, Some(beta), Some(tau)) => OutlierConfig::Adaptive { beta, tau },
        _ => return Err(Failure::input("pass either --w or both --beta and --tau")),
    };
    let sol = solve_with_outliers(&d, lambda, &config, &solver_settings(&cmd.solver))?;
    // Report representatives and assignments over the real sources; the
    // outlier prices appear as the e vector and its 0.5-threshold flags.
    let mut plain = sol.augmented.clone();
    plain.z = sol.z.clone();
    finish_solve_report(
        "outliers",
        &d,
        &plain,
        lambda,
        threshold,
        &cmd.solver,
        &cmd.matrix,
        &cmd.output,
    )
}

fn cmd_lambda(cmd: LambdaCmd) -> Result<u8, Failure> {
    let d = load_input(&cmd.matrix)?;
    if d.mask().is_some() {
        return Err(Failure::input(
            "thresholds are defined for fully observed matrices only",
        ));
    }
    let p2 = lambda_max(&d, NormP::P2)?;
    let pinf = lambda_max(&d, NormP::PInf)?;
    let (lambda_min_value, lambda_min_note) = match lambda_min(&d) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = ThresholdReport {
        schema: SCHEMA,
        command: "lambda",
        p2: ThresholdSide { lambda_max: p2.lambda_max, l_star: p2.l_star, degenerate: p2.degenerate },
        pinf: ThresholdSide {
            lambda_max: pinf.lambda_max,
            l_star: pinf.l_star,
            degenerate: pinf.degenerate,
        },
        lambda_min: lambda_min_value,
        lambda_min_note,
        normalized: !cmd.matrix.no_normalize,
    };
    emit(&report, cmd.out.as_ref())?;
    Ok(0)
}

fn cmd_sweep(cmd: SweepCmd) -> Result<u8, Failure> {
    let d = load_input(&cmd.matrix)?;
    let p = cmd.solver.p.into();
    if d.mask().is_some() {
        return Err(Failure::input(
            "sweeps derive their weights from the single-representative threshold, which requires a fully observed matrix",
        ));
    }
    let threshold = lambda_max(&d, p)?.lambda_max;
    let settings = solver_settings(&cmd.solver);
    let solutions = ds3::sweep(&d, p, &cmd.alphas, &settings)?;
    let mut entries = Vec::with_capacity(solutions.len());
    for (alpha, sol) in cmd.alphas.iter().zip(&solutions) {
        let reps = extract_representatives(&sol.z, cmd.solver.rep_threshold)?;
        entries.push(SweepEntry {
            alpha: *alpha,
            lambda_used: alpha * threshold,
            n_representatives: reps.indices.len(),
            representatives: reps.indices,
            objective: sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
        });
    }
    let all_converged = entries.iter().all(|e| e.converged);
    let report = SweepReport {
        schema: SCHEMA,
        command: "sweep",
        lambda_max: threshold,
        entries,
        settings: settings_echo(&cmd.solver, !cmd.matrix.no_normalize),
    };
    emit(&report, cmd.out.as_ref())?;
    Ok(if all_converged { 0 } else { 4 })
}

fn cmd_assign(cmd: AssignCmd) -> Result<u8, Failure> {
    let d = load_input(&cmd.matrix)?;
    let mut reps = cmd.reps.clone();
    reps.sort_unstable();
    reps.dedup();
    let assignment_hard = hard_assign(&d, &reps)?;
    let assigned_cost = assignment_hard
        .iter()
        .enumerate()
        .map(|(j, &i)| d.value(i, j))
        .collect();
    let report = AssignReport {
        schema: SCHEMA,
        command: "assign",
        representatives: reps,
        assignment_hard,
        assigned_cost,
    };
    emit(&report, cmd.out.as_ref())?;
    Ok(0)
}

fn parse_means(text: &str) -> Result<Vec<(f64, f64)>, Failure> {
    text.split(';')
        .map(|pair| {
            let mut parts = pair.split(',');
            let bad = || Failure::input(format!("bad mean '{pair}': expected x,y"));
            let x = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let y = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            if parts.next().is_some() {
                return Err(bad());
            }
            Ok((x, y))
        })
        .collect()
}

fn cmd_synth(cmd: SynthCmd) -> Result<u8, Failure> {
    let source_means = parse_means(&cmd.means)?;
    let sources = gen_gaussian_mixture(&source_means, cmd.count, cmd.std, cmd.seed)?;
    let scene = match &cmd.target_means {
        None => sources,
        Some(text) => {
            let target_means = parse_means(text)?;
            let targets =
                gen_gaussian_mixture(&target_means, cmd.count, cmd.std, cmd.seed.wrapping_add(1))?;
            SyntheticScene {
                source_points: sources.source_points,
                target_points: targets.target_points,
                labels_x: sources.labels_x,
                labels_y: targets.labels_y,
                seed: cmd.seed,
            }
        }
    };
    let d = euclidean_dissimilarity(&scene.source_points, &scene.target_points)?;

    let prefix = cmd.out.as_os_str().to_string_lossy().into_owned();
    save_matrix(&PathBuf::from(format!("{prefix}-dissim.csv")), &d, MatrixFormat::Csv)?;

    let mut points = String::from("set,x,y\n");
    let mut labels = String::from("set,label\n");
    for (&(x, y), &l) in scene.source_points.iter().zip(&scene.labels_x) {
        let _ = writeln!(points, "source,{x},{y}");
        let _ = writeln!(labels, "source,{l}");
    }
    for (&(x, y), &l) in scene.target_points.iter().zip(&scene.labels_y) {
        let _ = writeln!(points, "target,{x},{y}");
        let _ = writeln!(labels, "target,{l}");
    }
    std::fs::write(format!("{prefix}-points.csv"), points)?;
    std::fs::write(format!("{prefix}-labels.csv"), labels)?;
    Ok(0)
}
