use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sbsolve::bench::{run_benchmark, BenchOptions, BenchProblem, BenchReport, TargetPolicy};
use sbsolve::cost::{
    cycles_per_step, cycles_per_step_ceil, exec_time, overlap_feasible, sweep, KernelMode,
    ParallelParams,
};
use sbsolve::encoders::{
    decode_knapsack, default_penalty, encode_knapsack, encode_maxcut, Encoding,
};
use sbsolve::engine::{
    solve_encoding, Backend, C0Policy, EffectiveParams, FixedBackendConfig, RunResult,
    SolverConfig, StateFormats,
};
use sbsolve::fixed::FixedFormat;
use sbsolve::io::{
    model_from_json, model_to_json, parse_gset, parse_knapsack, qubo_from_json, write_gset,
    ParserMode,
};
use sbsolve::ising::IsingModel;
use sbsolve::oracles::AnnealSchedule;
use sbsolve::SbRunner;

/// Environment variable holding the default worker thread count.
const THREADS_ENV: &str = "SBSOLVE_THREADS";

#[derive(Parser)]
#[command(name = "sbsolve", version, about = "Simulated-bifurcation Ising solver and benchmark harness")]
struct Cli {
    /// Worker threads (default: SBSOLVE_THREADS or all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single instance and print the best result
    Solve(SolveArgs),
    /// Multi-run benchmark: objective distribution, success probability, time-to-target
    Bench(BenchArgs),
    /// Cycle-count model for the unrolled matrix-vector kernels
    Cost(CostArgs),
    /// Model conversions (QUBO to Ising, field embedding)
    Convert(ConvertArgs),
    /// Generate a random dense max-cut instance
    Gen(GenArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Max-cut instance file (header + edge list)
    #[arg(long, value_name = "FILE")]
    gset: Option<PathBuf>,
    /// Knapsack instance file ("n W" then "value weight" lines)
    #[arg(long, value_name = "FILE")]
    knapsack: Option<PathBuf>,
    /// Ising model JSON file
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// QUBO model JSON file (converted to Ising form)
    #[arg(long, value_name = "FILE")]
    qubo: Option<PathBuf>,
    /// Reject comments and blank lines in knapsack files
    #[arg(long)]
    strict: bool,
    /// Knapsack penalty weight (default: twice the largest value)
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Algorithm variant
    #[arg(long, value_parser = ["ballistic", "discrete"], default_value = "discrete")]
    variant: String,
    /// Enable the momentum heating term
    #[arg(long)]
    heated: bool,
    /// Heating strength gamma
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Integration step (default: 1.0 discrete, 0.5 ballistic)
    #[arg(long)]
    dt: Option<f64>,
    /// Final pump amplitude
    #[arg(long, default_value_t = 1.0)]
    a0: f64,
    /// Steps per run
    #[arg(long, default_value_t = 10_000)]
    steps: u32,
    /// Independent restarts
    #[arg(long, default_value_t = 10)]
    runs: u32,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initialization range for positions and momenta
    #[arg(long, default_value_t = 0.1)]
    init_range: f64,
    /// Coupling scale: "auto" or a number
    #[arg(long, default_value = "auto")]
    c0: String,
    /// Numeric backend
    #[arg(long, value_parser = ["float64", "fixed"], default_value = "float64")]
    backend: String,
    /// Coupling word width for the fixed backend
    #[arg(long, default_value_t = 8)]
    j_bits: u32,
    /// Explicit x/y word width (fixed backend; derived when absent)
    #[arg(long, requires = "frac_bits")]
    total_bits: Option<u32>,
    /// Explicit fractional bits (fixed backend)
    #[arg(long, requires = "total_bits")]
    frac_bits: Option<u32>,
    /// Spin blocks processed concurrently within a step
    #[arg(long)]
    pb: Option<u32>,
    /// Record per-step energies and track the best step
    #[arg(long)]
    trajectory: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<SolverConfig, CliError> {
        let mut cfg = match self.variant.as_str() {
            "ballistic" => SolverConfig::ballistic(),
            _ => SolverConfig::discrete(),
        };
        cfg.heated = self.heated;
        cfg.gamma = if self.heated { self.gamma } else { 0.0 };
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        cfg.a0 = self.a0;
        cfg.n_steps = self.steps;
        cfg.n_runs = self.runs;
        cfg.seed = self.seed;
        cfg.init_range = self.init_range;
        cfg.c0_policy = match self.c0.as_str() {
            "auto" => C0Policy::Auto,
            s => C0Policy::Fixed(
                s.parse()
                    .map_err(|_| CliError::usage(format!("--c0 must be \"auto\" or a number, got {s:?}")))?,
            ),
        };
        cfg.backend = match self.backend.as_str() {
            "fixed" => {
                let formats = match (self.total_bits, self.frac_bits) {
                    (Some(t), Some(f)) => {
                        let fmt = FixedFormat::new(t, f)
                            .map_err(|e| CliError::usage(e.to_string()))?;
                        Some(StateFormats { x: fmt, y: fmt })
                    }
                    _ => None,
                };
                Backend::Fixed(FixedBackendConfig {
                    formats,
                    j_bits: self.j_bits,
                    auto_scale_j: true,
                })
            }
            _ => Backend::Float64,
        };
        cfg.parallel = self
            .pb
            .map(|pb| ParallelParams::new(1, 1, pb))
            .transpose()
            .map_err(|e| CliError::usage(e.to_string()))?;
        cfg.record_trajectory = self.trajectory;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write a JSON report
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Target policy: "sa", "brute", or a number (best-known objective)
    #[arg(long, default_value = "sa")]
    target: String,
    /// Success threshold as a fraction of the target
    #[arg(long, default_value_t = 0.9)]
    fraction: f64,
    /// Annealing oracle sweeps
    #[arg(long, default_value_t = 10_000)]
    sa_sweeps: u32,
    #[arg(long, default_value_t = 10.0)]
    sa_t_start: f64,
    #[arg(long, default_value_t = 0.05)]
    sa_t_end: f64,
    #[arg(long, default_value_t = 7)]
    sa_seed: u64,
    /// Write the full report as JSON
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Write per-run and CDF tables as <PREFIX>_runs.csv / <PREFIX>_cdf.csv
    #[arg(long, value_name = "PREFIX")]
    csv: Option<String>,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    nspin: u64,
    #[arg(long, default_value_t = 1)]
    pr: u32,
    #[arg(long, default_value_t = 1)]
    pc: u32,
    #[arg(long, default_value_t = 1)]
    pb: u32,
    #[arg(long, value_parser = ["sequential", "unrolled-cols", "unrolled-rows", "blocked", "pipelined"],
          default_value = "pipelined")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    steps: u64,
    /// Clock period in nanoseconds
    #[arg(long, default_value_t = 5.0)]
    tck_ns: f64,
    /// Evaluate all divisor combinations instead of a single point
    #[arg(long)]
    sweep: bool,
    /// Use ceiling division for non-divisor factors
    #[arg(long)]
    ceil: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(subcommand)]
    which: ConvertCommand,
}

#[derive(Subcommand)]
enum ConvertCommand {
    /// Convert a QUBO JSON model to an equivalent Ising JSON model
    QuboToIsing { input: PathBuf, output: PathBuf },
    /// Fold the field vector into an enlarged coupling matrix
    EmbedField { input: PathBuf, output: PathBuf },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nodes: usize,
    /// Smallest coupling coefficient (edge weight is -J/2)
    #[arg(long, default_value_t = -128, allow_hyphen_values = true)]
    jmin: i64,
    /// Largest coupling coefficient
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    jmax: i64,
    /// Probability that a node pair draws a coefficient
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout when absent)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Error carrying its process exit code: 1 usage, 2 parse, 3 solver.
struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 1,
            msg: msg.into(),
        }
    }

    fn parse(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }

    fn solver(msg: impl Into<String>) -> Self {
        Self {
            code: 3,
            msg: msg.into(),
        }
    }
}

impl From<sbsolve::io::ParseError> for CliError {
    fn from(e: sbsolve::io::ParseError) -> Self {
        Self::parse(e.to_string())
    }
}

impl From<sbsolve::engine::EngineError> for CliError {
    fn from(e: sbsolve::engine::EngineError) -> Self {
        Self::solver(e.to_string())
    }
}

impl From<sbsolve::bench::BenchError> for CliError {
    fn from(e: sbsolve::bench::BenchError) -> Self {
        Self::solver(e.to_string())
    }
}

impl From<sbsolve::encoders::EncodeError> for CliError {
    fn from(e: sbsolve::encoders::EncodeError) -> Self {
        Self::parse(e.to_string())
    }
}

impl From<sbsolve::cost::CostError> for CliError {
    fn from(e: sbsolve::cost::CostError) -> Self {
        Self::usage(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::solver(format!("cannot write {}: {e}", path.display())))
}

enum LoadedProblem {
    Cut(sbsolve::MaxCutInstance),
    Sack(sbsolve::KnapsackInstance, Option<f64>),
    Raw(IsingModel),
}

impl LoadedProblem {
    fn to_bench(&self) -> BenchProblem {
        match self {
            LoadedProblem::Cut(g) => BenchProblem::MaxCut(g.clone()),
            LoadedProblem::Sack(k, lambda) => BenchProblem::Knapsack {
                inst: k.clone(),
                penalty: *lambda,
            },
            LoadedProblem::Raw(m) => BenchProblem::Ising(m.clone()),
        }
    }
}

fn load_problem(args: &ProblemArgs) -> Result<LoadedProblem, CliError> {
    let sources = [&args.gset, &args.knapsack, &args.model, &args.qubo]
        .iter()
        .filter(|p| p.is_some())
        .count();
    if sources != 1 {
        return Err(CliError::usage(
            "choose exactly one of --gset, --knapsack, --model, --qubo",
        ));
    }
    if let Some(path) = &args.gset {
        Ok(LoadedProblem::Cut(parse_gset(&read_file(path)?)?))
    } else if let Some(path) = &args.knapsack {
        let mode = if args.strict {
            ParserMode::Strict
        } else {
            ParserMode::Lenient
        };
        Ok(LoadedProblem::Sack(
            parse_knapsack(&read_file(path)?, mode)?,
            args.lambda,
        ))
    } else if let Some(path) = &args.model {
        Ok(LoadedProblem::Raw(model_from_json(&read_file(path)?)?))
    } else {
        let path = args.qubo.as_ref().unwrap();
        Ok(LoadedProblem::Raw(
            qubo_from_json(&read_file(path)?)?.to_ising(),
        ))
    }
}

#[derive(Serialize)]
struct SolveReport {
    problem: String,
    config: SolverConfig,
    effective: EffectiveParams,
    best: RunResult,
    run_energies: Vec<f64>,
}

fn spins_compact(spins: &sbsolve::SpinVector) -> String {
    let mut s: String = spins
        .as_slice()
        .iter()
        .take(128)
        .map(|&v| if v > 0 { '+' } else { '-' })
        .collect();
    if spins.len() > 128 {
        s.push_str("...");
    }
    s
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.problem)?;
    let cfg = args.config.build()?;

    let (label, enc, output) = match &problem {
        LoadedProblem::Cut(g) => {
            let enc = encode_maxcut(g);
            let out = solve_encoding(&enc, &cfg)?;
            (
                format!("max-cut: {} nodes, {} edges", g.n(), g.edges().len()),
                Some(enc),
                out,
            )
        }
        LoadedProblem::Sack(k, lambda) => {
            let lambda = lambda.unwrap_or_else(|| default_penalty(k));
            let enc = encode_knapsack(k, lambda)?;
            let out = solve_encoding(&enc, &cfg)?;
            (
                format!("knapsack: {} items, capacity {}", k.n(), k.capacity()),
                Some(enc),
                out,
            )
        }
        LoadedProblem::Raw(m) => {
            let out = SbRunner::new(m, &cfg)?.solve()?;
            (format!("ising: {} spins", m.n()), None, out)
        }
    };

    println!("problem: {label}");
    println!("c0: {}", output.effective.c0);
    println!("best energy: {}", output.best.best_energy);
    if let Some(enc) = &enc {
        describe_objective(enc, &output.best)?;
    }
    println!("spins: {}", spins_compact(&output.best.best_spins));
    if output.effective.formats.is_some() {
        let sat: u64 = output.all.iter().map(|r| r.saturation_events).sum();
        println!("saturation events: {sat}");
    }

    if let Some(path) = &args.output {
        let report = SolveReport {
            problem: label,
            config: cfg,
            effective: output.effective.clone(),
            best: output.best.clone(),
            run_energies: output.all.iter().map(|r| r.best_energy).collect(),
        };
        write_file(
            path,
            &serde_json::to_string_pretty(&report).expect("report serialization cannot fail"),
        )?;
    }
    Ok(())
}

fn describe_objective(enc: &Encoding, best: &RunResult) -> Result<(), CliError> {
    match &enc.problem {
        sbsolve::encoders::SourceProblem::MaxCut(g) => {
            println!("cut value: {}", g.cut_value(&best.best_spins)?);
        }
        sbsolve::encoders::SourceProblem::Knapsack(_) => {
            let sol = decode_knapsack(enc, &best.best_spins)?;
            println!(
                "value: {} weight: {} feasible: {}",
                sol.total_value, sol.total_weight, sol.feasible
            );
            println!("selected items: {:?}", sol.selected);
        }
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.problem)?.to_bench();
    let cfg = args.config.build()?;
    let target = match args.target.as_str() {
        "sa" => TargetPolicy::SimulatedAnnealing(
            AnnealSchedule::new(args.sa_t_start, args.sa_t_end, args.sa_sweeps, args.sa_seed)
                .map_err(|e| CliError::usage(e.to_string()))?,
        ),
        "brute" => TargetPolicy::BruteForce,
        s => TargetPolicy::Known(
            s.parse()
                .map_err(|_| CliError::usage(format!("--target must be \"sa\", \"brute\", or a number, got {s:?}")))?,
        ),
    };
    let opts = BenchOptions {
        target: Some(target),
        fraction: args.fraction,
    };
    let report = run_benchmark(&problem, &cfg, &opts)?;
    print_bench_summary(&report);

    if let Some(path) = &args.json {
        write_file(path, &report.to_json())?;
    }
    if let Some(prefix) = &args.csv {
        write_file(Path::new(&format!("{prefix}_runs.csv")), &report.runs_csv())?;
        write_file(Path::new(&format!("{prefix}_cdf.csv")), &report.cdf_csv())?;
    }
    Ok(())
}

fn print_bench_summary(report: &BenchReport) {
    println!("problem: {}", report.problem);
    println!("runs: {}", report.runs.len());
    println!("best objective: {}", report.best_objective);
    println!("mean objective: {}", report.mean_objective);
    if let Some(t) = report.target {
        println!("target: {t} (fraction {})", report.target_fraction);
    }
    if let Some(p) = report.success_prob {
        println!("success probability: {p}");
    }
    if report.target_met_in_all_runs {
        println!("target met in all runs");
    }
    println!("mean run time: {:.6e} s", report.t_com_s);
    match report.ttt_s {
        Some(t) => println!("time to target: {t:.6e} s"),
        None => println!("time to target: n/a"),
    }
    if report.total_saturation_events > 0 {
        println!("saturation events: {}", report.total_saturation_events);
    }
}

fn cmd_cost(args: &CostArgs) -> Result<(), CliError> {
    let tck = args.tck_ns * 1e-9;
    if args.sweep {
        let rows = sweep(args.nspin, args.steps, tck)?;
        println!("{:>6} {:>6} {:>6} {:>14} {:>8} {:>14}", "pr", "pc", "pb", "cycles/step", "overlap", "time_s");
        for r in rows {
            println!(
                "{:>6} {:>6} {:>6} {:>14.3} {:>8} {:>14.6e}",
                r.pr, r.pc, r.pb, r.cycles_per_step, r.overlap, r.exec_time_s
            );
        }
        return Ok(());
    }
    let mode = match args.mode.as_str() {
        "sequential" => KernelMode::Sequential,
        "unrolled-cols" => KernelMode::UnrolledCols,
        "unrolled-rows" => KernelMode::UnrolledRows,
        "blocked" => KernelMode::Blocked,
        _ => KernelMode::Pipelined,
    };
    let p = ParallelParams::new(args.pr, args.pc, args.pb)?;
    let cycles = if args.ceil {
        cycles_per_step_ceil(args.nspin, p, mode)
    } else {
        cycles_per_step(args.nspin, p, mode)?
    };
    let cycles_f = num_traits::ToPrimitive::to_f64(&cycles).unwrap();
    println!("cycles/step: {cycles_f}");
    if !args.ceil {
        let t = exec_time(args.nspin, p, mode, args.steps, tck)?;
        println!("time for {} steps at {} ns: {:.6e} s", args.steps, args.tck_ns, t);
    }
    if matches!(mode, KernelMode::Pipelined) && args.nspin % u64::from(args.pc) == 0 {
        println!(
            "mm/te overlap: {}",
            overlap_feasible(args.nspin, args.pc, args.pr)?
        );
    }
    Ok(())
}

fn cmd_convert(args: &ConvertArgs) -> Result<(), CliError> {
    match &args.which {
        ConvertCommand::QuboToIsing { input, output } => {
            let q = qubo_from_json(&read_file(input)?)?;
            write_file(output, &model_to_json(&q.to_ising()))?;
        }
        ConvertCommand::EmbedField { input, output } => {
            let m = model_from_json(&read_file(input)?)?;
            write_file(output, &model_to_json(&m.embed_field()))?;
        }
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    if args.jmin > args.jmax {
        return Err(CliError::usage("--jmin must not exceed --jmax"));
    }
    let inst = sbsolve::MaxCutInstance::random(
        args.nodes,
        args.jmin..=args.jmax,
        args.density,
        args.seed,
    )?;
    let text = write_gset(&inst);
    match &args.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn configure_threads(cli_threads: Option<usize>) {
    let threads = cli_threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads(cli.threads);
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
