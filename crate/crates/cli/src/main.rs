//! `mrfsdp`: generate, solve, evaluate and benchmark Potts-model MRFs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrfsdp::bench::{run_family, write_report, FamilySpec, REPORT_FILES};
use mrfsdp::dars::DualParams;
use mrfsdp::fuses::Initialization;
use mrfsdp::generate::{generate_grid_instance, BinaryWeightModel, GridSpec};
use mrfsdp::io::{
    evaluate, matrix_triplet_text, read_json, solve_instance, to_json, write_atomic, write_json, EncodingKind,
    ErrorDocument, Method, ResultDocument, RunConfig, DEFAULT_ICM_SWEEPS,
};
use mrfsdp::metrics::MetricsReport;
use mrfsdp::tnt::SolverParams;
use mrfsdp::{Error, Labeling, MrfInstance, Result};
use serde_json::json;

/// Environment variable capping the worker-thread count.
const THREADS_ENV: &str = "MRFSDP_THREADS";

#[derive(Parser)]
#[command(name = "mrfsdp", version, about = "MAP inference for Potts-model MRFs via low-rank semidefinite relaxations")]
struct Cli {
    /// Log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid instance.
    Gen(GenArgs),
    /// Solve an instance and write a result document.
    Solve(SolveArgs),
    /// Score result documents against an exact solution and ground truth.
    Eval(EvalArgs),
    /// Run a benchmark family and write CSV tables.
    Bench(BenchArgs),
    /// Write an encoding's cost matrix as coordinate triplets.
    ExportMatrix(ExportArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Probability that a node's measured label is wrong.
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 0.5)]
    unary_min: f64,
    #[arg(long, default_value_t = 1.5)]
    unary_max: f64,
    /// Unary terms per node (the measured label plus weaker runner-ups).
    #[arg(long, default_value_t = 1)]
    measurements: usize,
    /// Mean ground-truth patch size in nodes.
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    /// Edge weight model: contrast, constant or uniform.
    #[arg(long, default_value = "contrast")]
    binary_model: String,
    #[arg(long, default_value_t = 0.2)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.6)]
    lambda2: f64,
    #[arg(long, default_value_t = 1e-3)]
    beta: f64,
    /// Standard deviation of the synthetic color noise.
    #[arg(long, default_value_t = 10.0)]
    color_noise: f64,
    /// Weight for the constant model.
    #[arg(long, default_value_t = 0.5)]
    binary_weight: f64,
    /// Range for the uniform model.
    #[arg(long, default_value_t = 0.1)]
    binary_min: f64,
    #[arg(long, default_value_t = 1.0)]
    binary_max: f64,
}

impl GridArgs {
    fn spec(&self, rows: usize, cols: usize, num_labels: usize, seed: u64) -> Result<GridSpec> {
        let binary_weight_model = match self.binary_model.as_str() {
            "contrast" => BinaryWeightModel::Contrast {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
                beta: self.beta,
                color_noise: self.color_noise,
            },
            "constant" => BinaryWeightModel::Constant { weight: self.binary_weight },
            "uniform" => BinaryWeightModel::Uniform { low: self.binary_min, high: self.binary_max },
            other => return Err(invalid(format!("unknown binary model '{other}'"))),
        };
        Ok(GridSpec {
            rows,
            cols,
            num_labels,
            unary_noise: self.noise,
            unary_weight_range: (self.unary_min, self.unary_max),
            binary_weight_model,
            patch_size: self.patch_size,
            measurements_per_node: self.measurements,
            seed,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long)]
    labels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    /// Instance file to write.
    #[arg(short, long, default_value = "instance.json")]
    out: PathBuf,
    /// Also write the ground-truth labeling here.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

/// Staircase and trust-region settings. Unset flags take the method's
/// defaults (gradient tolerance 1e-2 for fuses, 1e-3 for dars).
#[derive(Args, Clone, Default)]
struct SolverArgs {
    #[arg(long)]
    grad_norm_tol: Option<f64>,
    #[arg(long)]
    eig_tol: Option<f64>,
    #[arg(long)]
    rel_func_decrease_tol: Option<f64>,
    #[arg(long)]
    max_tnt_iterations: Option<usize>,
    #[arg(long)]
    initial_tr_radius: Option<f64>,
    #[arg(long)]
    tr_decrease_factor: Option<f64>,
    #[arg(long)]
    tr_increase_factor: Option<f64>,
    #[arg(long)]
    max_cg_iterations: Option<usize>,
    #[arg(long)]
    cg_success_eta: Option<f64>,
    #[arg(long)]
    max_staircase_steps: Option<usize>,
}

impl SolverArgs {
    fn any(&self) -> bool {
        self.apply(SolverParams::fuses()) != SolverParams::fuses()
            || self.apply(SolverParams::dars()) != SolverParams::dars()
    }

    fn apply(&self, mut p: SolverParams) -> SolverParams {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(
            grad_norm_tol,
            eig_tol,
            rel_func_decrease_tol,
            max_tnt_iterations,
            initial_tr_radius,
            tr_decrease_factor,
            tr_increase_factor,
            max_cg_iterations,
            cg_success_eta,
            max_staircase_steps
        );
        p
    }
}

#[derive(Args, Clone)]
struct DualArgs {
    /// Dual ascent step size.
    #[arg(long, default_value_t = DualParams::default().step_size)]
    dual_step_size: f64,
    #[arg(long, default_value_t = DualParams::default().max_iterations)]
    dual_max_iterations: usize,
    /// Stop dual ascent once every constraint residual is below this.
    #[arg(long, default_value_t = DualParams::default().dual_grad_tol)]
    dual_grad_tol: f64,
}

impl DualArgs {
    fn params(&self) -> DualParams {
        DualParams {
            step_size: self.dual_step_size,
            max_iterations: self.dual_max_iterations,
            dual_grad_tol: self.dual_grad_tol,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Start the one-hot relaxation from the unary-argmax labeling.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, default_value_t = DEFAULT_ICM_SWEEPS)]
    icm_sweeps: usize,
    /// Largest number of labelings the exact method may enumerate.
    #[arg(long, default_value_t = mrfsdp::baselines::DEFAULT_BUDGET)]
    exact_budget: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    dual: DualArgs,
}

impl RunArgs {
    fn config(&self, method: Method, seed: u64, verbosity: u8) -> RunConfig {
        let mut c = RunConfig::for_method(method);
        c.solver = self.solver.apply(c.solver);
        c.dual = self.dual.params();
        c.seed = seed;
        c.init = if self.warm_start { Initialization::UnaryWarmStart } else { Initialization::Random };
        c.icm_max_sweeps = self.icm_sweeps;
        c.exact_budget = self.exact_budget;
        c.verbosity = verbosity;
        c
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    #[arg(short, long, value_parser = parse_method, default_value = "fuses")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
    /// Result file to write.
    #[arg(short, long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Instance file the results were computed for.
    #[arg(long)]
    instance: PathBuf,
    /// Result document of the exact method.
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Ground-truth labeling (a JSON array of labels).
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Result documents to score.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid side lengths; each instance is side × side.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 6, 8])]
    sides: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [3usize])]
    labels: Vec<usize>,
    /// Number of seeds per cell, starting at --first-seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_values_t = [Method::Fuses, Method::Icm, Method::Exact])]
    methods: Vec<Method>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Directory for the CSV tables.
    #[arg(short, long, default_value = "bench")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    instance: PathBuf,
    /// pm (±1 vector encoding) or zo ({0,1} matrix encoding).
    #[arg(short, long, value_parser = parse_encoding, default_value = "zo")]
    encoding: EncodingKind,
    #[arg(short, long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_encoding(s: &str) -> std::result::Result<EncodingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn invalid(msg: String) -> Error {
    Error::InvalidInput(msg)
}

fn read_instance(path: &Path) -> Result<MrfInstance> {
    read_json(path)
}

fn gen(args: &GenArgs) -> Result<()> {
    let spec = args.grid.spec(args.rows, args.cols, args.labels, args.seed)?;
    let g = generate_grid_instance(&spec)?;
    write_json(&args.out, &g.mrf)?;
    if let Some(p) = &args.ground_truth {
        write_json(p, &g.ground_truth)?;
    }
    println!(
        "wrote {}: N={} K={} edges={}",
        args.out.display(),
        g.mrf.num_nodes(),
        g.mrf.num_labels(),
        g.mrf.binary_terms().len()
    );
    Ok(())
}

fn solve(args: &SolveArgs, verbosity: u8) -> Result<()> {
    let mrf = read_instance(&args.instance)?;
    let mut config = args.run.config(args.method, args.seed, verbosity);
    config.output = Some(args.out.clone());
    let doc = solve_instance(&mrf, &config)?;
    write_json(&args.out, &doc)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    println!(
        "{}: f_rounded={:.6} f_relaxed={} certified={} total={:.3}s -> {}",
        doc.method,
        doc.f_rounded,
        opt(doc.f_relaxed),
        doc.certified.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
        doc.timings.total_seconds,
        args.out.display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let mrf = read_instance(&args.instance)?;
    let exact: Option<ResultDocument> = args.exact.as_deref().map(read_json).transpose()?;
    let gt: Option<Labeling> = args.ground_truth.as_deref().map(read_json).transpose()?;
    let mut reports = Vec::new();
    for path in &args.results {
        let doc: ResultDocument = read_json(path)?;
        let report: MetricsReport = evaluate(&mrf, &doc, exact.as_ref(), gt.as_ref())?;
        reports.push(json!({ "result": path, "method": doc.method, "metrics": report }));
    }
    let text = to_json(&reports)?;
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let family = FamilySpec {
        sides: args.sides.clone(),
        label_counts: args.labels.clone(),
        seeds: (args.first_seed..args.first_seed + args.seeds).collect(),
        methods: args.methods.clone(),
        grid: args.grid.spec(1, 1, 2, 0)?,
        solver: args.run.solver.any().then(|| args.run.solver.apply(SolverParams::fuses())),
        dual: args.run.dual.params(),
        init: args.run.config(Method::Fuses, 0, 0).init,
        icm_max_sweeps: args.run.icm_sweeps,
        exact_budget: args.run.exact_budget,
    };
    let report = run_family(&family)?;
    write_report(&args.out_dir, &report)?;
    write_json(&args.out_dir.join("family.json"), &family)?;
    let failures = report.cells.iter().filter(|c| c.error.is_some()).count();
    println!(
        "{} cells ({} failed); wrote {} and family.json to {}",
        report.cells.len(),
        failures,
        REPORT_FILES.join(", "),
        args.out_dir.display()
    );
    Ok(())
}

fn export(args: &ExportArgs) -> Result<()> {
    let mrf = read_instance(&args.instance)?;
    write_atomic(&args.out, matrix_triplet_text(&mrf, args.encoding).as_bytes())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(invalid(format!("{THREADS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| invalid(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a, cli.verbose),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::ExportMatrix(a) => export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = ErrorDocument::from(&e);
            eprintln!("{}", json!({ "error": doc }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
