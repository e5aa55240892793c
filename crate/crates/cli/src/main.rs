use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracobstacle::config::{parse_config, RunConfig};
use fracobstacle::limits::KMethod;
use fracobstacle::records::RecordFormat;
use fracobstacle::Error;

mod run;

#[derive(Parser, Debug)]
#[command(name = "fracobstacle", version, about = "Nonlocal obstacle design solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hard-obstacle Poincaré constant for a given obstacle set.
    SolveHard(Common),
    /// Soft-obstacle Poincaré constant for a given potential and σ.
    SolveSoft(Common),
    /// Optimal obstacle set of measure α|Ω|.
    OptimizeHard(Common),
    /// Optimal potential of mass α|Ω| for a given σ.
    OptimizeSoft(Common),
    /// Brute-force optimum over all binary designs (soft if σ is given).
    Oracle(Common),
    /// Soft optima along an increasing σ ladder against the hard optimum.
    Continuation(Common),
    /// Scaled hard optima for increasing s against the local problem.
    GammaLimit(Common),
    /// (1 − s)[u]^p against K(n, p)‖∇u‖^p for a fixed profile.
    BbmCheck(Common),
    /// The constant K(n, p).
    ConstantK(KArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; records go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for the data-parallel loops.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Cells per axis, comma separated (e.g. `48` or `16,8`).
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
}

#[derive(Args, Debug, Clone)]
struct KArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Jsonlines,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Gamma,
    Sphere,
    Both,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> fracobstacle::Result<()> {
    let (name, common) = match cli.command {
        Command::ConstantK(args) => return constant_k(&args),
        Command::SolveHard(c) => (run::Task::SolveHard, c),
        Command::SolveSoft(c) => (run::Task::SolveSoft, c),
        Command::OptimizeHard(c) => (run::Task::OptimizeHard, c),
        Command::OptimizeSoft(c) => (run::Task::OptimizeSoft, c),
        Command::Oracle(c) => (run::Task::Oracle, c),
        Command::Continuation(c) => (run::Task::Continuation, c),
        Command::GammaLimit(c) => (run::Task::GammaLimit, c),
        Command::BbmCheck(c) => (run::Task::BbmCheck, c),
    };
    let config = load_config(&common)?;
    let format = match common.format {
        Some(FormatArg::Csv) => RecordFormat::Csv,
        Some(FormatArg::Jsonlines) => RecordFormat::Jsonlines,
        None => config.output.format,
    };
    let out = common.out.clone().or_else(|| config.output.path.clone());
    let threads = common.threads;
    if threads == Some(0) {
        return Err(Error::Parameter("--threads must be at least 1".into()));
    }
    eprintln!(
        "# {} threads={} seed={}",
        name.as_str(),
        threads.map_or_else(|| "auto".to_string(), |t| t.to_string()),
        config.solver.seed
    );
    let records = with_threads(threads, || run::execute(name, &config))?;
    run::emit(&records, out.as_deref(), format)
}

/// Config file (if any), then command-line overrides, then validation.
fn load_config(common: &Common) -> fracobstacle::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(cells) = &common.cells {
        config.cells = cells.clone();
    }
    if common.s.is_some() {
        config.s = common.s;
    }
    if common.p.is_some() {
        config.p = common.p;
    }
    if common.alpha.is_some() {
        config.alpha = common.alpha;
    }
    if common.sigma.is_some() {
        config.sigma = common.sigma;
    }
    if let Some(seed) = common.seed {
        config.solver.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> fracobstacle::Result<T> + Send,
) -> fracobstacle::Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot start {k} worker threads: {e}")))?;
            pool.install(f)
        }
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> fracobstacle::Result<T> + Send,
) -> fracobstacle::Result<T> {
    if threads.is_some_and(|k| k > 1) {
        eprintln!("# built without the `parallel` feature: running on one thread");
    }
    f()
}

fn constant_k(args: &KArgs) -> fracobstacle::Result<()> {
    use fracobstacle::limits::compute_k;
    match args.method {
        MethodArg::Gamma => println!("{:.17}", compute_k(args.n, args.p, KMethod::Gamma)?),
        MethodArg::Sphere => println!("{:.17}", compute_k(args.n, args.p, KMethod::Sphere)?),
        MethodArg::Both => {
            let g = compute_k(args.n, args.p, KMethod::Gamma)?;
            let s = compute_k(args.n, args.p, KMethod::Sphere)?;
            println!("gamma      {g:.17}");
            println!("sphere     {s:.17}");
            println!("difference {:.3e}", (g - s).abs());
        }
    }
    Ok(())
}
