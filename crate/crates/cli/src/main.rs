use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttopinf::harness::{self, Method, Problem, RunConfig, RunReport};
use ttopinf::integrate::IntegratorConfig;
use ttopinf::pde::{generate_snapshots, GridSpec, PdeProblem};
use ttopinf::snapshot::{file_sha256, read_header_file, SnapshotSet};
use ttopinf::Error;

#[derive(Parser)]
#[command(name = "ttopinf", version, about = "Tensor-train operator inference benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark PDE and write a snapshot file.
    Generate(GenerateArgs),
    /// Train one method and report the prediction error.
    Run(RunArgs),
    /// Run several methods on one snapshot file and print a table.
    Table(TableArgs),
    /// Print a snapshot file header.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PdeChoice {
    Heat,
    Burgers,
}

#[derive(Args)]
struct GenerateArgs {
    problem: PdeChoice,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt_snapshot: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    eps_tt: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_f: Option<f64>,
    #[arg(long)]
    n_modes: Option<usize>,
    #[arg(long)]
    train_cut: Option<f64>,
    #[arg(long)]
    eval_time: Option<f64>,
    #[arg(long)]
    stencil_order: Option<u32>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    factor_policy: Option<String>,
    #[arg(long)]
    use_cross: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    snapshots: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write the predicted field as a one-snapshot file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    snapshots: PathBuf,
    /// Comma-separated methods; empty for none.
    #[arg(long, default_value = "rom,tt-rom,ft,tt,qtt")]
    methods: String,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Table(a) => table(a),
        Command::Inspect { path } => inspect(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let (mut p, g) = match a.problem {
        PdeChoice::Heat => PdeProblem::heat_benchmark(),
        PdeChoice::Burgers => PdeProblem::burgers_benchmark(),
    };
    let g = GridSpec::new(a.nx.unwrap_or(g.nx), a.ny.unwrap_or(g.ny), (g.x0, g.x1), (g.y0, g.y1))?;
    if let Some(t) = a.t_final {
        p.t_final = t;
    }
    if let Some(dt) = a.dt_snapshot {
        p.dt_snapshot = dt;
    }
    p.snapshot_count()?;
    let cfg = IntegratorConfig { rtol: 1e-10, atol: 1e-12, ..IntegratorConfig::default() };
    let data = generate_snapshots(&p, &g, &cfg)?;
    data.write(&a.out)?;
    println!("{}  {} {:?}", file_sha256(&a.out)?, a.out.display(), data.dims());
    Ok(())
}

fn build_config(c: &ConfigArgs, method: Method) -> Result<RunConfig, Failure> {
    let mut text = String::new();
    if let Some(path) = &c.config {
        text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    // The problem picks the defaults, so resolve it first: flag, then file.
    let file_problem = text
        .lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .find(|(k, _)| k.trim() == "problem")
        .map(|(_, v)| v.trim().to_string());
    let problem: Problem = c.problem.clone().or(file_problem).unwrap_or_else(|| "heat".into()).parse()?;
    let mut cfg = RunConfig::benchmark(problem, method);
    cfg.apply_text(&text)?;
    cfg.method = method;
    cfg.problem = problem;
    let mut set = |k: &str, v: Option<String>| -> Result<(), Failure> {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
        Ok(())
    };
    set("eps_tt", c.eps_tt.map(|v| v.to_string()))?;
    set("gamma", c.gamma.map(|v| v.to_string()))?;
    set("lambda_a", c.lambda_a.map(|v| v.to_string()))?;
    set("lambda_f", c.lambda_f.map(|v| v.to_string()))?;
    set("n_modes", c.n_modes.map(|v| v.to_string()))?;
    set("train_cut", c.train_cut.map(|v| v.to_string()))?;
    set("eval_time", c.eval_time.map(|v| v.to_string()))?;
    set("stencil_order", c.stencil_order.map(|v| v.to_string()))?;
    set("metric", c.metric.clone())?;
    set("seed", c.seed.map(|v| v.to_string()))?;
    set("factor_policy", c.factor_policy.clone())?;
    if c.use_cross {
        cfg.use_cross = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(path: &Path) -> Result<(SnapshotSet, String), Failure> {
    Ok((SnapshotSet::read(path)?, file_sha256(path)?))
}

fn print_reports(reports: &[RunReport], format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let text = match format {
        Format::Csv => harness::table_csv(reports),
        Format::Json => harness::table_jsonl(reports)?,
    };
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let method: Method = a.method.as_deref().ok_or_else(|| Failure::Usage("--method is required".into()))?.parse()?;
    let cfg = build_config(&a.cfg, method)?;
    let (data, hash) = load(&a.snapshots)?;
    let outcome = harness::run(&cfg, &data, Some(hash))?;
    if let Some(path) = &a.out {
        SnapshotSet::new(data.layout(), outcome.prediction.clone(), cfg.eval_time, data.dt())?.write(path)?;
    }
    print_reports(&[outcome.report], a.cfg.format, None)
}

fn table(a: TableArgs) -> Result<(), Failure> {
    let methods: Vec<Method> = a
        .methods
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let (data, hash) = load(&a.snapshots)?;
    let mut reports = Vec::new();
    for m in methods {
        let cfg = build_config(&a.cfg, m)?;
        reports.push(harness::run_or_fail(&cfg, &data, Some(hash.clone())));
    }
    print_reports(&reports, a.cfg.format, a.out.as_deref())
}

fn inspect(path: &Path) -> Result<(), Failure> {
    let h = read_header_file(path)?;
    let json = serde_json::to_string_pretty(&h).map_err(|e| Error::Internal(e.to_string()))?;
    println!("{json}");
    println!("sha256: {}", file_sha256(path)?);
    Ok(())
}
