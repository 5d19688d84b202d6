use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gersho::asymptotics::{self, Construction};
use gersho::gersho::{build_by_doubling, build_gersho, verify_quantizer, ConstructionReport, Method, Quantizer};
use gersho::io::{self as gio, format_g17};
use gersho::lloyd::{run_lloyd, Init};
use gersho::{DensityModel, Error, Order, SolverConfig};
use serde::Serialize;

const CONFIG_ENV: &str = "GQ_SEED_CONFIG";

#[derive(Parser)]
#[command(name = "gq", version, about = "Build and check Gersho quantizers of one-dimensional densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a quantizer and write it as JSON.
    Build(BuildArgs),
    /// Check a quantizer file against the defining properties.
    Verify(VerifyArgs),
    /// Tabulate n^r D_n against the Zador constant.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BuildMethod {
    Gersho,
    Doubling,
    Lloyd,
}

#[derive(clap::Args)]
struct BuildArgs {
    /// Density, e.g. uniform:0,1, gauss:0,1, laplace:0,1, exp:1, powertail:3,1, tabulated:path.csv
    #[arg(long)]
    dist: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, value_enum, default_value = "gersho")]
    method: BuildMethod,
    /// Output file; the report and manifest are written next to it.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Quantizer JSON file.
    file: PathBuf,
    #[arg(long)]
    dist: String,
    /// Exponent; defaults to the one stored in the file.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = gersho::gersho::DEFAULT_VERIFY_TOL)]
    tol: f64,
}

#[derive(clap::Args)]
struct ConvergenceArgs {
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// Comma-separated levels.
    #[arg(long, value_delimiter = ',', conflicts_with = "dyadic", required_unless_present = "dyadic")]
    levels: Vec<usize>,
    /// Use levels 1, 2, 4, ..., 2^k.
    #[arg(long)]
    dyadic: Option<u32>,
    #[arg(long, value_enum, default_value = "gersho")]
    method: TableMethod,
    /// Diagnostics interval `lo,hi`, or `auto` for the inner hull of the 8-level quantizer.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Worker threads across levels.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableMethod {
    Gersho,
    Lloyd,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Argument errors already printed by the parser.
    BadArguments,
    Usage(anyhow::Error),
    Construction(anyhow::Error),
    Verification,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: Vec<String>,
    model: String,
    r: f64,
    levels: Vec<usize>,
    config: SolverConfig,
    config_file: Option<String>,
    outputs: Vec<String>,
    version: &'static str,
    started_unix: u64,
    seconds_per_level: Vec<f64>,
}

#[derive(Serialize)]
struct BuildReport {
    method: Method,
    distortion: f64,
    per_cell_spread: f64,
    iterations: usize,
    residual_history: Vec<f64>,
    unique: bool,
    /// Only meaningful for Lloyd.
    converged: bool,
}

impl From<ConstructionReport> for BuildReport {
    fn from(r: ConstructionReport) -> Self {
        Self {
            method: r.method,
            distortion: r.distortion,
            per_cell_spread: r.per_cell_spread,
            iterations: r.outer_iterations,
            residual_history: r.residual_history,
            unique: r.unique,
            converged: true,
        }
    }
}

struct Session {
    config: SolverConfig,
    config_file: Option<String>,
    started: SystemTime,
}

fn load_config() -> anyhow::Result<Session> {
    let started = SystemTime::now();
    let Some(path) = std::env::var_os(CONFIG_ENV) else {
        return Ok(Session { config: SolverConfig::default(), config_file: None, started });
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {CONFIG_ENV}={}", path.to_string_lossy()))?;
    let config: SolverConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.to_string_lossy()))?;
    config.validate()?;
    Ok(Session { config, config_file: Some(path.to_string_lossy().into_owned()), started })
}

fn parse_model(spec: &str) -> anyhow::Result<DensityModel> {
    spec.parse::<DensityModel>().with_context(|| format!("invalid --dist {spec:?}"))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(
    path: &Path,
    ctx: &Session,
    model: &str,
    r: f64,
    levels: Vec<usize>,
    outputs: &[&Path],
    seconds: Vec<f64>,
) -> anyhow::Result<()> {
    let manifest = RunManifest {
        command: std::env::args().collect(),
        model: model.to_string(),
        r,
        levels,
        config: ctx.config.clone(),
        config_file: ctx.config_file.clone(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix: ctx.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        seconds_per_level: seconds,
    };
    write(path, &gio::to_json(&manifest)?)
}

fn cmd_build(args: BuildArgs, ctx: &Session) -> Result<(), Failure> {
    let model = parse_model(&args.dist)?;
    let order = Order::new(args.r)?;
    ctx.config.check_order(order).map_err(anyhow::Error::from)?;
    if args.n == 0 {
        return Err(anyhow!("--n must be at least 1").into());
    }
    let cfg = &ctx.config;
    let start = Instant::now();
    let built: gersho::Result<(Quantizer, BuildReport)> = match args.method {
        BuildMethod::Gersho => build_gersho(&model, args.n, order, cfg).map(|(q, r)| (q, r.into())),
        BuildMethod::Doubling => {
            if !args.n.is_power_of_two() {
                return Err(anyhow!("--method doubling needs --n to be a power of two").into());
            }
            build_by_doubling(&model, args.n.trailing_zeros(), order, cfg).map(|(q, r)| (q, r.into()))
        }
        BuildMethod::Lloyd => run_lloyd(&model, args.n, order, Init::QuantileGrid, cfg).map(|run| {
            let report = BuildReport {
                method: Method::Lloyd,
                distortion: run.quantizer.distortion(),
                per_cell_spread: run.quantizer.per_cell_spread(),
                iterations: run.iterations,
                residual_history: Vec::new(),
                unique: run.quantizer.unique(),
                converged: run.converged,
            };
            (run.quantizer, report)
        }),
    };
    let (q, report) = built.map_err(|e| Failure::Construction(e.into()))?;
    let elapsed = start.elapsed().as_secs_f64();
    if !report.converged {
        eprintln!("warning: Lloyd iteration stopped after {} steps without converging", report.iterations);
    }
    if !q.unique() {
        eprintln!("warning: the support is not an interval; the quantizer may not be unique");
    }

    let json = gio::quantizer_to_json(&q)?;
    match &args.output {
        Some(path) => {
            let report_path = sibling(path, "report.json");
            let manifest_path = sibling(path, "manifest.json");
            write(path, &json)?;
            write(&report_path, &gio::to_json(&report)?)?;
            write_manifest(
                &manifest_path,
                ctx,
                &args.dist,
                args.r,
                vec![args.n],
                &[path, &report_path],
                vec![elapsed],
            )?;
            eprintln!("n = {}, D = {}, written to {}", q.level(), format_g17(q.distortion()), path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs, ctx: &Session) -> Result<(), Failure> {
    let model = parse_model(&args.dist)?;
    let text = fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let q =
        gio::quantizer_from_json(&text).with_context(|| format!("malformed quantizer file {}", args.file.display()))?;
    let order = match args.r {
        Some(r) => Order::new(r)?,
        None => q.order(),
    };
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(anyhow!("--tol must be positive").into());
    }
    let report = verify_quantizer(&model, &q, order, args.tol, &ctx.config);
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!("G1 level count       {}", mark(report.g1));
    println!("G2 interval cells    {}", mark(report.g2));
    println!("G3 optimal codepoints {} (max offset {})", mark(report.g3), format_g17(report.max_codepoint_offset));
    println!("G4 equal cell moments {} (spread {})", mark(report.g4), format_g17(report.per_cell_spread));
    println!("voronoi (info)       {}", if report.voronoi { "yes" } else { "no" });
    println!("distortion {}", format_g17(report.distortion));
    for (i, m) in report.cell_moments.iter().enumerate() {
        println!("cell {i} {}", format_g17(*m));
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn parse_interval(s: &str, model: &DensityModel, order: Order, cfg: &SolverConfig) -> Result<(f64, f64), Failure> {
    if s.trim() == "auto" {
        return asymptotics::default_interval(model, order, cfg).map_err(|e| Failure::Construction(e.into()));
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("invalid --interval {s:?}: {e}"))?;
    match parts.as_slice() {
        &[lo, hi] if lo.is_finite() && hi.is_finite() && lo < hi => Ok((lo, hi)),
        _ => Err(anyhow!("--interval must be lo,hi with finite lo < hi").into()),
    }
}

fn cmd_convergence(args: ConvergenceArgs, ctx: &Session) -> Result<(), Failure> {
    let model = parse_model(&args.dist)?;
    let order = Order::new(args.r)?;
    let cfg = &ctx.config;
    cfg.check_order(order).map_err(anyhow::Error::from)?;
    let levels: Vec<usize> = match args.dyadic {
        Some(k) if k <= 30 => (0..=k).map(|i| 1usize << i).collect(),
        Some(k) => return Err(anyhow!("--dyadic {k} is too large").into()),
        None => args.levels.clone(),
    };
    if levels.is_empty() || levels.contains(&0) {
        return Err(anyhow!("levels must be positive").into());
    }
    if args.interval.is_some() && args.output.is_none() {
        return Err(anyhow!("--interval needs -o to place the diagnostics file").into());
    }
    let interval = args.interval.as_deref().map(|s| parse_interval(s, &model, order, cfg)).transpose()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(anyhow!("--jobs must be at least 1").into());
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| anyhow!("thread pool: {e}"))?;
    let construction = match args.method {
        TableMethod::Gersho => Construction::Gersho,
        TableMethod::Lloyd => Construction::Lloyd,
    };
    let table = pool
        .install(|| asymptotics::convergence_table(&model, order, &levels, construction, cfg))
        .map_err(|e| Failure::Construction(e.into()))?;

    match table.zador {
        Some(c) => {
            let line = format!("C0 = {}", format_g17(c));
            if args.output.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        }
        None => eprintln!("warning: the Zador constant is infinite for {}; writing the scaled column only", args.dist),
    }
    let mut failed = false;
    for (n, e) in table.failures() {
        eprintln!("level {n} failed: {e}");
        failed = true;
    }

    let rows: Vec<_> = table.rows().cloned().collect();
    let mut csv = Vec::new();
    gio::write_convergence_csv(&mut csv, &rows, table.zador.is_some())?;
    let csv = String::from_utf8(csv).map_err(anyhow::Error::from)?;

    match &args.output {
        Some(path) => {
            write(path, &csv)?;
            let mut outputs = vec![path.clone()];
            if let Some((lo, hi)) = interval {
                let diag: Vec<_> = pool
                    .install(|| {
                        use rayon::prelude::*;
                        table
                            .levels
                            .par_iter()
                            .filter_map(|l| l.result.as_ref().ok())
                            .map(|(_, q)| asymptotics::diagnostics(&model, q, order, lo, hi, cfg))
                            .collect::<gersho::Result<Vec<_>>>()
                    })
                    .map_err(|e| Failure::Construction(e.into()))?;
                if diag.iter().any(|d| d.against_scaled) {
                    eprintln!("warning: g4_deviation is measured against n^r D because C0 is infinite");
                }
                let mut buf = Vec::new();
                gio::write_diagnostics_csv(&mut buf, &diag)?;
                let diag_path = sibling(path, "diagnostics.csv");
                write(&diag_path, &String::from_utf8(buf).map_err(anyhow::Error::from)?)?;
                outputs.push(diag_path);
            }
            let seconds = table.levels.iter().map(|l| l.elapsed.as_secs_f64()).collect();
            let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
            write_manifest(&sibling(path, "manifest.json"), ctx, &args.dist, args.r, levels, &refs, seconds)?;
        }
        None => print!("{csv}"),
    }
    if failed {
        return Err(Failure::Construction(anyhow!("some levels failed")));
    }
    Ok(())
}

fn run() -> Result<(), Failure> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { Ok(()) } else { Err(Failure::BadArguments) };
        }
    };
    let ctx = load_config()?;
    match cli.command {
        Command::Build(a) => cmd_build(a, &ctx),
        Command::Verify(a) => cmd_verify(a, &ctx),
        Command::Convergence(a) => cmd_convergence(a, &ctx),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::BadArguments) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Construction(e)) => {
            eprintln!("construction failed: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.into())
    }
}
