use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hedge_nash::equilibrium::{EquilibriumCertificate, Method, DEFAULT_ENUMERATION_MAX};
use hedge_nash::extraction::rank;
use hedge_nash::game::{game_to_json, game_to_text};
use hedge_nash::hedge::{diagnose_trajectory_bounds, load_trace, TraceFormat, TraceWriter};
use hedge_nash::{
    decompose, diagnose_entropy_bounds, diagnose_trajectory_identities, enumerate_symmetric_equilibria,
    extract_certificate, generate_game, is_well_supported, run_trajectory, validate_schedule, verify_support,
    Criterion, GameKind, MixedStrategy, ScheduleValidity, SymmetricGame, Tolerances, TracePoint, TrajectoryRunner,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

mod config;

use config::{load_configs, load_normalized_game, load_raw_game, parse_schedule, parse_vector, parse_x0, RunConfig};

const SIMPLEX_INPUT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "hedge-nash", version, about = "Symmetric Nash equilibria via Hedge dynamics and LP certificates")]
struct Cli {
    /// Certificate tolerance (overrides HEDGE_NASH_TOL).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Hedge and write a trace plus a JSON summary.
    Run(RunArgs),
    /// Extract an equilibrium certificate from a trace file.
    Extract(ExtractArgs),
    /// Check a candidate strategy or support.
    Verify(VerifyArgs),
    /// List equilibria by support enumeration (n <= 6).
    Oracle(GameArg),
    /// Print a generated game.
    Generate(GenerateArgs),
    /// Split a game into symmetric and antisymmetric parts.
    Decompose(GameArg),
    /// Check the entropy inequalities and trajectory identities numerically.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct GameArg {
    /// Game file (JSON or plain text) or gen:<kind>:<n>[:<seed>].
    #[arg(long)]
    game: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "config")]
    game: Option<String>,
    #[arg(long, default_value = "power:0.6666666666666666")]
    schedule: String,
    #[arg(long, default_value = "uniform")]
    x0: String,
    #[arg(long, required_unless_present = "config")]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    emit_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: TraceFormat,
    /// Allow schedules that fail validation; the summary flags the run.
    #[arg(long)]
    force: bool,
    /// JSON file holding one run config or a list of them.
    #[arg(long, conflicts_with_all = ["game", "steps", "out"])]
    config: Option<PathBuf>,
    /// Worker threads for a config list.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    trace: PathBuf,
    /// Comma-separated criteria tried in order.
    #[arg(long, value_delimiter = ',', default_value = "average_payoff,average_mass,iterate_mass")]
    criteria: Vec<Criterion>,
    /// Trace row to use (default: last).
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    game: String,
    /// Mixed strategy, e.g. 0.5,0.5.
    #[arg(long, conflicts_with = "support", required_unless_present = "support")]
    strategy: Option<String>,
    /// 0-based support indices, e.g. 0,1.
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    kind: GameKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// json or text.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    game: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also check identities along a uniform-start trajectory of this length.
    #[arg(long)]
    trajectory_steps: Option<usize>,
}

enum Outcome {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn tolerances(cli_tol: Option<f64>) -> Result<Tolerances> {
    let mut tol = Tolerances::from_env()?;
    if let Some(t) = cli_tol {
        if !(t >= 0.0 && t.is_finite()) {
            bail!("--tol must be a nonnegative number");
        }
        tol.certificate = t;
    }
    Ok(tol)
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let tol = tolerances(cli.tol)?;
    match cli.command {
        Command::Run(args) => cmd_run(args, cli.tol),
        Command::Extract(args) => cmd_extract(args, &tol),
        Command::Verify(args) => cmd_verify(args, &tol),
        Command::Oracle(args) => cmd_oracle(&args.game),
        Command::Generate(args) => cmd_generate(args),
        Command::Decompose(args) => cmd_decompose(&args.game),
        Command::Diagnose(args) => cmd_diagnose(args),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummaryOut {
    config: RunConfig,
    trace: PathBuf,
    steps: usize,
    schedule_validity: ScheduleValidity,
    /// The schedule failed validation and ran only because of `--force`.
    outside_hypotheses: bool,
    final_weight_sum: f64,
    final_gap_avg: f64,
    final_gap_iter: f64,
    final_gap_avg_game_units: f64,
    final_average: Vec<f64>,
    final_iterate: Vec<f64>,
    wall_time_secs: f64,
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn execute_run(config: &RunConfig) -> Result<RunSummaryOut> {
    let started = Instant::now();
    let game = load_normalized_game(&config.game)?;
    let schedule = parse_schedule(&config.schedule)?;
    let x0 = parse_x0(&config.x0, game.n(), config.seed)?;
    let file = File::create(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let mut writer = TraceWriter::new(BufWriter::new(file), config.format, game.n())?;
    let mut write_err = None;
    let summary = TrajectoryRunner::new(&game, x0, schedule, config.steps)
        .emit_every(config.emit_every)
        .force(config.force)
        .run_with(|s| {
            if write_err.is_none() {
                write_err = writer.write_snapshot(s).err();
            }
        })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writer.finish()?.flush()?;
    let last = summary.final_snapshot;
    let out = RunSummaryOut {
        config: config.clone(),
        trace: config.out.clone(),
        steps: summary.steps,
        outside_hypotheses: summary.forced,
        schedule_validity: summary.validity,
        final_weight_sum: last.weight_sum,
        final_gap_avg: last.gap_avg,
        final_gap_iter: last.gap_iter,
        final_gap_avg_game_units: last.gap_avg / game.units().scale,
        final_average: last.average,
        final_iterate: last.iterate,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let path = summary_path(&config.out);
    let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, &out)?;
    writeln!(f)?;
    Ok(out)
}

fn cmd_run(args: RunArgs, tol: Option<f64>) -> Result<Outcome> {
    let configs = match &args.config {
        Some(path) => load_configs(path)?,
        None => vec![RunConfig {
            game: args.game.expect("required by clap"),
            schedule: args.schedule,
            x0: args.x0,
            steps: args.steps.expect("required by clap"),
            emit_every: args.emit_every,
            seed: args.seed,
            out: args.out.expect("required by clap"),
            format: args.format,
            tol,
            force: args.force,
        }],
    };
    if configs.is_empty() {
        bail!("config list is empty");
    }
    for c in &configs {
        // Reject invalid schedules before any worker starts writing files.
        let validity = validate_schedule(&parse_schedule(&c.schedule)?);
        if let ScheduleValidity::Invalid(reason) = validity {
            if !c.force {
                bail!("invalid schedule `{}`: {reason} (use --force to run anyway)", c.schedule);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<Result<RunSummaryOut>> = pool.install(|| configs.par_iter().map(execute_run).collect());
    let mut summaries = Vec::new();
    for (c, r) in configs.iter().zip(results) {
        summaries.push(r.with_context(|| format!("run writing {}", c.out.display()))?);
    }
    if summaries.len() == 1 {
        print_json(&summaries[0])?;
    } else {
        print_json(&summaries)?;
    }
    Ok(Outcome::Ok)
}

fn cmd_extract(args: ExtractArgs, tol: &Tolerances) -> Result<Outcome> {
    let game = load_normalized_game(&args.game)?;
    let rows = load_trace(&args.trace).with_context(|| format!("reading trace {}", args.trace.display()))?;
    let Some(first) = rows.first() else {
        bail!("trace {} has no rows", args.trace.display());
    };
    if first.iterate.len() != game.n() {
        bail!("trace has {} strategies but the game has {}", first.iterate.len(), game.n());
    }
    let uniform_start = first.step == 0 && MixedStrategy::new(first.iterate.clone()).is_ok_and(|x| x.is_uniform());
    let row = match args.step {
        Some(k) => rows.iter().find(|r| r.step == k).with_context(|| format!("trace has no row for K = {k}"))?,
        None => rows.last().expect("non-empty"),
    };
    let point = TracePoint::from_row(row, uniform_start);
    let outcome = extract_certificate(&game, &point, &args.criteria, tol)?;
    let rankings: Vec<_> = args.criteria.iter().filter_map(|&c| rank(&game, &point, c).ok()).collect();
    let found = outcome.certificate.is_some();
    print_json(&json!({
        "step": row.step,
        "uniform_start": uniform_start,
        "certificate": outcome.certificate,
        "attempts": outcome.attempts,
        "rankings": rankings,
    }))?;
    Ok(if found { Outcome::Ok } else { Outcome::Failed })
}

fn cmd_verify(args: VerifyArgs, tol: &Tolerances) -> Result<Outcome> {
    let game = load_normalized_game(&args.game)?;
    if let Some(support) = args.support {
        let cert = verify_support(&game, &support, tol)?;
        let ok = cert.is_some();
        print_json(&json!({ "support": support, "tolerance": tol.certificate, "certificate": cert, "passed": ok }))?;
        return Ok(if ok { Outcome::Ok } else { Outcome::Failed });
    }
    let probs = parse_vector(args.strategy.as_deref().expect("required by clap"))?;
    let x = MixedStrategy::within(probs, SIMPLEX_INPUT_TOL).context("strategy is not on the simplex")?;
    if x.len() != game.n() {
        bail!("strategy has {} entries but the game has {} strategies", x.len(), game.n());
    }
    let cert = EquilibriumCertificate::new(&game, x.clone(), Method::Supplied, tol.support)?;
    let cx = game.apply(x.probs());
    let spread = cx.iter().copied().fold(f64::NEG_INFINITY, f64::max) - cx.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = cert.gap <= tol.certificate;
    print_json(&json!({
        "strategy": x,
        "support": cert.support,
        "gap": cert.gap,
        "game_units_gap": cert.game_units_gap,
        "tolerance": tol.certificate,
        "well_supported": is_well_supported(&game, &x, tol.certificate)?,
        "well_supported_eps": cert.well_supported_eps,
        "equalizer_spread": spread,
        "passed": passed,
    }))?;
    Ok(if passed { Outcome::Ok } else { Outcome::Failed })
}

fn cmd_oracle(spec: &str) -> Result<Outcome> {
    let game = load_normalized_game(spec)?;
    let eq = enumerate_symmetric_equilibria(&game, DEFAULT_ENUMERATION_MAX)?;
    print_json(&eq)?;
    Ok(Outcome::Ok)
}

fn cmd_generate(args: GenerateArgs) -> Result<Outcome> {
    let game = generate_game(args.kind, args.n, args.seed)?;
    let text = match args.format.as_str() {
        "json" => game_to_json(&game) + "\n",
        "text" => game_to_text(&game),
        other => bail!("--format must be json or text, got `{other}`"),
    };
    match args.out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

fn cmd_decompose(spec: &str) -> Result<Outcome> {
    let game = load_raw_game(spec)?;
    let (sym, anti) = decompose(&game);
    print_json(&json!({ "symmetric": sym.rows(), "antisymmetric": anti.rows() }))?;
    Ok(Outcome::Ok)
}

fn trajectory_checks(game: &SymmetricGame, steps: usize) -> Result<serde_json::Value> {
    let n = game.n();
    let schedule = hedge_nash::LearningRateSchedule::default();
    let trace = run_trajectory(game, &MixedStrategy::uniform(n), &schedule, steps, 1)?;
    let report = diagnose_trajectory_identities(game, &trace).or_else(|_| diagnose_trajectory_bounds(game, &trace))?;
    Ok(serde_json::to_value(report)?)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<Outcome> {
    let game = load_normalized_game(&args.game)?;
    let entropy = diagnose_entropy_bounds(&game, args.samples, args.seed)?;
    let mut passed = entropy.passed;
    let mut body = json!({ "n": game.n(), "samples": args.samples, "seed": args.seed, "entropy_bounds": entropy });
    if let Some(steps) = args.trajectory_steps {
        let report = trajectory_checks(&game, steps)?;
        passed &= report["passed"].as_bool().unwrap_or(false);
        body["trajectory_identities"] = report;
    }
    body["passed"] = json!(passed);
    print_json(&body)?;
    Ok(if passed { Outcome::Ok } else { Outcome::Failed })
}
