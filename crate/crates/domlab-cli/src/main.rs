//! Command line for the domlab laboratory: generate game files, solve them
//! by iterated elimination, run self-play learning batches, and turn the
//! results into bound tables, equilibrium files, and SVG figures.
//!
//! Exit codes: 0 on success, 1 on runtime or domain errors (bad files,
//! infeasible parameters, failed verification), 2 on usage errors.

mod plot;

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use domlab::bounds::{level_schedule, t1_bound, T1Params};
use domlab::equilibrium::{construct_dir_epsilon_ce, epsilon_ce_gap, welfare, JointDistribution};
use domlab::simulate::{
    run_selfplay, write_trace_csv, CheckpointSchedule, FeedbackMode, RunConfig, Trace,
};
use domlab::{iesds, lemons_analytic_path, AlgoSpec, EliminationPath, Game, LemonsParams};
use rand::SeedableRng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "domlab", version, about = "Dominance-elimination laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a game file.
    Gen(GenArgs),
    /// Run iterated elimination on a game file and report the path.
    Solve(SolveArgs),
    /// Run a batch of self-play experiments and write trace CSVs.
    Simulate(SimulateArgs),
    /// Aggregate trace CSVs into an SVG convergence chart.
    Plot(PlotArgs),
    /// Evaluate the elimination-horizon calculators.
    Bounds(BoundsArgs),
    /// Build the low-welfare approximate correlated equilibrium of a ladder game.
    ConstructCe(ConstructCeArgs),
    /// Check a joint distribution file against a game at a given tolerance.
    VerifyCe(VerifyCeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GameType {
    Dir,
    Lemons,
    Random,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Game family to generate.
    #[arg(long = "type", value_enum)]
    kind: GameType,
    /// Actions per player (dir).
    #[arg(long = "K")]
    num_actions: Option<usize>,
    /// Threat cost (dir).
    #[arg(long = "c")]
    threat_cost: Option<f64>,
    /// Seller count (lemons).
    #[arg(long)]
    sellers: Option<usize>,
    /// Listing cost (lemons).
    #[arg(long)]
    c1: Option<f64>,
    /// Buyer valuation multiplier (lemons).
    #[arg(long)]
    c2: Option<f64>,
    /// Seller qualities, ascending (lemons); defaults to N/2 + i.
    #[arg(long, value_delimiter = ',')]
    qualities: Option<Vec<f64>>,
    /// Buyer price grid, ascending (lemons); defaults to the integers
    /// between ceil(N/2) and ceil(3N/2).
    #[arg(long, value_delimiter = ',')]
    prices: Option<Vec<f64>>,
    /// Quality observation noise standard deviation (lemons).
    #[arg(long, default_value_t = 0.0)]
    quality_noise_std: f64,
    /// Action counts per player, e.g. 3,4 (random).
    #[arg(long, value_delimiter = ',')]
    actions: Option<Vec<usize>>,
    /// RNG seed (random); DOMLAB_SEED overrides the default of 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Game file to solve.
    game: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeedbackArg {
    Bandit,
    #[value(alias = "exact-gradient")]
    Exact,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Game file to play.
    #[arg(long)]
    game: PathBuf,
    /// Algorithm spec, repeatable; one trace series per spec.
    #[arg(long = "algo", required = true, value_parser = parse_algo)]
    algos: Vec<AlgoSpec>,
    /// Rounds per run.
    #[arg(long = "T")]
    horizon: u64,
    /// Observation noise standard deviation, in normalized payoff units.
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    /// Number of seeds per algorithm; seeds count up from the base seed.
    #[arg(long, default_value_t = 1)]
    seeds: u32,
    /// Base seed; DOMLAB_SEED overrides the default of 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "bandit")]
    feedback: FeedbackArg,
    /// Checkpoint schedule: `log` or `every:<step>`.
    #[arg(long, default_value = "log")]
    checkpoints: String,
    /// Also record per-action distributions at every checkpoint.
    #[arg(long)]
    dump_dists: bool,
    /// Worker threads for the batch.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for trace CSVs and the batch manifest.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct PlotArgs {
    /// Trace CSV files (at least one).
    traces: Vec<PathBuf>,
    /// Output SVG file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BoundsArgs {
    /// Largest action count among agents.
    #[arg(long = "K")]
    num_actions: usize,
    /// Number of agents.
    #[arg(long = "N")]
    num_agents: usize,
    /// Observation noise standard deviation.
    #[arg(long)]
    sigma: f64,
    /// History-discount exponent.
    #[arg(long)]
    beta: f64,
    /// Exploration-floor exponent.
    #[arg(long)]
    b: f64,
    /// Smallest dominance margin.
    #[arg(long = "Delta")]
    gap: f64,
    /// Essential-elimination tolerance.
    #[arg(long)]
    eps: f64,
    /// Failure probability.
    #[arg(long)]
    delta: f64,
    /// Rows in the per-level horizon table; defaults to 2K-2.
    #[arg(long)]
    levels: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ConstructCeArgs {
    #[arg(long = "K")]
    num_actions: usize,
    #[arg(long = "c")]
    threat_cost: f64,
    /// Deviation-gap target.
    #[arg(long)]
    eps: f64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyCeArgs {
    /// Game file.
    #[arg(long)]
    game: PathBuf,
    /// Joint distribution file (1-based profiles).
    #[arg(long)]
    dist: PathBuf,
    /// Largest acceptable deviation gap.
    #[arg(long)]
    eps: f64,
}

/// A command-line mistake that should exit with code 2 rather than 1.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::ConstructCe(args) => cmd_construct_ce(args),
        Command::VerifyCe(args) => cmd_verify_ce(args),
    }
}

fn parse_algo(raw: &str) -> Result<AlgoSpec, String> {
    raw.parse().map_err(|err: domlab::Error| err.to_string())
}

/// `--seed` wins, then DOMLAB_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("DOMLAB_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| usage(format!("DOMLAB_SEED must be an unsigned integer, got `{text}`"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => Err(usage("DOMLAB_SEED is not valid unicode")),
    }
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_game(path: &Path) -> Result<Game> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing game file {}", path.display()))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let game = match args.kind {
        GameType::Dir => {
            let k = args
                .num_actions
                .ok_or_else(|| usage("--type dir requires --K"))?;
            let c = args
                .threat_cost
                .ok_or_else(|| usage("--type dir requires --c"))?;
            Game::dir(k, c)?
        }
        GameType::Lemons => {
            let sellers = args
                .sellers
                .ok_or_else(|| usage("--type lemons requires --sellers"))?;
            let listing_cost = args.c1.ok_or_else(|| usage("--type lemons requires --c1"))?;
            let buyer_multiplier = args.c2.ok_or_else(|| usage("--type lemons requires --c2"))?;
            let half = sellers as f64 / 2.0;
            let qualities = args
                .qualities
                .unwrap_or_else(|| (1..=sellers).map(|i| half + i as f64).collect());
            let price_set = args.prices.unwrap_or_else(|| {
                (half.ceil() as i64..=(3.0 * half).ceil() as i64)
                    .map(|p| p as f64)
                    .collect()
            });
            Game::lemons(LemonsParams {
                num_sellers: sellers,
                qualities,
                price_set,
                listing_cost,
                buyer_multiplier,
                quality_noise_std: args.quality_noise_std,
            })?
        }
        GameType::Random => {
            let actions = args
                .actions
                .filter(|list| !list.is_empty())
                .ok_or_else(|| usage("--type random requires --actions"))?;
            let seed = resolve_seed(args.seed)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Game::random(&actions, &mut rng)?
        }
    };
    emit_json(&serde_json::to_value(&game)?, args.output.as_deref())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let path = iesds(&game)?;
    emit_json(&path_report(&path), args.output.as_deref())
}

/// JSON view of an elimination path. Players and actions are 1-based in
/// every pair and profile; arrays indexed by position stay 0-based.
fn path_report(path: &EliminationPath) -> serde_json::Value {
    let pair = |&(player, action): &(usize, usize)| json!([player + 1, action + 1]);
    let rounds: Vec<_> = path
        .rounds
        .iter()
        .enumerate()
        .map(|(i, round)| {
            let certificates: Vec<_> = round
                .certificates
                .iter()
                .map(|cert| {
                    json!({
                        "player": cert.player + 1,
                        "dominated": cert.dominated + 1,
                        "margin": cert.margin,
                        "dominator": cert.dominator.probs(),
                    })
                })
                .collect();
            json!({
                "iteration": i + 1,
                "removed": round.removed.iter().map(pair).collect::<Vec<_>>(),
                "certificates": certificates,
            })
        })
        .collect();
    json!({
        "L0": path.elimination_length(),
        "Delta": path.gap,
        "dominance_solvable": path.is_dominance_solvable(),
        "survivor_profile": path
            .survivor_profile()
            .map(|p| p.iter().map(|a| a + 1).collect::<Vec<_>>()),
        "survivors": path
            .survivors
            .iter()
            .map(|s| s.iter().map(|a| a + 1).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "distances": path.distances,
        "cumulative_sets": path
            .cumulative_sets()
            .iter()
            .map(|set| set.iter().map(pair).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "rounds": rounds,
    })
}

/// Metrics need the elimination path; the market game gets the closed-form
/// one because exact elimination over its joint action space is hopeless at
/// interesting seller counts. Quality noise perturbs what sellers observe,
/// not which actions are dominated, so the path comes from the noise-free
/// view of the same market.
fn elimination_path_for(game: &Game) -> Result<EliminationPath> {
    match game.as_lemons() {
        Some(params) => {
            let mut quiet = params.clone();
            quiet.quality_noise_std = 0.0;
            Ok(lemons_analytic_path(&quiet)?)
        }
        None => Ok(iesds(game)?),
    }
}

fn parse_checkpoints(spec: &str) -> Result<CheckpointSchedule> {
    if spec == "log" {
        return Ok(CheckpointSchedule::LogSpaced);
    }
    if let Some(step) = spec.strip_prefix("every:") {
        let step: u64 = step
            .parse()
            .map_err(|_| usage(format!("bad checkpoint step `{step}`")))?;
        if step == 0 {
            return Err(usage("checkpoint step must be positive"));
        }
        return Ok(CheckpointSchedule::Every(step));
    }
    Err(usage(format!(
        "unknown checkpoint schedule `{spec}` (expected `log` or `every:<step>`)"
    )))
}

/// File stem for one run: the algo spec with everything outside
/// [A-Za-z0-9_-] replaced by dashes, then the seed.
fn run_file_name(algo: &AlgoSpec, seed: u64) -> String {
    let sanitized: String = algo
        .raw()
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' {
                ch
            } else {
                '-'
            }
        })
        .collect();
    format!("{sanitized}__seed{seed}.csv")
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    for (i, algo) in args.algos.iter().enumerate() {
        if args.algos[..i].iter().any(|seen| seen.raw() == algo.raw()) {
            return Err(usage(format!("duplicate --algo {}", algo.raw())));
        }
    }
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let schedule = parse_checkpoints(&args.checkpoints)?;
    let feedback = match args.feedback {
        FeedbackArg::Bandit => FeedbackMode::Bandit,
        FeedbackArg::Exact => FeedbackMode::ExactGradient,
    };
    let base_seed = resolve_seed(args.seed)?;
    let game = load_game(&args.game)?;
    let path = elimination_path_for(&game)?;

    let mut runs: Vec<(AlgoSpec, u64)> = Vec::new();
    for algo in &args.algos {
        for offset in 0..args.seeds {
            runs.push((algo.clone(), base_seed + u64::from(offset)));
        }
    }
    runs.sort_by(|a, b| a.0.raw().cmp(b.0.raw()).then(a.1.cmp(&b.1)));

    let configs: Vec<RunConfig> = runs
        .iter()
        .map(|(algo, seed)| RunConfig {
            algo: algo.clone(),
            horizon: args.horizon,
            seed: *seed,
            noise_std: args.noise_std,
            feedback,
            checkpoints: schedule.clone(),
            record_distributions: args.dump_dists,
        })
        .collect();
    let traces = run_batch(&game, &path, &configs, args.jobs)?;

    fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let mut manifest_runs = Vec::new();
    for ((algo, seed), trace) in runs.iter().zip(&traces) {
        let name = run_file_name(algo, *seed);
        let file = File::create(args.output.join(&name))
            .with_context(|| format!("creating {name}"))?;
        write_trace_csv(trace, args.dump_dists, file)?;
        manifest_runs.push(json!({ "algo": algo.raw(), "seed": seed, "file": name }));
    }
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "game": args.game.display().to_string(),
        "horizon": args.horizon,
        "noise_std": args.noise_std,
        "feedback": match feedback {
            FeedbackMode::Bandit => "bandit",
            FeedbackMode::ExactGradient => "exact-gradient",
        },
        "checkpoints": args.checkpoints,
        "dump_dists": args.dump_dists,
        "created_unix_secs": created,
        "runs": manifest_runs,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(args.output.join("manifest.json"), text)?;
    Ok(())
}

/// Runs every config, on `jobs` threads when asked. Results land in the
/// config order no matter how the workers are scheduled.
fn run_batch(
    game: &Game,
    path: &EliminationPath,
    configs: &[RunConfig],
    jobs: usize,
) -> Result<Vec<Trace>> {
    let workers = jobs.clamp(1, configs.len().max(1));
    if workers == 1 {
        return configs
            .iter()
            .map(|config| Ok(run_selfplay(game, path, config)?))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<domlab::Result<Trace>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(index) else {
                    break;
                };
                let outcome = run_selfplay(game, path, config);
                *slots[index].lock().expect("result slot") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            let outcome = slot
                .into_inner()
                .expect("result slot")
                .expect("every index visited");
            Ok(outcome?)
        })
        .collect()
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    if args.traces.is_empty() {
        return Err(usage("need at least one trace CSV"));
    }
    let series = plot::collect_series(&args.traces)?;
    let svg = plot::render_svg(&series);
    match args.output {
        Some(path) => {
            fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(svg.as_bytes())?,
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let params = T1Params {
        num_actions: args.num_actions,
        num_agents: args.num_agents,
        noise_std: args.sigma,
        beta: args.beta,
        b: args.b,
        gap: args.gap,
        eps: args.eps,
        delta: args.delta,
    };
    let first = t1_bound(&params)?;
    let levels = args
        .levels
        .unwrap_or_else(|| (2 * args.num_actions).saturating_sub(2))
        .max(1);
    let schedule = level_schedule(first, levels, args.gap, args.beta, args.delta)?;
    let table: Vec<_> = schedule
        .iter()
        .enumerate()
        .map(|(i, horizon)| json!({ "level": i + 1, "horizon": horizon }))
        .collect();
    emit_json(
        &json!({
            "T1": first,
            "table": table,
            "params": {
                "K": args.num_actions,
                "N": args.num_agents,
                "sigma": args.sigma,
                "beta": args.beta,
                "b": args.b,
                "Delta": args.gap,
                "eps": args.eps,
                "delta": args.delta,
            },
        }),
        args.output.as_deref(),
    )
}

fn cmd_construct_ce(args: ConstructCeArgs) -> Result<()> {
    let dist = construct_dir_epsilon_ce(args.num_actions, args.threat_cost, args.eps)?;
    emit_json(&serde_json::to_value(&dist)?, args.output.as_deref())
}

fn cmd_verify_ce(args: VerifyCeArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let text = fs::read_to_string(&args.dist)
        .with_context(|| format!("reading {}", args.dist.display()))?;
    let dist: JointDistribution = serde_json::from_str(&text)
        .with_context(|| format!("parsing distribution file {}", args.dist.display()))?;
    let gap = epsilon_ce_gap(&game, &dist)?;
    let value = welfare(&game, &dist)?;
    let pass = gap <= args.eps;
    emit_json(
        &json!({ "eps": args.eps, "gap": gap, "welfare": value, "pass": pass }),
        None,
    )?;
    if !pass {
        bail!("deviation gap {gap} exceeds eps {}", args.eps);
    }
    Ok(())
}
