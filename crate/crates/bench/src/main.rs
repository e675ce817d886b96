use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpmcts::aggregation::StrategyKind;
use rpmcts::environments::EnvName;
use rpmcts_bench::config::{Preset, StrategyOverrides};
use rpmcts_bench::grid::{read_rows, run_grid, time_equalized_compare, ExperimentGrid, TimeEqualizedSetup};
use rpmcts_bench::metrics::{pooled_se, rank_summaries, summarize, Report};
use rpmcts_bench::plot::emit_plots;
use rpmcts_bench::{BenchError, Result};

const ALL_ENVS: [EnvName; 5] = [
    EnvName::MountainCar,
    EnvName::Pendulum,
    EnvName::RandomTeleporter,
    EnvName::WideCorridor,
    EnvName::NarrowCorridor,
];

#[derive(Parser)]
#[command(name = "rpmcts", version, about = "Root-parallel MCTS aggregation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an environment x strategy x budget x seed grid and write CSV.
    Run(RunArgs),
    /// Summarize a results file and rank strategies by mean reciprocal rank.
    Rank(RankArgs),
    /// Draw one SVG per environment from a results file.
    Plot(PlotArgs),
    /// GPR2P against Similarity Merge given extra trials worth GPR2P's inference time.
    TimeCompare(TimeCompareArgs),
}

#[derive(Args)]
struct Common {
    /// Number of worker trees (default: the preset's).
    #[arg(long)]
    workers: Option<usize>,
    /// Trials per worker, comma separated (default: the preset's schedule).
    #[arg(long, value_delimiter = ',')]
    trials: Option<Vec<usize>>,
    /// Number of seeds, run as 0..N (default: the preset's).
    #[arg(long)]
    seeds: Option<u64>,
    /// Preset directory or file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct OverrideArgs {
    /// Similarity Vote / Merge kernel width.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long = "sigma-f2")]
    sigma_f2: Option<f64>,
    #[arg(long)]
    length_scale: Option<f64>,
    #[arg(long = "sigma-n2")]
    sigma_n2: Option<f64>,
    /// GPR2P visit threshold.
    #[arg(long)]
    tau: Option<u64>,
    /// GPR2P candidate count.
    #[arg(long)]
    candidates: Option<usize>,
}

impl From<&OverrideArgs> for StrategyOverrides {
    fn from(a: &OverrideArgs) -> Self {
        Self {
            phi: a.phi,
            signal_variance: a.sigma_f2,
            length_scale: a.length_scale,
            noise_variance: a.sigma_n2,
            tau: a.tau,
            candidates: a.candidates,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Environments, comma separated (default: all five).
    #[arg(long, value_delimiter = ',')]
    env: Vec<String>,
    /// Strategies, comma separated (default: all six).
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    /// Results CSV.
    results: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path.
    #[arg(long, default_value = "ranking.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    results: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

#[derive(Args)]
struct TimeCompareArgs {
    #[arg(long, default_value = "narrow_corridor")]
    env: String,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "time_compare.csv")]
    out: PathBuf,
}

fn seeds_for(common: &Common, envs: &[String]) -> Result<Vec<u64>> {
    let count = match common.seeds {
        Some(n) => n,
        None => Preset::resolve(&envs[0], common.config.as_deref())?.seeds as u64,
    };
    Ok((0..count).collect())
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategyKind>> {
    if names.is_empty() {
        return Ok(StrategyKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| n.parse().map_err(|e: rpmcts::Error| BenchError::Config(e.to_string())))
        .collect()
}

fn step_limits(rows: &[rpmcts_bench::grid::CsvRow], config: Option<&Path>) -> Result<BTreeMap<String, usize>> {
    let mut limits = BTreeMap::new();
    for row in rows {
        if !limits.contains_key(&row.env) {
            let preset = Preset::resolve(&row.env, config)?;
            limits.insert(row.env.clone(), preset.max_episode_steps);
        }
    }
    Ok(limits)
}

fn run(args: RunArgs) -> Result<()> {
    let envs = if args.env.is_empty() { ALL_ENVS.iter().map(|e| e.as_str().to_string()).collect() } else { args.env };
    let grid = ExperimentGrid {
        strategies: parse_strategies(&args.strategy)?,
        trial_budgets: args.common.trials.clone(),
        seeds: seeds_for(&args.common, &envs)?,
        workers: args.common.workers,
        master_seed: args.common.master_seed,
        overrides: (&args.common.overrides).into(),
        config: args.common.config.clone(),
        progress: true,
        envs,
    };
    let records = run_grid(&grid, &args.out)?;
    eprintln!("wrote {} episodes to {}", records.len(), args.out.display());
    Ok(())
}

fn rank(args: RankArgs) -> Result<()> {
    let rows = read_rows(&args.results)?;
    let cells = summarize(&rows, &step_limits(&rows, args.config.as_deref())?)?;
    let ranking = rank_summaries(&cells)?;
    let mut text = format!(
        "{:<18} {:<17} {:>6} {:>8} {:>7} {:>8} {:>11}\n",
        "env", "strategy", "budget", "steps", "se", "success", "infer(s)"
    );
    for c in &cells {
        let _ = writeln!(
            text,
            "{:<18} {:<17} {:>6} {:>8.2} {:>7.2} {:>8.3} {:>11.5}",
            c.env, c.strategy, c.trial_budget, c.steps.mean, c.steps.std_err, c.success_rate, c.mean_inference_seconds
        );
    }
    let _ = write!(text, "\n{:<17}", "MRR");
    for task in ranking.per_task.keys() {
        let _ = write!(text, " {task:>18}");
    }
    let _ = writeln!(text, " {:>8}", "overall");
    for s in &ranking.strategies {
        let _ = write!(text, "{s:<17}");
        for per in ranking.per_task.values() {
            let _ = write!(text, " {:>18.4}", per[s]);
        }
        let _ = writeln!(text, " {:>8.4}", ranking.overall[s]);
    }
    emit(&text);
    let report = Report { cells, ranking };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn plot(args: PlotArgs) -> Result<()> {
    let rows = read_rows(&args.results)?;
    let cells = summarize(&rows, &step_limits(&rows, args.config.as_deref())?)?;
    let out = emit_plots(&cells, &step_limits(&rows, args.config.as_deref())?, &args.out)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn time_compare(args: TimeCompareArgs) -> Result<()> {
    let preset = Preset::resolve(&args.env, args.common.config.as_deref())?;
    let setup = TimeEqualizedSetup {
        trial_budgets: args.common.trials.clone().unwrap_or_else(|| vec![preset.trial_budgets[0]]),
        seeds: seeds_for(&args.common, std::slice::from_ref(&args.env))?,
        workers: args.common.workers,
        master_seed: args.common.master_seed,
        overrides: (&args.common.overrides).into(),
        config: args.common.config.clone(),
        progress: true,
        env: args.env,
    };
    let cells = time_equalized_compare(&setup, &args.out)?;
    for c in &cells {
        let mean = |rs: &[rpmcts_bench::EpisodeRecord]| {
            rpmcts_bench::metrics::mean_and_se(&rs.iter().map(|r| r.steps as f64).collect::<Vec<_>>()).unwrap_or((0.0, 0.0))
        };
        let (g, gse) = mean(&c.gpr2p);
        let (m, mse) = mean(&c.merge);
        emit(&format!(
            "budget {}: delta = {} ({:.0} trials/s, {:.6} s/step) gpr2p steps {g:.2} vs merge {m:.2} (pooled se {:.2})\n",
            c.trial_budget,
            c.delta_trials,
            c.trials_per_second,
            c.step_inference_seconds,
            pooled_se(gse, mse)
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Rank(a) => rank(a),
        Command::Plot(a) => plot(a),
        Command::TimeCompare(a) => time_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
