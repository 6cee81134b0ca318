use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rltc::config::{load_file, resolve, FileConfig, Overrides, Settings};
use rltc::engine::{FailureModel, Roster};
use rltc::harness::{derive_seeds, run_sweep, SweepAxes, SweepCell};
use rltc::oracle::{expected_success_curve, TrustSchedule};
use rltc::policy::PolicyKind;
use rltc::report::{rows_from_cells, write_csv, write_json, write_train_log};
use rltc::topology::Topology;

#[derive(Parser)]
#[command(
    name = "rltc",
    version,
    about = "Consensus-with-trust simulator: seeded runs, sweeps and exact oracle curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration across its seeds and write result rows
    Run(RunArgs),
    /// Run the Cartesian product of the config's [axes] across seeds
    Sweep(RunArgs),
    /// Print the exact expected success curve for a small instance
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice dimension d (N = d*d agents)
    #[arg(long)]
    grid_dim: Option<usize>,
    /// Fraction of reliable agents, in (0, 1]
    #[arg(long)]
    frac_reliable: Option<f64>,
    /// Probability that a reliable agent's initial value is 0
    #[arg(long)]
    noise: Option<f64>,
    /// always-zero | random-flip
    #[arg(long)]
    failure_model: Option<String>,
    /// rltc | trust-all | oracle
    #[arg(long)]
    policy: Option<String>,
    /// Episode length T
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    train_episodes: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Q-learning step size
    #[arg(long)]
    alpha: Option<f64>,
    /// Discount factor, in [0, 1)
    #[arg(long)]
    gamma: Option<f64>,
    /// Initial exploration probability
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Multiplicative exploration decay factor, in (0, 1]
    #[arg(long)]
    decay_r: Option<f64>,
    /// global-timestep | episode
    #[arg(long)]
    decay_granularity: Option<String>,
    /// Comma-separated seed list
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Derive seeds from one master seed (SplitMix64 stream)
    #[arg(long, requires = "seed_count", conflicts_with = "seeds")]
    master_seed: Option<u64>,
    /// How many seeds to derive from --master-seed
    #[arg(long, requires = "master_seed")]
    seed_count: Option<usize>,
    /// Parallel repetitions (also via RLTC_WORKERS)
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON mirror of the rows
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write per-episode training rewards (config_id,seed,episode,avg_reward)
    #[arg(long)]
    train_log: Option<PathBuf>,
    /// Write learned Q-table snapshots, one file per seed
    #[arg(long)]
    qtable_out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Built-in instance: `path2` is the 2-node path with node 2 unreliable
    #[arg(long, conflicts_with_all = ["grid_dim", "frac_reliable", "seed"])]
    fixture: Option<String>,
    /// Lattice dimension (roster drawn from --seed like a repetition)
    #[arg(long)]
    grid_dim: Option<usize>,
    /// Fraction of reliable agents, in (0, 1] [default: 0.75]
    #[arg(long)]
    frac_reliable: Option<f64>,
    /// Seed for the roster placement [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Probability that a reliable agent's initial value is 0 [default: 0]
    #[arg(long)]
    noise: Option<f64>,
    /// always-zero | random-flip [default: always-zero]
    #[arg(long)]
    failure_model: Option<String>,
    /// Fixed-trust schedule to evaluate: trust-all | oracle [default: trust-all]
    #[arg(long)]
    policy: Option<String>,
    /// Curve length T [default: 30]
    #[arg(long)]
    horizon: Option<usize>,
    /// Optional CSV output (t,expected_success_rate)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_run(args, true),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn parse_flag<T>(flag: &str, token: Option<&str>) -> anyhow::Result<Option<T>>
where
    T: std::str::FromStr<Err = String>,
{
    token
        .map(|t| t.parse().map_err(|e| anyhow::anyhow!("--{flag}: {e}")))
        .transpose()
}

fn settings_from(args: &RunArgs) -> anyhow::Result<Settings> {
    let file = match &args.config {
        Some(path) => load_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => FileConfig::default(),
    };
    let seeds = match (&args.seeds, args.master_seed) {
        (Some(list), _) => Some(list.clone()),
        (None, Some(master)) => Some(derive_seeds(master, args.seed_count.unwrap())),
        (None, None) => None,
    };
    let over = Overrides {
        grid_dim: args.grid_dim,
        frac_reliable: args.frac_reliable,
        noise: args.noise,
        failure_model: parse_flag("failure-model", args.failure_model.as_deref())?,
        policy: parse_flag("policy", args.policy.as_deref())?,
        horizon: args.horizon,
        train_episodes: args.train_episodes,
        eval_episodes: args.eval_episodes,
        alpha: args.alpha,
        gamma: args.gamma,
        epsilon0: args.epsilon0,
        decay_r: args.decay_r,
        decay_granularity: parse_flag("decay-granularity", args.decay_granularity.as_deref())?,
        seeds,
        workers: args.workers,
        out: args.out.clone(),
    };
    Ok(resolve(file, over)?)
}

fn cmd_run(args: RunArgs, sweep: bool) -> anyhow::Result<()> {
    let settings = settings_from(&args)?;
    // `run` executes the base config alone; `sweep` expands the [axes]
    let axes = if sweep {
        settings.axes.clone()
    } else {
        SweepAxes::default()
    };
    let record_training = args.train_log.is_some();
    let cells = run_sweep(
        &settings.experiment,
        &axes,
        settings.workers,
        record_training,
    );
    report_failures(&cells)?;
    let rows = rows_from_cells(&cells)?;
    write_csv(&settings.out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), settings.out.display());

    if let Some(path) = &args.json {
        write_json(path, &rows)?;
        println!("wrote JSON mirror to {}", path.display());
    }
    if let Some(path) = &args.train_log {
        write_train_log(path, &cells)?;
        println!("wrote training log to {}", path.display());
    }
    if let Some(path) = &args.qtable_out {
        save_qtables(path, &cells)?;
    }
    Ok(())
}

fn report_failures(cells: &[SweepCell]) -> anyhow::Result<()> {
    let mut failed = 0;
    for (config, seed, result) in cells {
        if let Err(e) = result {
            eprintln!("error: {} seed {seed}: {e}", config.config_id());
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} repetition(s) failed");
    }
    Ok(())
}

fn save_qtables(path: &Path, cells: &[SweepCell]) -> anyhow::Result<()> {
    let mut wrote = 0;
    for (_, seed, result) in cells {
        let Ok(result) = result else { continue };
        let Some(tables) = &result.qtables else {
            continue;
        };
        let seeded = path_with_seed(path, *seed);
        tables.save(&seeded)?;
        println!("wrote Q-tables to {}", seeded.display());
        wrote += 1;
    }
    if wrote == 0 {
        eprintln!("note: no Q-tables to save (baseline policies have none)");
    }
    Ok(())
}

fn path_with_seed(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("qtables");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-seed{seed}.{ext}"),
        None => format!("{stem}-seed{seed}"),
    };
    path.with_file_name(name)
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<()> {
    let noise = args.noise.unwrap_or(0.0);
    anyhow::ensure!((0.0..=1.0).contains(&noise), "--noise: must be in [0, 1]");
    let failure: FailureModel = parse_flag("failure-model", args.failure_model.as_deref())?
        .unwrap_or(FailureModel::AlwaysZero);
    let policy: PolicyKind =
        parse_flag("policy", args.policy.as_deref())?.unwrap_or(PolicyKind::TrustAll);
    if policy == PolicyKind::Rltc {
        bail!("--policy: the oracle command evaluates fixed trust schedules (trust-all | oracle)");
    }
    let horizon = args.horizon.unwrap_or(30);

    let (topology, roster) = match args.fixture.as_deref() {
        Some("path2") => {
            let topology = Topology::custom(&[(1, 2)], 2)?;
            let roster = Roster::from_reliable_flags(vec![true, false])?;
            (topology, roster)
        }
        Some(other) => bail!("--fixture: unknown fixture `{other}` (available: path2)"),
        None => {
            let d = args
                .grid_dim
                .context("either --fixture or --grid-dim is required")?;
            let topology = Topology::grid(d)?;
            let f = args.frac_reliable.unwrap_or(0.75);
            anyhow::ensure!(f > 0.0 && f <= 1.0, "--frac-reliable: must be in (0, 1]");
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed.unwrap_or(1));
            let roster = Roster::assign(&topology, f, &mut rng);
            (topology, roster)
        }
    };

    let schedule = TrustSchedule::for_policy(policy, &topology, &roster, horizon);
    let curve =
        expected_success_curve(&topology, &roster, 1.0 - noise, failure, &schedule, horizon)?;
    for value in &curve {
        println!("{value}");
    }
    if let Some(path) = &args.out {
        let mut text = String::from("t,expected_success_rate\n");
        for (idx, value) in curve.iter().enumerate() {
            text.push_str(&format!("{},{}\n", idx + 1, value));
        }
        std::fs::write(path, text)?;
        eprintln!("wrote curve to {}", path.display());
    }
    Ok(())
}
