//! `ddek`: simulate benchmark DDEs, fit Koopman surrogates, predict, and run
//! sweep experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use dde_koopman::config::load_config;
use dde_koopman::csvio::{fmt_f64, read_states_csv, write_rollout_csv, write_trajectory_csv};
use dde_koopman::dde::{integrate, sample_initial_histories, DdeSystem};
use dde_koopman::discretize::DiscretizedState;
use dde_koopman::experiment::{run_experiment, SystemKind};
use dde_koopman::kedmd::{
    build_dataset, fit, CenterStrategy, FitOptions, KoopmanSurrogate, SigmaPolicy, StateScaling,
};
use dde_koopman::kernel::fill_distance;
use dde_koopman::{discretize::DiscretizationGrid, Error};

#[derive(Parser)]
#[command(name = "ddek", version, about = "Koopman surrogate models of delay differential equations", disable_help_subcommand = true)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a benchmark system and export trajectory CSVs.
    Simulate(SimulateArgs),
    /// Generate training data and fit a surrogate, saving it to a file.
    Fit(FitArgs),
    /// Roll a saved surrogate out from a constant initial history.
    Predict(PredictArgs),
    /// Run a sweep experiment from a TOML config.
    Experiment(ExperimentArgs),
    /// Fill distance of a center set over a cloud (both CSV state lists).
    FillDistance(FillDistanceArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// System name: hill | tumor.
    #[arg(long)]
    system: String,
    /// Delay override τ_d.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Sampling interval Δ.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Integrator step (default Δ/10).
    #[arg(long)]
    step: Option<f64>,
    /// Per-component constant-history bounds, e.g. "0.1:1.5" or
    /// "0.1:1.5,0.1:20".
    #[arg(long)]
    bounds: Option<String>,
}

impl SystemArgs {
    fn resolve(&self) -> Result<(DdeSystem, Vec<(f64, f64)>, f64), Error> {
        let kind: SystemKind = self.system.parse()?;
        let delay = self.tau.unwrap_or_else(|| kind.default_delay());
        let system = match kind {
            SystemKind::Hill => dde_koopman::dde::hill_system_with_delay(delay),
            SystemKind::Tumor => dde_koopman::dde::tumor_system_with_delay(delay),
            SystemKind::Identity => {
                return Err(Error::Config(
                    "system 'identity' is only valid inside experiment configs".into(),
                ))
            }
        };
        let bounds = match &self.bounds {
            Some(text) => parse_bounds(text)?,
            None => kind.default_bounds(),
        };
        if bounds.len() != system.state_dim() {
            return Err(Error::Config(format!(
                "bounds: need {} components, got {}",
                system.state_dim(),
                bounds.len()
            )));
        }
        Ok((system, bounds, self.step.unwrap_or(self.delta / 10.0)))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Number of trajectories.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Initial-history seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// History sample count M.
    #[arg(long = "M", default_value_t = 2)]
    m: usize,
    /// Number of centers.
    #[arg(long, default_value_t = 121)]
    p: usize,
    /// Regression radius ρ.
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Minimum neighbors within ρ (0 = max(nM+1, 10)).
    #[arg(long, default_value_t = 0)]
    d: usize,
    /// Training trajectories.
    #[arg(long, default_value_t = 20)]
    ntr: usize,
    /// Training-data seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Center-selection seed.
    #[arg(long, default_value_t = 0)]
    center_seed: u64,
    /// Center strategy: greedy_farthest | grid | random.
    #[arg(long, default_value = "greedy_farthest")]
    strategy: String,
    /// Kernel scale as a fraction of the cloud diameter.
    #[arg(long, default_value_t = 0.5, conflicts_with_all = ["sigma_median", "sigma_fixed"])]
    sigma_fraction: f64,
    /// Kernel scale as factor × median pairwise center distance.
    #[arg(long, conflicts_with = "sigma_fixed")]
    sigma_median: Option<f64>,
    /// Fixed kernel scale.
    #[arg(long)]
    sigma_fixed: Option<f64>,
    /// Normalize each state component by its data range before all metric
    /// computations (rho and sigma are then in normalized units).
    #[arg(long)]
    scale_components: bool,
    /// Output surrogate file.
    #[arg(long, default_value = "surrogate.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved surrogate file.
    #[arg(long)]
    surrogate: PathBuf,
    /// Constant initial history, comma separated per component, e.g. "0.5"
    /// or "0.3,4.0".
    #[arg(long)]
    init: String,
    /// Rollout steps.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Output rollout CSV.
    #[arg(long, default_value = "rollout.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FillDistanceArgs {
    /// CSV of center states.
    #[arg(long)]
    centers: PathBuf,
    /// CSV of cloud states.
    #[arg(long)]
    cloud: PathBuf,
}

fn parse_bounds(text: &str) -> Result<Vec<(f64, f64)>, Error> {
    text.split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bounds: expected lo:hi, got '{part}'")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bounds: {e}")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bounds: {e}")))?;
            Ok((lo, hi))
        })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let first_line = e.to_string().lines().next().unwrap_or("bad usage").to_string();
                eprintln!("{first_line}");
                return ExitCode::from(1);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("--threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

/// 1 = usage error, 2 = numerical failure.
fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::PreconditionViolation(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit_cmd(args),
        Command::Predict(args) => predict(args),
        Command::Experiment(args) => experiment(args),
        Command::FillDistance(args) => fill_distance_cmd(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let (system, bounds, step) = args.system.resolve()?;
    let histories = sample_initial_histories(&system, args.count, &bounds, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    for (i, h) in histories.iter().enumerate() {
        let traj = integrate(&system, h, args.system.horizon, args.system.delta, step)?;
        let path = args.out.join(format!("trajectory_{i:03}.csv"));
        write_trajectory_csv(&path, &traj)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn fit_cmd(args: FitArgs) -> Result<(), Error> {
    let (system, bounds, step) = args.system.resolve()?;
    let histories = sample_initial_histories(&system, args.ntr, &bounds, args.seed)?;
    let trajs = histories
        .iter()
        .map(|h| integrate(&system, h, args.system.horizon, args.system.delta, step))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = DiscretizationGrid::new(args.m, system.delay())?;
    let dataset = build_dataset(&trajs, &grid)?;
    let mut opts = FitOptions::new(args.p, args.rho);
    opts.min_neighbors = args.d;
    opts.seed = args.center_seed;
    opts.strategy = args.strategy.parse::<CenterStrategy>()?;
    opts.sigma_policy = if let Some(v) = args.sigma_fixed {
        SigmaPolicy::Fixed { value: v }
    } else if let Some(f) = args.sigma_median {
        SigmaPolicy::MedianPairwise { factor: f }
    } else {
        SigmaPolicy::DiameterFraction {
            fraction: args.sigma_fraction,
        }
    };
    if args.scale_components {
        opts.scaling = StateScaling::ComponentRange;
    }
    let surrogate = fit(&dataset, &opts)?;
    let meta = surrogate.metadata();
    println!(
        "fitted p={} sigma={} lambda={} h_fill={} cond~{}",
        meta.p,
        fmt_f64(meta.sigma),
        fmt_f64(meta.lambda),
        fmt_f64(meta.h_fill),
        fmt_f64(meta.condition_estimate)
    );
    surrogate.save(&args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Error> {
    let surrogate = KoopmanSurrogate::load(&args.surrogate)?;
    let meta = surrogate.metadata();
    let comps: Vec<f64> = args
        .init
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("init: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if comps.len() != meta.n {
        return Err(Error::Config(format!(
            "init: surrogate expects {} components, got {}",
            meta.n,
            comps.len()
        )));
    }
    // constant history sampled on the surrogate's grid
    let mut z0 = DVector::zeros(meta.n * meta.m);
    for j in 0..meta.m {
        for c in 0..meta.n {
            z0[j * meta.n + c] = comps[c];
        }
    }
    let z0 = DiscretizedState::new(meta.n, meta.m, z0)?;
    let states = surrogate.rollout(&z0, args.steps)?;
    write_rollout_csv(&args.out, &states, meta.delta)?;
    println!("{}", args.out.display());
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), Error> {
    let mut config = load_config(&args.config)?;
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    let report = run_experiment(&config)?;
    for cell in &report.cells {
        println!(
            "{}: status={} p={} h_fill={} mean_mu={} final_mu={}",
            cell.label,
            cell.status,
            cell.p,
            fmt_f64(cell.h_fill),
            fmt_f64(cell.mean_mu),
            fmt_f64(cell.final_mu)
        );
    }
    println!("{}", report.summary_path.display());
    Ok(())
}

fn fill_distance_cmd(args: FillDistanceArgs) -> Result<(), Error> {
    let centers = read_states_csv(&args.centers)?;
    let cloud = read_states_csv(&args.cloud)?;
    let h = fill_distance(&centers, &cloud)?;
    println!("{}", fmt_f64(h));
    Ok(())
}
