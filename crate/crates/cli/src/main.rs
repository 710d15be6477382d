use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use gpcinfer::correction::fit_state_surrogate;
use gpcinfer::gp::{Dataset, GpModel};
use gpcinfer::harness::{
    io, plotdata, run_experiment, run_method, simulate, write_experiment, write_run_record, Method, ReplicateResult,
    RunConfig,
};
use gpcinfer::seed::derive_seed;
use gpcinfer::{Error, Result};

#[derive(Parser)]
#[command(name = "gpcinfer", version, about = "Parameter inference for the Richards equation with GP collocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at the configured truth and sample a noisy dataset.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides `simulation.noise_b`.
        #[arg(long)]
        noise_b: Option<f64>,
    },
    /// Fit the state surrogate's hyperparameters to a dataset.
    FitGp {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one estimation method and write its run record.
    Infer {
        #[arg(long)]
        method: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Bayesian-optimization estimators (and the GPPDE baseline).
    Optimize {
        #[arg(long, value_enum)]
        mode: OptMode,
        #[command(flatten)]
        run: RunArgs,
    },
    /// All methods over noise levels and replicates; writes `table.csv`.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "GPCINFER_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// Long-format CSVs for plotting from a run directory.
    Plotdata {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Dataset CSV (`z,t,y`); simulated from the config when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter file from `fit-gp`; refitted when omitted.
    #[arg(long)]
    hyperparams: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptMode {
    Bo,
    BoGpc,
    Gppde,
}

impl From<OptMode> for Method {
    fn from(m: OptMode) -> Self {
        match m {
            OptMode::Bo => Method::Bo,
            OptMode::BoGpc => Method::BoGpc,
            OptMode::Gppde => Method::Gppde,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(config: Option<&Path>, out: &Path, seed: u64, noise_b: Option<f64>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(b) = noise_b {
        cfg.simulation.noise_b = b;
    }
    cfg.seed = seed;
    cfg.validate()?;
    let problem = cfg.problem()?;
    let (field, data) = simulate(&cfg, &problem, cfg.simulation.noise_b, seed)?;
    io::create_dir(out)?;
    io::write_field(&out.join("field.csv"), &field)?;
    io::write_dataset(&out.join("data.csv"), &data)?;
    io::write_string(&out.join("provenance.toml"), &cfg.to_toml())?;
    info!(
        "{} observations, {} clamp events, max step mass imbalance {:.2e}",
        data.len(),
        field.stats.clamp_events,
        field.stats.max_step_relative_imbalance
    );
    Ok(())
}

fn cmd_fit_gp(data: &Path, config: Option<&Path>, out: &Path, seed: u64) -> Result<()> {
    let cfg = load_config(config)?;
    let data = io::read_dataset(data)?;
    let model = fit_state_surrogate(&data, cfg.gp.restarts, seed)?;
    io::write_hyperparams(out, model.hyperparams())
}

fn cmd_run(method: Method, args: &RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    cfg.seed = args.seed;
    let problem = cfg.problem()?;
    let data: Dataset = match &args.data {
        Some(p) => io::read_dataset(p)?,
        None => simulate(&cfg, &problem, cfg.simulation.noise_b, derive_seed(args.seed, 10))?.1,
    };
    let t0 = Instant::now();
    let model = if method.uses_state_gp() {
        Some(match &args.hyperparams {
            Some(p) => GpModel::new(&data, io::read_hyperparams(p)?)?,
            None => fit_state_surrogate(&data, cfg.gp.restarts, derive_seed(args.seed, 11))?,
        })
    } else {
        None
    };
    let res = run_method(method, &data, model.as_ref(), &cfg, &problem, derive_seed(args.seed, 12));
    let mut row = ReplicateResult::from_output(method, &res, args.data.is_none().then(|| cfg.truth.as_array()));
    row.seed = args.seed;
    row.noise_b = cfg.simulation.noise_b;
    row.runtime_s = t0.elapsed().as_secs_f64();
    io::create_dir(&args.out)?;
    io::write_dataset(&args.out.join("data.csv"), &data)?;
    if let Some(m) = &model {
        io::write_hyperparams(&args.out.join("hyperparams.txt"), m.hyperparams())?;
    }
    io::write_records(&args.out.join("replicate.csv"), &[row])?;
    let out = res?;
    write_run_record(&args.out, &cfg, &out)?;
    let th = out.estimate();
    println!("{}: beta = {:.6}, L_m = {:.6} ({} solver calls)", method.label(), th[0], th[1], out.solver_calls());
    Ok(())
}

fn cmd_experiment(config: &Path, out: &Path, jobs: usize) -> Result<()> {
    let cfg = load_config(Some(config))?;
    let res = run_experiment(&cfg, jobs)?;
    write_experiment(out, &cfg, &res)?;
    for r in &res.table {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:7} b={:<5} {:4} mean {} rmse {} ({} ok, {} failed)",
            r.method.label(),
            r.noise_b,
            r.parameter,
            fmt(r.mean),
            fmt(r.rmse),
            r.n_ok,
            r.n_failed
        );
    }
    if res.replicates.iter().all(|r| r.error.is_some()) {
        return Err(Error::NoValidSamples(res.replicates.len()));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate { config, out, seed, noise_b } => cmd_simulate(config.as_deref(), out, *seed, *noise_b),
        Command::FitGp { data, config, out, seed } => cmd_fit_gp(data, config.as_deref(), out, *seed),
        Command::Infer { method, run } => Method::parse(method).and_then(|m| cmd_run(m, run)),
        Command::Optimize { mode, run } => cmd_run((*mode).into(), run),
        Command::Experiment { config, out, jobs } => cmd_experiment(config, out, *jobs),
        Command::Plotdata { run, out } => plotdata(run, out).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
