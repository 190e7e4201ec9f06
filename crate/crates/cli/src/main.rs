use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfv_cli::{
    inspect, load_config, run_experiment, CliError, ExistingOutput, ExperimentConfig,
    ExperimentKind,
};

#[derive(Parser)]
#[command(
    name = "rfv",
    version,
    about = "Evolve and inspect recurrent fuzzy Voronoi controllers"
)]
struct Cli {
    /// Fitness evaluation threads; 0 uses every core.
    #[arg(long, global = true, env = "RFV_JOBS", default_value_t = 1)]
    jobs: usize,
    /// What to do when the output directory already holds files.
    #[arg(long, global = true, value_enum, default_value_t = ExistingOutput::Refuse)]
    on_exists: ExistingOutput,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve tracking controllers for the nonlinear plant.
    Sysid(RunArgs),
    /// Evolve maze-following robot controllers.
    Robot(RunArgs),
    /// Dump memberships and rule neighbourhoods of a saved system.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_enum)]
    apriori: Option<Toggle>,
    #[arg(long)]
    generations: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// System document or run checkpoint.
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    /// One or two input axes, comma separated.
    #[arg(long, value_delimiter = ',')]
    axes: Option<Vec<usize>>,
    /// Values of all input coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Option<Vec<f64>>,
}

fn base_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run_ga_command(
    kind: ExperimentKind,
    a: RunArgs,
    jobs: usize,
    on_exists: ExistingOutput,
) -> Result<(), CliError> {
    let mut cfg = base_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(t) = a.apriori {
        cfg.apriori = matches!(t, Toggle::On);
    }
    if let Some(g) = a.generations {
        cfg.ga.generations = g;
    }
    let summary = run_experiment(&cfg, kind, jobs, on_exists)?;
    println!("{}", summary.row());
    println!("outputs in {}", summary.out_dir.display());
    Ok(())
}

fn run_inspect(a: InspectArgs, on_exists: ExistingOutput) -> Result<(), CliError> {
    let mut cfg = base_config(&a.config)?;
    if let Some(p) = a.system {
        cfg.inspect.system = Some(p);
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    if let Some(r) = a.resolution {
        cfg.inspect.resolution = r;
    }
    if let Some(ax) = a.axes {
        cfg.inspect.axes = ax;
    }
    if let Some(at) = a.at {
        cfg.inspect.at = Some(at);
    }
    let dir = inspect(&cfg, on_exists)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sysid(a) => run_ga_command(ExperimentKind::Sysid, a, cli.jobs, cli.on_exists),
        Command::Robot(a) => run_ga_command(ExperimentKind::Robot, a, cli.jobs, cli.on_exists),
        Command::Inspect(a) => run_inspect(a, cli.on_exists),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
