use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rfv_bench::robot::{self, maze, RobotConfig, Scenario};
use rfv_bench::sysid::{self, SysidBench};
use rfv_core::evolution::{run_ga, AprioriSet, GaOutcome, GenerationStats, SearchSpace};
use rfv_core::system::SystemDocument;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{ExistingOutput, OutputDir};
use crate::{fmt_f64, CliError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub seed: u64,
    pub best_fitness: f64,
    /// RMS error for sysid, fitness for robot.
    pub metric: f64,
    pub rule_count: usize,
}

/// Aggregate over all repetitions, in the benchmark's own units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub metric: &'static str,
    pub config_hash: String,
    pub runs: Vec<RunRecord>,
    pub mean: f64,
    pub best: f64,
    /// Sample variance; 0 for a single repetition.
    pub variance: f64,
    pub wall_clock_secs: f64,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn row(&self) -> String {
        format!(
            "{} {}: mean {:.4} best {:.4} var {:.6} over {} runs",
            self.experiment,
            self.metric,
            self.mean,
            self.best,
            self.variance,
            self.runs.len()
        )
    }
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    config_hash: &'a str,
    repetition: usize,
    seed: u64,
    fitness: f64,
    system: SystemDocument,
}

fn load_scenarios(paths: &[PathBuf]) -> Result<Vec<Scenario>, CliError> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let s = Scenario::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if s.collides(s.start.position()) {
                return Err(CliError::Config(format!(
                    "{}: start pose is in collision",
                    p.display()
                )));
            }
            Ok(s)
        })
        .collect()
}

fn write_stats(
    out: &mut OutputDir,
    all: &[(usize, u64, Vec<GenerationStats>)],
) -> Result<(), CliError> {
    let w = out.open("stats.csv")?;
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "repetition",
        "seed",
        "generation",
        "best_fitness",
        "mean_fitness",
        "best_rule_count",
        "mean_rule_count",
        "evaluations",
    ])?;
    for (rep, seed, stats) in all {
        for s in stats {
            w.write_record([
                rep.to_string(),
                seed.to_string(),
                s.generation.to_string(),
                fmt_f64(s.best_fitness),
                fmt_f64(s.mean_fitness),
                s.best_rule_count.to_string(),
                fmt_f64(s.mean_rule_count),
                s.evaluations.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

enum Bench {
    Sysid(SysidBench),
    Robot {
        training: Vec<Scenario>,
        held_out: Vec<Scenario>,
        episode: RobotConfig,
        held_out_steps: usize,
    },
}

impl Bench {
    fn fitness(&self, ind: &rfv_core::evolution::Individual, space: &SearchSpace) -> f64 {
        match self {
            Bench::Sysid(b) => sysid::sysid_fitness(ind, space, b),
            Bench::Robot {
                training, episode, ..
            } => robot::robot_fitness(ind, space, training, episode),
        }
    }
}

/// Runs every repetition of a sysid or robot experiment and writes the
/// artifacts. `jobs` bounds the fitness-evaluation threads.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    jobs: usize,
    existing: ExistingOutput,
) -> Result<RunSummary, CliError> {
    cfg.validate(kind)?;
    let started = Instant::now();
    let hash = cfg.hash();

    let (bench, space) = match kind {
        ExperimentKind::Sysid => {
            let b =
                SysidBench::new(&cfg.sysid).map_err(|e| CliError::Config(format!("sysid: {e}")))?;
            (
                Bench::Sysid(b),
                SearchSpace::new(sysid::dims(), AprioriSet::default()),
            )
        }
        ExperimentKind::Robot => {
            let training = match &cfg.robot.scenarios {
                Some(paths) => load_scenarios(paths)?,
                None => maze::training_suite(),
            };
            let held_out = match &cfg.robot.held_out {
                Some(paths) => load_scenarios(paths)?,
                None => vec![maze::held_out_maze()],
            };
            let apriori = if cfg.apriori {
                robot::load_apriori_table()
            } else {
                AprioriSet::default()
            };
            let bench = Bench::Robot {
                training,
                held_out,
                episode: cfg.robot.episode.clone(),
                held_out_steps: cfg.robot.held_out_steps,
            };
            (bench, SearchSpace::new(robot::dims(), apriori))
        }
        ExperimentKind::Inspect => {
            return Err(CliError::Config("inspect is not a GA experiment".into()))
        }
    };

    let mut out = OutputDir::create(&cfg.out_dir, existing, &hash)?;
    out.write_json("config.json", cfg)?;

    let mut runs = Vec::new();
    let mut all_stats = Vec::new();
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let ga = rfv_core::evolution::GaConfig {
            seed,
            ..cfg.ga.clone()
        };
        log::info!("{} repetition {rep} seed {seed}", kind.name());
        let GaOutcome { best, stats } = run_ga(
            &ga,
            &space,
            |ind| bench.fitness(ind, &space),
            jobs,
            |s, _| {
                log::debug!(
                    "gen {} best {:.6} mean {:.6} rules {}",
                    s.generation,
                    s.best_fitness,
                    s.mean_fitness,
                    s.best_rule_count
                )
            },
        )
        .map_err(|e| CliError::Runtime(format!("ga: {e}")))?;

        let fitness = best.score();
        let mut system = space
            .assemble(&best)
            .map_err(|e| CliError::Runtime(format!("best individual does not assemble: {e}")))?;
        out.write_json(
            &format!("checkpoints/best_rep{rep}.json"),
            &Checkpoint {
                config_hash: &hash,
                repetition: rep,
                seed,
                fitness,
                system: system.to_document(),
            },
        )?;

        let metric = match &bench {
            Bench::Sysid(b) => {
                let ep = b.run(&mut system);
                let mut w = out.open(&format!("traces/rep{rep}_train.csv"))?;
                sysid::write_trace_csv(&mut w, &ep.trace)?;
                w.flush()?;
                -fitness
            }
            Bench::Robot {
                held_out,
                episode,
                held_out_steps,
                ..
            } => {
                let ecfg = RobotConfig {
                    steps: *held_out_steps,
                    ..episode.clone()
                };
                for (i, s) in held_out.iter().enumerate() {
                    let seed = ecfg.noise_seed.wrapping_add(i as u64);
                    let ep = robot::fitness_episode(&mut system, s, &ecfg, seed, true);
                    let mut w = out.open(&format!("episodes/rep{rep}_{}.csv", s.name))?;
                    robot::write_episode_csv(&mut w, ep.log.as_ref().expect("log kept"))?;
                    w.flush()?;
                }
                fitness
            }
        };
        runs.push(RunRecord {
            repetition: rep,
            seed,
            best_fitness: fitness,
            metric,
            rule_count: best.rules.len(),
        });
        all_stats.push((rep, seed, stats));
    }
    write_stats(&mut out, &all_stats)?;

    let values: Vec<f64> = runs.iter().map(|r| r.metric).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let (metric, best) = match kind {
        ExperimentKind::Sysid => ("rms", values.iter().copied().fold(f64::INFINITY, f64::min)),
        _ => (
            "fitness",
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    let mut summary = RunSummary {
        experiment: kind.name(),
        metric,
        config_hash: hash,
        runs,
        mean,
        best,
        variance,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        out_dir: out.root().to_path_buf(),
    };
    out.write_json("summary.json", &summary)?;
    summary.out_dir = out.finish()?;
    Ok(summary)
}
