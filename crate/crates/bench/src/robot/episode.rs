use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfv_core::evolution::{Individual, SearchSpace};
use rfv_core::system::{Dimensions, RfvSystem};
use serde::{Deserialize, Serialize};

use super::{controller_inputs, sense, step_robot, Pose, Scenario, SensorReading};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// Step budget per scenario.
    pub steps: usize,
    /// End an episode once the normalized target distance drops below
    /// `target_threshold`.
    pub stop_at_target: bool,
    pub target_threshold: f64,
    /// Half-width of the uniform noise added to each proximity reading.
    pub sensor_noise: f64,
    /// Base seed of the noise stream; scenario `i` uses `noise_seed + i`.
    pub noise_seed: u64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            steps: 500,
            stop_at_target: false,
            target_threshold: 0.02,
            sensor_noise: 0.05,
            noise_seed: 0,
        }
    }
}

/// Controller shape: `(L, C, R, B, G)` in, one internal unit, two motors out.
pub fn dims() -> Dimensions {
    Dimensions::new(5, 1, 2).expect("valid dimensions")
}

/// Per-step reward: speed, discounted by obstacle proximity and by the
/// remaining distance to the target.
pub fn fitness_term(v: f64, a: f64, d: f64) -> f64 {
    v * (1.0 - a) * (1.0 - d)
}

/// World state after one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: usize,
    pub pose: Pose,
    pub proximity: [f64; 8],
    pub light: f64,
    pub motors: (f64, f64),
    pub h1: f64,
    pub term: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub fitness_sum: f64,
    pub steps: usize,
    pub collided: bool,
    pub reached_target: bool,
    pub log: Option<EpisodeLog>,
}

fn noisy_sense(
    scenario: &Scenario,
    pose: &Pose,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> SensorReading {
    let mut reading = sense(scenario, pose);
    if noise > 0.0 {
        for p in &mut reading.proximity {
            *p = (*p + rng.random_range(-noise..=noise)).clamp(0.0, 1.0);
        }
    }
    reading
}

/// Runs `system` from the scenario start with a fresh state. The sensor
/// noise stream is seeded with `seed`, so an episode is a pure function of
/// its arguments.
pub fn fitness_episode(
    system: &mut RfvSystem,
    scenario: &Scenario,
    cfg: &RobotConfig,
    seed: u64,
    keep_log: bool,
) -> EpisodeOutcome {
    system.reset_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pose = scenario.start;
    let mut reading = noisy_sense(scenario, &pose, cfg.sensor_noise, &mut rng);
    let target = scenario.target;
    let dist = |p: &Pose| ((p.x - target[0]).powi(2) + (p.y - target[1]).powi(2)).sqrt();
    let d0 = dist(&pose).max(f64::MIN_POSITIVE);
    let mut out = EpisodeOutcome {
        fitness_sum: 0.0,
        steps: 0,
        collided: false,
        reached_target: false,
        log: keep_log.then(EpisodeLog::default),
    };
    let mut motors = [0.0; 2];
    for t in 0..cfg.steps {
        let inputs = controller_inputs(&reading);
        if system.step_into(&inputs, &mut motors).is_err() {
            break;
        }
        let clamp = |m: f64| {
            if m.is_finite() {
                m.clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        let (ml, mr) = (clamp(motors[0]), clamp(motors[1]));
        let (next, collided) = step_robot(scenario, &pose, (ml, mr));
        out.steps = t + 1;
        let term = if collided {
            out.collided = true;
            0.0
        } else {
            pose = next;
            reading = noisy_sense(scenario, &pose, cfg.sensor_noise, &mut rng);
            let d = (dist(&pose) / d0).min(1.0);
            out.reached_target |= d < cfg.target_threshold;
            fitness_term(0.5 * (ml + mr), reading.max_proximity(), d)
        };
        out.fitness_sum += term;
        if let Some(log) = out.log.as_mut() {
            log.rows.push(LogRow {
                t,
                pose,
                proximity: reading.proximity,
                light: reading.light,
                motors: (ml, mr),
                h1: system.state().first().copied().unwrap_or(0.0),
                term,
            });
        }
        if collided || (cfg.stop_at_target && out.reached_target) {
            break;
        }
    }
    out
}

/// Mean per-step reward over all scenarios and the full step budget, in
/// `[0, 1]`. Individuals that do not assemble score 0.
pub fn robot_fitness(
    ind: &Individual,
    space: &SearchSpace,
    scenarios: &[Scenario],
    cfg: &RobotConfig,
) -> f64 {
    let Ok(mut system) = space.assemble(ind) else {
        return 0.0;
    };
    let total: f64 = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = cfg.noise_seed.wrapping_add(i as u64);
            fitness_episode(&mut system, s, cfg, seed, false).fitness_sum
        })
        .sum();
    total / (scenarios.len() * cfg.steps) as f64
}

pub fn write_episode_csv<W: Write>(writer: W, log: &EpisodeLog) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "x".into(), "y".into(), "theta".into()];
    header.extend((0..8).map(|i| format!("s{i}")));
    header.extend(["light", "mL", "mR", "h1", "term"].map(String::from));
    w.write_record(&header)?;
    let f = |v: f64| format!("{v:.16e}");
    for r in &log.rows {
        let mut rec = vec![r.t.to_string(), f(r.pose.x), f(r.pose.y), f(r.pose.theta)];
        rec.extend(r.proximity.iter().map(|&p| f(p)));
        rec.extend([r.light, r.motors.0, r.motors.1, r.h1, r.term].map(f));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
