//! Tracking a reference model through a nonlinear plant.
//!
//! The plant is `y(t+1) = y(t) y(t-1) (y(t) + 2.5) / (1 + y(t)^2 + y(t-1)^2) + u(t)`
//! and the controller sees the normalized pair `(y_p(t), y_r(t+1))`, emitting
//! `u(t)` directly. It carries one internal unit of its own.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rfv_core::evolution::{Individual, SearchSpace};
use rfv_core::system::{Dimensions, RfvSystem};
use serde::{Deserialize, Serialize};

/// RMS reported for diverging or unbuildable controllers.
pub const WORST_RMS: f64 = 1e6;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlantState {
    pub y_t: f64,
    pub y_tm1: f64,
}

impl PlantState {
    pub fn advance(&mut self, y_next: f64) {
        self.y_tm1 = self.y_t;
        self.y_t = y_next;
    }
}

pub fn plant_step(s: PlantState, u: f64) -> f64 {
    let (y, yp) = (s.y_t, s.y_tm1);
    y * yp * (y + 2.5) / (1.0 + y * y + yp * yp) + u
}

/// Training reference.
pub fn reference_step(y_t: f64, y_tm1: f64, t: usize) -> f64 {
    let t = t as f64;
    0.6 * y_t + 0.2 * y_tm1 + 0.2 * (2.0 * PI * t / 25.0).sin() + 0.4 * (PI * t / 32.0).sin()
}

/// Held-out reference with different forcing terms.
pub fn test_reference_step(y_t: f64, y_tm1: f64, t: usize) -> f64 {
    let t = t as f64;
    0.6 * y_t + 0.2 * y_tm1 + 0.3 * (2.0 * PI * t / 20.0).sin() + 0.3 * (PI * t / 45.0).sin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ReferenceSource {
    Train,
    Test,
    /// One column of `y_r(1), y_r(2), ...`; a header row is allowed.
    Csv {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SysidConfig {
    pub episode_length: usize,
    /// Signal range mapped onto `[0, 1]`.
    pub input_range: (f64, f64),
    pub reference: ReferenceSource,
}

impl Default for SysidConfig {
    fn default() -> Self {
        SysidConfig {
            episode_length: 250,
            input_range: (-3.0, 3.0),
            reference: ReferenceSource::Train,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SysidError {
    #[error("episode_length must be at least 2, got {0}")]
    ShortEpisode(usize),
    #[error("input range ({0}, {1}) is empty")]
    BadRange(f64, f64),
    #[error("reference file: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference file row {row}: {reason}")]
    BadValue { row: usize, reason: String },
    #[error("reference file holds {got} values, episode needs {need}")]
    ShortReference { got: usize, need: usize },
}

/// Generates `y_r(1..=n)` from zero initial conditions.
pub fn generate_reference(step: fn(f64, f64, usize) -> f64, n: usize) -> Vec<f64> {
    let (mut y, mut yp) = (0.0, 0.0);
    (0..n)
        .map(|t| {
            let next = step(y, yp, t);
            yp = y;
            y = next;
            next
        })
        .collect()
}

pub fn read_reference_csv<R: Read>(reader: R) -> Result<Vec<f64>, SysidError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => {
                return Err(SysidError::BadValue {
                    row,
                    reason: "not finite".into(),
                })
            }
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(SysidError::BadValue {
                    row,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Anything that maps the normalized `(y_p(t), y_r(t+1))` to `u(t)`.
pub trait Controller {
    fn reset(&mut self);
    fn control(&mut self, inputs: [f64; 2]) -> f64;
}

impl Controller for RfvSystem {
    fn reset(&mut self) {
        self.reset_state();
    }

    fn control(&mut self, inputs: [f64; 2]) -> f64 {
        let mut u = [0.0];
        match self.step_into(&inputs, &mut u) {
            Ok(()) => u[0],
            Err(_) => f64::NAN,
        }
    }
}

/// An episode's reference signal and normalization.
#[derive(Debug, Clone)]
pub struct SysidBench {
    reference: Vec<f64>,
    range: (f64, f64),
}

impl SysidBench {
    pub fn new(cfg: &SysidConfig) -> Result<Self, SysidError> {
        if cfg.episode_length < 2 {
            return Err(SysidError::ShortEpisode(cfg.episode_length));
        }
        let n = cfg.episode_length;
        let reference = match &cfg.reference {
            ReferenceSource::Train => generate_reference(reference_step, n),
            ReferenceSource::Test => generate_reference(test_reference_step, n),
            ReferenceSource::Csv { path } => {
                let file = std::fs::File::open(path).map_err(csv::Error::from)?;
                let mut values = read_reference_csv(file)?;
                if values.len() < n {
                    return Err(SysidError::ShortReference {
                        got: values.len(),
                        need: n,
                    });
                }
                values.truncate(n);
                values
            }
        };
        Self::from_reference(reference, cfg.input_range)
    }

    /// Uses `reference[t]` as `y_r(t+1)`. The range is widened
    /// symmetrically, with a warning, if the reference leaves it.
    pub fn from_reference(reference: Vec<f64>, range: (f64, f64)) -> Result<Self, SysidError> {
        let (lo, hi) = range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SysidError::BadRange(lo, hi));
        }
        let peak = reference.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        let range = if reference.iter().any(|y| *y < lo || *y > hi) {
            let widened = (lo.min(-peak), hi.max(peak));
            log::warn!(
                "reference reaches {peak:.3}, widening input range ({lo}, {hi}) to ({}, {})",
                widened.0,
                widened.1
            );
            widened
        } else {
            range
        };
        Ok(SysidBench { reference, range })
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.range.0) / (self.range.1 - self.range.0)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.range.0 + v * (self.range.1 - self.range.0)
    }

    pub fn run<C: Controller + ?Sized>(&self, ctrl: &mut C) -> Episode {
        self.run_inner(ctrl, true)
    }

    /// RMS only, without building a trace.
    pub fn rms<C: Controller + ?Sized>(&self, ctrl: &mut C) -> f64 {
        self.run_inner(ctrl, false).rms
    }

    fn run_inner<C: Controller + ?Sized>(&self, ctrl: &mut C, keep_trace: bool) -> Episode {
        ctrl.reset();
        let mut plant = PlantState::default();
        let mut sq = 0.0;
        let mut trace = Vec::with_capacity(if keep_trace { self.reference.len() } else { 0 });
        for (t, &y_r) in self.reference.iter().enumerate() {
            let u = ctrl.control([self.normalize(plant.y_t), self.normalize(y_r)]);
            let y_p = plant_step(plant, u);
            if !y_p.is_finite() {
                return Episode {
                    rms: WORST_RMS,
                    trace,
                    diverged: true,
                };
            }
            plant.advance(y_p);
            sq += (y_r - y_p).powi(2);
            if keep_trace {
                trace.push(TraceRow {
                    t,
                    y_r,
                    y_p,
                    u,
                    rms_running: (sq / (t + 1) as f64).sqrt(),
                });
            }
        }
        let rms = (sq / self.reference.len() as f64).sqrt();
        Episode {
            rms: if rms.is_finite() {
                rms.min(WORST_RMS)
            } else {
                WORST_RMS
            },
            trace,
            diverged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub y_r: f64,
    pub y_p: f64,
    pub u: f64,
    pub rms_running: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub rms: f64,
    pub trace: Vec<TraceRow>,
    pub diverged: bool,
}

pub fn write_trace_csv<W: Write>(writer: W, trace: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "y_r", "y_p", "u", "rms_running"])?;
    for row in trace {
        w.write_record([
            row.t.to_string(),
            format!("{:.16e}", row.y_r),
            format!("{:.16e}", row.y_p),
            format!("{:.16e}", row.u),
            format!("{:.16e}", row.rms_running),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Controller shape: inputs `(y_p(t), y_r(t+1))`, one internal unit, output `u(t)`.
pub fn dims() -> Dimensions {
    Dimensions::new(2, 1, 1).expect("valid dimensions")
}

/// `-RMS` of the training episode; `-WORST_RMS` if the rules do not assemble.
pub fn sysid_fitness(ind: &Individual, space: &SearchSpace, bench: &SysidBench) -> f64 {
    match space.assemble(ind) {
        Ok(mut sys) => -bench.rms(&mut sys),
        Err(_) => -WORST_RMS,
    }
}
