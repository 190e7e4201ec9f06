use std::path::{Path, PathBuf};

use rfv_bench::robot::RobotConfig;
use rfv_bench::sysid::{ReferenceSource, SysidConfig};
use rfv_core::evolution::GaConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sysid,
    Robot,
    Inspect,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sysid => "sysid",
            ExperimentKind::Robot => "robot",
            ExperimentKind::Inspect => "inspect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSection {
    pub episode: RobotConfig,
    /// Training scenario files; the built-in maze suite when absent.
    pub scenarios: Option<Vec<PathBuf>>,
    /// Scenarios the best controller is logged on after each run; the
    /// built-in held-out maze when absent.
    pub held_out: Option<Vec<PathBuf>>,
    pub held_out_steps: usize,
}

impl Default for RobotSection {
    fn default() -> Self {
        RobotSection {
            episode: RobotConfig::default(),
            scenarios: None,
            held_out: None,
            held_out_steps: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectSection {
    pub system: Option<PathBuf>,
    /// Grid points per sliced axis.
    pub resolution: usize,
    /// One or two input axes to sweep.
    pub axes: Vec<usize>,
    /// Values of the remaining coordinates; the domain centre when absent.
    pub at: Option<Vec<f64>>,
}

impl Default for InspectSection {
    fn default() -> Self {
        InspectSection {
            system: None,
            resolution: 21,
            axes: vec![0, 1],
            at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub ga: GaConfig,
    pub sysid: SysidConfig,
    pub robot: RobotSection,
    pub inspect: InspectSection,
    pub apriori: bool,
    pub out_dir: PathBuf,
    /// Repetition `i` runs the GA with seed `seed + i`.
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            ga: GaConfig::default(),
            sysid: SysidConfig::default(),
            robot: RobotSection::default(),
            inspect: InspectSection::default(),
            apriori: false,
            out_dir: PathBuf::from("out"),
            seed: 0,
            repetitions: 1,
        }
    }
}

/// Parses a config document, reporting the key path of the first error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.inner()))
    })
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Reads a config file; relative paths inside it are taken relative to the
/// file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let ReferenceSource::Csv { path } = &mut cfg.sysid.reference {
        let mut p = PathBuf::from(&*path);
        resolve(base, &mut p);
        *path = p.to_string_lossy().into_owned();
    }
    for list in [&mut cfg.robot.scenarios, &mut cfg.robot.held_out]
        .into_iter()
        .flatten()
    {
        list.iter_mut().for_each(|p| resolve(base, p));
    }
    if let Some(p) = cfg.inspect.system.as_mut() {
        resolve(base, p);
    }
    resolve(base, &mut cfg.out_dir);
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(k) = self.experiment {
            if k != kind {
                return bad(format!(
                    "config is for `{}` but `{}` was requested",
                    k.name(),
                    kind.name()
                ));
            }
        }
        match kind {
            ExperimentKind::Inspect => {
                let s = &self.inspect;
                if s.system.is_none() {
                    return bad("inspect.system: no system file given".into());
                }
                if s.resolution < 2 {
                    return bad("inspect.resolution: need at least 2 points".into());
                }
                if s.axes.is_empty() || s.axes.len() > 2 {
                    return bad("inspect.axes: give one or two axes".into());
                }
                if s.axes.len() == 2 && s.axes[0] == s.axes[1] {
                    return bad("inspect.axes: axes must differ".into());
                }
                Ok(())
            }
            ExperimentKind::Sysid | ExperimentKind::Robot => {
                self.ga
                    .validate()
                    .map_err(|e| CliError::Config(format!("ga: {e}")))?;
                if self.repetitions == 0 {
                    return bad("repetitions: must be at least 1".into());
                }
                if kind == ExperimentKind::Sysid && self.apriori {
                    return bad("apriori: no expert rules exist for the sysid benchmark".into());
                }
                if kind == ExperimentKind::Robot {
                    if self.robot.episode.steps == 0 || self.robot.held_out_steps == 0 {
                        return bad("robot: step budgets must be positive".into());
                    }
                    if self.robot.scenarios.as_ref().is_some_and(|s| s.is_empty()) {
                        return bad("robot.scenarios: empty list".into());
                    }
                }
                Ok(())
            }
        }
    }

    /// SHA-256 over the canonical JSON of everything that affects results.
    /// The output directory is left out, so a rerun elsewhere hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
