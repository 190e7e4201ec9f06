use std::io::Write;
use std::path::PathBuf;

use rfv_core::system::RfvSystem;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{ExistingOutput, OutputDir};
use crate::{fmt_f64, CliError};

/// Writes rule memberships over a grid slice of a saved system's input
/// space (`memberships.csv`) and per-rule metadata (`rules.csv`).
pub fn inspect(cfg: &ExperimentConfig, existing: ExistingOutput) -> Result<PathBuf, CliError> {
    cfg.validate(ExperimentKind::Inspect)?;
    let s = &cfg.inspect;
    let path = s.system.as_ref().expect("validated");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let system =
        parse_system(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let tri = system.triangulation();
    let domain = system.domain();
    let dim = domain.dim();

    if let Some(&bad) = s.axes.iter().find(|&&a| a >= dim) {
        return Err(CliError::Config(format!(
            "inspect.axes: axis {bad} out of range for {dim} inputs"
        )));
    }
    let base = match &s.at {
        Some(at) if at.len() != dim => {
            return Err(CliError::Config(format!(
                "inspect.at: expected {dim} values, got {}",
                at.len()
            )))
        }
        Some(at) => domain.clamp(at),
        None => domain.center(),
    };

    let mut out = OutputDir::create(&cfg.out_dir, existing, &cfg.hash())?;
    let n = tri.site_count();

    let mut w = csv::Writer::from_writer(out.open("memberships.csv")?);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    header.extend((0..n).map(|k| format!("mu{k}")));
    header.push("sum".into());
    w.write_record(&header)?;
    let r = s.resolution;
    let ticks = |axis: usize| -> Vec<f64> {
        let (lo, hi) = (domain.lower[axis], domain.upper[axis]);
        (0..r)
            .map(|i| {
                if i + 1 == r {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (r - 1) as f64
                }
            })
            .collect()
    };
    let grid: Vec<Vec<f64>> = match s.axes[..] {
        [a] => ticks(a)
            .into_iter()
            .map(|v| {
                let mut q = base.clone();
                q[a] = v;
                q
            })
            .collect(),
        [a, b] => {
            let (ta, tb) = (ticks(a), ticks(b));
            tb.iter()
                .flat_map(|&vb| {
                    let base = &base;
                    ta.iter().map(move |&va| {
                        let mut q = base.clone();
                        q[a] = va;
                        q[b] = vb;
                        q
                    })
                })
                .collect()
        }
        _ => unreachable!("validated"),
    };
    for q in &grid {
        let mu = tri
            .membership_vector(q)
            .map_err(|e| CliError::Runtime(format!("membership at {q:?}: {e}")))?;
        let mut rec: Vec<String> = q.iter().map(|&v| fmt_f64(v)).collect();
        rec.extend(mu.iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(mu.iter().sum()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(out.open("rules.csv")?);
    let mut header = vec!["rule".to_string(), "frozen".into()];
    header.extend((0..dim).map(|i| format!("site{i}")));
    header.push("neighbors".into());
    w.write_record(&header)?;
    for (k, rule) in system.rules().iter().enumerate() {
        let neighbors = tri
            .site_neighbors(k)
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        let mut rec = vec![k.to_string(), rule.frozen.to_string()];
        rec.extend(rule.site.iter().map(|&v| fmt_f64(v)));
        rec.push(neighbors);
        w.write_record(&rec)?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    inner.flush()?;
    out.finish()
}

/// Accepts a bare system document or a run checkpoint wrapping one.
fn parse_system(text: &str) -> Result<RfvSystem, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let doc = match value.get("system") {
        Some(inner) if value.get("config_hash").is_some() => inner.clone(),
        _ => value,
    };
    let doc = serde_json::from_value(doc).map_err(|e| e.to_string())?;
    RfvSystem::from_document(doc).map_err(|e| e.to_string())
}
