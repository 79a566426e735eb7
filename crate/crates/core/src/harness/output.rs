use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::run::AggregateResult;
use crate::error::{Error, Result};

/// One row of `regret.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub step: u64,
    pub policy: String,
    pub mean_cum_regret: f64,
    pub q05: f64,
    pub q95: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes `regret.csv`, `manifest.json` and, when snapshots were recorded,
/// `theta_trace.csv` into `dir`.
pub fn emit_results(result: &AggregateResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if result.policies.is_empty() {
        return Err(Error::InvalidConfig("policy list is empty".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("regret.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for p in &result.policies {
        for t in 0..p.mean.len() {
            w.serialize(RegretRow {
                step: t as u64 + 1,
                policy: p.name.clone(),
                mean_cum_regret: p.mean[t],
                q05: p.q05[t],
                q95: p.q95[t],
            })
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    if result.config.options.emit_theta_trace {
        let path = dir.join("theta_trace.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let d = result.scenario.dim();
        let mut header = vec!["step".to_string(), "policy".into(), "replication".into()];
        header.extend((1..=d).map(|i| format!("theta{i}")));
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for p in &result.policies {
            for (rep, snaps) in p.snapshots.iter().enumerate() {
                for s in snaps {
                    let mut rec = vec![s.step.to_string(), p.name.clone(), rep.to_string()];
                    rec.extend(s.theta.iter().map(f64::to_string));
                    w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let summary: serde_json::Map<String, serde_json::Value> = result
        .policies
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                serde_json::to_value(&p.final_regret).expect("summary serializes"),
            )
        })
        .collect();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "library": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "config": result.config,
        "scenario": {
            "name": result.scenario.name,
            "dim": result.scenario.dim(),
            "horizon": result.horizon,
            "variation_budget": result.scenario.variation_budget(),
            "breakpoints": result.scenario.trajectory.breakpoints,
            "sigma": result.scenario.noise.sigma,
            "action_bound": result.scenario.action_bound(),
            "param_bound": result.scenario.param_bound,
        },
        "policies": result.resolved,
        "seeds": result.seeds,
        "final_regret": summary,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads back a `regret.csv`.
pub fn read_regret_csv(path: impl AsRef<Path>) -> Result<Vec<RegretRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::ScenarioSpec;
    use crate::harness::{run_replications, ExperimentConfig, PolicySpec};

    fn cfg(policies: &str, reps: usize, horizon: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            ScenarioSpec::from_name("abrupt").unwrap(),
            PolicySpec::parse_list(policies).unwrap(),
        );
        c.replications = reps;
        c.horizon = Some(horizon);
        c
    }

    #[test]
    fn row_count_contract() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_replications(&cfg("linucb", 1, 3)).unwrap();
        emit_results(&res, dir.path()).unwrap();
        let rows = read_regret_csv(dir.path().join("regret.csv")).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!dir.path().join("theta_trace.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["seeds"], serde_json::json!([0]));
        assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg("dlinucb,swlinucb", 5, 200);
        c.options.emit_theta_trace = true;
        c.options.theta_stride = 50;
        let res = run_replications(&c).unwrap();
        emit_results(&res, dir.path()).unwrap();
        let rows = read_regret_csv(dir.path().join("regret.csv")).unwrap();
        assert_eq!(rows.len(), 400);
        for row in rows {
            let p = res.policy(&row.policy).unwrap();
            let t = row.step as usize - 1;
            assert!((row.mean_cum_regret - p.mean[t]).abs() <= 1e-12);
            assert!((row.q05 - p.q05[t]).abs() <= 1e-12);
            assert!((row.q95 - p.q95[t]).abs() <= 1e-12);
        }
        let theta = std::fs::read_to_string(dir.path().join("theta_trace.csv")).unwrap();
        // header + 2 policies × 5 replications × 4 snapshots
        assert_eq!(theta.lines().count(), 1 + 2 * 5 * 4);
        assert!(theta.starts_with("step,policy,replication,theta1,theta2"));
    }

    #[test]
    fn empty_policy_list_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut res = run_replications(&cfg("linucb", 1, 3)).unwrap();
        res.policies.clear();
        assert!(emit_results(&res, &out).unwrap_err().is_config_error());
        assert!(!out.exists());
        assert!(run_replications(&cfg("", 1, 3)).unwrap_err().is_config_error());
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let res = run_replications(&cfg("linucb", 1, 3)).unwrap();
        let err = emit_results(&res, blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
