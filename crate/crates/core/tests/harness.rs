use nonstat::environments::ScenarioSpec;
use nonstat::harness::{
    emit_results, read_regret_csv, run_replications, ExperimentConfig, PolicySpec,
};
use nonstat::verify::{run_suite, Suite};

fn abrupt(policies: &str, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        ScenarioSpec::from_name("abrupt").unwrap(),
        PolicySpec::parse_list(policies).unwrap(),
    );
    cfg.replications = reps;
    cfg
}

#[test]
fn discounting_beats_full_memory_per_replication() {
    let mut cfg = abrupt("dlinucb,linucb", 20);
    cfg.seed = 7;
    let res = run_replications(&cfg).unwrap();
    let d = &res.policy("dlinucb").unwrap().finals;
    let lin = &res.policy("linucb").unwrap().finals;
    let wins = d.iter().zip(lin).filter(|(a, b)| a < b).count();
    assert!(wins >= 18, "D-LinUCB won only {wins} of 20");
}

#[test]
fn single_replication_bands_collapse() {
    let mut cfg = abrupt("dlinucb", 1);
    cfg.horizon = Some(300);
    let res = run_replications(&cfg).unwrap();
    let p = &res.policies[0];
    assert_eq!(p.mean.len(), 300);
    assert_eq!(p.mean, p.q05);
    assert_eq!(p.mean, p.q95);
}

#[test]
fn json_config_to_csv_on_disk() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "scenario": {"name": "slowly_varying"},
            "policies": ["dlinucb", {"kind": "swlinucb", "window": 100}],
            "replications": 3,
            "seed": 11,
            "horizon": 400,
            "options": {"emit_theta_trace": true, "theta_stride": 50}
        }"#,
    )
    .unwrap();
    let res = run_replications(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&res, dir.path()).unwrap();

    let rows = read_regret_csv(dir.path().join("regret.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 400);
    for p in &res.policies {
        let last = rows
            .iter()
            .filter(|r| r.policy == p.name)
            .max_by_key(|r| r.step)
            .unwrap();
        assert!((last.mean_cum_regret - p.final_regret.mean).abs() < 1e-9);
        assert!(last.q05 <= last.mean_cum_regret + 1e-12);
    }
    assert!(dir.path().join("theta_trace.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 3);
}

#[test]
fn rerun_is_bit_identical() {
    let mut cfg = abrupt("dlinucb,swlinucb,linucb-or", 4);
    cfg.horizon = Some(1000);
    let a = run_replications(&cfg).unwrap();
    let b = run_replications(&cfg).unwrap();
    assert_eq!(a.policies, b.policies);
}

#[test]
fn verify_bias_suite_passes() {
    let r = run_suite(Suite::Bias, 3).unwrap();
    assert!(r.passed(), "{:?}", r.lines());
}
