use std::path::Path;

use tipover_core::scenario::{
    emit_outputs, read_metric_rows, run_scenario, RunSummary, ScenarioConfig, SummaryMetrics,
};

fn recompute(cfg: &ScenarioConfig) {
    let dir = tempfile::tempdir().unwrap();
    let result = run_scenario(cfg).unwrap();
    emit_outputs(&result, dir.path()).unwrap();

    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let summary: RunSummary = serde_json::from_str(&text).unwrap();
    let rows = read_metric_rows(&dir.path().join("state.csv"), cfg.plant).unwrap();
    assert_eq!(rows.len(), summary.samples);
    let again = SummaryMetrics::compute(
        &rows,
        cfg.sim.control_dt,
        &cfg.metrics,
        cfg.convergence_threshold(),
        summary.metrics.instability.clone(),
    );
    assert_eq!(again, summary.metrics);
    assert_eq!(again, result.metrics);
}

#[test]
fn planar_summary_recomputes_from_csv() {
    let mut cfg = ScenarioConfig::default();
    cfg.output.plots = false;
    recompute(&cfg);
}

#[test]
fn three_wheel_summary_recomputes_from_csv() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/three_wheel.toml");
    let mut cfg = ScenarioConfig::load(&path).unwrap();
    cfg.output.plots = false;
    recompute(&cfg);
}

#[test]
fn emitted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.output.plots = false;
    cfg.references.strokes = 1;
    let first = run_scenario(&cfg).unwrap();
    emit_outputs(&first, dir.path()).unwrap();
    let reloaded = ScenarioConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(reloaded, cfg);
    assert_eq!(run_scenario(&reloaded).unwrap().metrics, first.metrics);
}
