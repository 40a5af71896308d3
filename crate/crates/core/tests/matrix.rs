use tipover_core::scenario::{emit_matrix, run_matrix, ScenarioConfig, Variant};

#[test]
fn tipover_duration_ordering_per_row() {
    let mut base = ScenarioConfig::default();
    base.output.plots = false;
    let cells = run_matrix(&base).unwrap();
    for s in ['a', 'b', 'c', 'd'] {
        let duration = |v: Variant| {
            let c = cells.iter().find(|c| c.scenario == s && c.variant == v).unwrap();
            c.result.as_ref().unwrap().metrics.tipover_duration
        };
        let (nf, en, bl) = (
            duration(Variant::NormalForce),
            duration(Variant::Enlarged),
            duration(Variant::Baseline),
        );
        assert!(nf <= en && en <= bl, "row {s}: {nf} {en} {bl}");
    }
    let dir = tempfile::tempdir().unwrap();
    emit_matrix(&cells, dir.path()).unwrap();
    // every cell keeps its derived config next to its results
    for c in &cells {
        let cell = dir.path().join(format!("{}_{}", c.scenario, c.variant.name()));
        assert!(cell.join("config.toml").is_file() && cell.join("state.csv").is_file());
    }
}
