use compute_router::config::RunConfig;
use compute_router::cost::CostTable;
use compute_router::harness::pipeline;
use compute_router::jsonl::read_jsonl;
use compute_router::model::TraceRecord;
use compute_router::probe::ProbeModel;

fn small() -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("pipeline.queries", "200"),
        ("pipeline.repeats", "2"),
        ("train.max_epochs", "3"),
        (
            "pipeline.strategies",
            "mv@1, mv@4, bon@4, wbon@8, beam@2x4x40",
        ),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

#[test]
fn written_artifacts_load_back_to_the_same_models() {
    let cfg = small();
    let out = pipeline::run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    pipeline::write_outputs(dir.path(), &cfg, &out).unwrap();

    let traces: Vec<TraceRecord> = read_jsonl(&dir.path().join(pipeline::TRACES_FILE)).unwrap();
    assert_eq!(traces, out.traces);
    assert_eq!(traces.len(), 180 * 5);

    let probe = ProbeModel::load(&dir.path().join(pipeline::PROBE_FILE)).unwrap();
    for q in out.bed.queries() {
        for s in out.bed.set().strategies() {
            assert_eq!(
                probe.predict(q, s).unwrap(),
                out.trained.probe.predict(q, s).unwrap()
            );
        }
    }
    let costs = CostTable::load(&dir.path().join(pipeline::COSTS_FILE)).unwrap();
    assert_eq!(costs, out.trained.costs);
}

#[test]
fn splits_are_disjoint_and_test_queries_are_never_traced() {
    let cfg = small();
    let r = cfg.split_ranges();
    let traces = pipeline::simulate(&cfg).unwrap();
    assert!(traces.iter().all(|t| t.query_id.0 < r.test.start));
    let trained = pipeline::train_stage(&cfg, &traces).unwrap();
    let m = &trained.metrics;
    assert_eq!(
        (m.train_records, m.validation_records, m.calibration_records),
        (140 * 5, 20 * 5, 20 * 5)
    );
    let bed = pipeline::test_bed(&cfg).unwrap();
    assert!(bed.queries().iter().all(|q| r.test.contains(&q.query_id.0)));
    assert_eq!(bed.queries().len(), 20);
}

#[test]
fn traces_from_another_strategy_set_are_rejected() {
    let cfg = small();
    let traces = pipeline::simulate(&cfg).unwrap();
    let mut other = cfg.clone();
    other.set("pipeline.strategies", "mv@1, mv@4").unwrap();
    assert!(matches!(
        pipeline::train_stage(&other, &traces),
        Err(compute_router::error::Error::UnknownStrategy(_))
    ));
}
