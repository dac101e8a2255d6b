use std::collections::HashMap;
use std::sync::Arc;

use sao_core::store::validate_observation;
use sao_core::{
    parse_ddm, AdaptationDecision, DomainDataModel, Filter, Observation, ObservationStore, ParameterSetting,
    StoreError, Value, ValueMap,
};

fn ddm() -> Arc<DomainDataModel> {
    Arc::new(parse_ddm(include_str!("../../../configs/platoon.ddm.yaml")).unwrap())
}

fn best_distance(advertising: i64) -> AdaptationDecision {
    AdaptationDecision::new(
        "BestDistance",
        ParameterSetting::new()
            .with("advertising_duration", advertising)
            .with("max_speed_difference", 35.0),
    )
}

fn best_velocity() -> AdaptationDecision {
    AdaptationDecision::new(
        "BestVelocity",
        ParameterSetting::new()
            .with("advertising_duration", 10i64)
            .with("search_distance_front", 600.0)
            .with("search_distance_back", 250.0),
    )
}

fn obs(t: f64, input: AdaptationDecision) -> Observation {
    let context: ValueMap = [
        ("vehicles".to_string(), Value::Int(150)),
        ("avg_car_speed".into(), Value::Double(118.0)),
    ]
    .into_iter()
    .collect();
    let metrics: ValueMap = ["throughput", "time_loss", "platoon_utilization", "platoon_time"]
        .iter()
        .map(|m| (m.to_string(), Value::Double(0.5)))
        .collect();
    Observation {
        timestamp: t,
        context,
        input,
        metrics,
    }
}

#[test]
fn active_duration_accumulates_and_resets() {
    let mut store = ObservationStore::new(ddm());
    let first = store.ingest(obs(0.0, best_distance(10))).unwrap();
    assert_eq!((first.config_active_for, first.situation), (0.0, -1));
    assert_eq!(
        store.ingest(obs(30.0, best_distance(10))).unwrap().config_active_for,
        30.0
    );
    assert_eq!(
        store.ingest(obs(60.0, best_distance(10))).unwrap().config_active_for,
        60.0
    );
    assert_eq!(
        store.ingest(obs(90.0, best_distance(12))).unwrap().config_active_for,
        0.0
    );
    assert_eq!(
        store.ingest(obs(120.0, best_velocity())).unwrap().config_active_for,
        0.0
    );
}

#[test]
fn stored_hypervolume_is_the_gap_product() {
    let mut store = ObservationStore::new(ddm());
    let hv = store.ingest(obs(0.0, best_distance(10))).unwrap().hypervolume;
    assert!((hv - 0.6f64.powi(4)).abs() < 1e-12);
}

#[test]
fn timestamps_must_not_go_backwards() {
    let mut store = ObservationStore::new(ddm());
    store.ingest(obs(30.0, best_distance(10))).unwrap();
    assert!(matches!(
        store.ingest(obs(0.0, best_distance(10))),
        Err(StoreError::NonMonotonicTimestamp { .. })
    ));
    assert_eq!(store.len(), 1);
}

#[test]
fn schema_violations_are_all_reported() {
    let d = ddm();
    let mut bad = obs(0.0, best_distance(10));
    bad.metrics.shift_remove("platoon_time");
    bad.context.insert("vehicles".into(), Value::Double(3.5));
    bad.context.insert("weather".into(), Value::Int(1));
    bad.input = AdaptationDecision::new(
        "BestDistance",
        ParameterSetting::new().with("advertising_duration", 99i64),
    );
    let Err(StoreError::SchemaViolation(issues)) = validate_observation(&d, &bad) else {
        panic!("accepted");
    };
    let text = issues.join("\n");
    for needle in [
        "metrics.platoon_time missing",
        "context.vehicles must be int",
        "context.weather is not declared",
        "input:",
    ] {
        assert!(text.contains(needle), "`{needle}` not in\n{text}");
    }
    let mut store = ObservationStore::new(d);
    assert!(store.ingest(bad).is_err());
    assert!(store.is_empty());
}

#[test]
fn integral_doubles_are_coerced_to_declared_int() {
    let mut o = obs(0.0, best_distance(10));
    o.context.insert("vehicles".into(), Value::Double(150.0));
    let v = validate_observation(&ddm(), &o).unwrap();
    assert_eq!(v.context["vehicles"], Value::Int(150));
}

fn mixed_store() -> ObservationStore {
    let mut store = ObservationStore::new(ddm());
    let inputs = [
        best_distance(10),
        best_velocity(),
        best_velocity(),
        best_distance(10),
        best_velocity(),
    ];
    for (i, input) in inputs.into_iter().enumerate() {
        store.ingest(obs(30.0 * i as f64, input)).unwrap();
    }
    store.assign_situations(&[2, 2, 1, 2, 2]).unwrap();
    store
}

#[test]
fn query_filters_in_time_order() {
    let store = mixed_store();
    let times = |f: &Filter| store.query(f).iter().map(|o| o.base.timestamp).collect::<Vec<_>>();
    assert_eq!(
        times(&Filter::default().situation(2).strategy("BestVelocity")),
        [30.0, 120.0]
    );
    assert_eq!(times(&Filter::default()), [0.0, 30.0, 60.0, 90.0, 120.0]);
    assert_eq!(times(&Filter::default().last_n(2)), [90.0, 120.0]);
    assert_eq!(times(&Filter::default().situation(1).last_n(5)), [60.0]);
}

#[test]
fn relabel_substitutes_and_counts() {
    let mut store = ObservationStore::new(ddm());
    for i in 0..3 {
        store.ingest(obs(30.0 * i as f64, best_distance(10))).unwrap();
    }
    store.assign_situations(&[0, 0, 1]).unwrap();
    let labels = |s: &ObservationStore| s.rows().iter().map(|o| o.situation).collect::<Vec<_>>();

    assert_eq!(store.relabel(&HashMap::from([(0, 0), (1, 1)])), 0);
    assert_eq!(store.relabel(&HashMap::from([(1, 2)])), 1);
    assert_eq!(labels(&store), [0, 0, 2]);
    assert_eq!(store.relabel(&HashMap::from([(0, 2), (2, 0)])), 3);
    assert_eq!(labels(&store), [2, 2, 0]);
}

#[test]
fn query_after_relabel_matches_relabelled_filter() {
    let mut store = mixed_store();
    let before: Vec<f64> = store
        .query(&Filter::default().situation(2))
        .iter()
        .map(|o| o.base.timestamp)
        .collect();
    store.relabel(&HashMap::from([(2, 7), (1, 2)]));
    let after: Vec<f64> = store
        .query(&Filter::default().situation(7))
        .iter()
        .map(|o| o.base.timestamp)
        .collect();
    assert_eq!(before, after);
}

#[test]
fn log_replays_to_the_same_store() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.jsonl");
    let mut store = ObservationStore::with_log(ddm(), &path).unwrap();
    for (i, input) in [best_distance(10), best_distance(10), best_velocity()]
        .into_iter()
        .enumerate()
    {
        store.ingest(obs(30.0 * i as f64, input)).unwrap();
    }
    drop(store);
    let replayed = ObservationStore::load_jsonl(ddm(), &path).unwrap();
    assert_eq!(replayed.len(), 3);
    assert_eq!(replayed.rows()[1].config_active_for, 30.0);

    let snapshot = dir.path().join("snapshot.jsonl");
    let labelled = mixed_store();
    labelled.write_jsonl(&snapshot).unwrap();
    let again = ObservationStore::load_jsonl(ddm(), &snapshot).unwrap();
    assert_eq!(again.rows(), labelled.rows());
}
