//! Coordination loop replays: scripted observation streams driven through the framework with the
//! decided configuration fed back as the next observation's input.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sao_core::rules::check_decision;
use sao_core::{parse_ddm, DecisionSource, DomainDataModel, Framework, Observation, Value, ValueMap};
use tempfile::TempDir;

/// Bands with a hole: 46..=100 vehicles matches no rule and is noise.
const RULES: &str = "\
rules:
  - when: [{ field: vehicles, op: \"<=\", value: 20 }]
    then: { situation: 0 }
  - when: [{ field: vehicles, op: \"<=\", value: 45 }]
    then: { situation: 1 }
  - when: [{ field: vehicles, op: \">\", value: 100 }]
    then: { situation: 2 }
";

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The platoon model with `between` rounds between adaptations, rule files in a fresh directory.
fn setup(between: usize) -> (DomainDataModel, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("situation_rules.yaml"), RULES).unwrap();
    fs::copy(
        configs().join("fallback_rules.yaml"),
        dir.path().join("fallback_rules.yaml"),
    )
    .unwrap();
    let text = fs::read_to_string(configs().join("platoon.ddm.yaml")).unwrap().replace(
        "observations_between_adaptations: 1",
        &format!("observations_between_adaptations: {between}"),
    );
    (parse_ddm(&text).unwrap(), dir)
}

/// Feeds one observation every 30 s (the first at t = 30 s) with the given vehicle counts; metrics are seeded noise.
fn replay(ddm: &DomainDataModel, base: &Path, vehicles: &[i64], seed: u64) -> Framework {
    let mut fw = Framework::new(ddm.clone(), base, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, &n) in vehicles.iter().enumerate() {
        let context: ValueMap = [
            ("vehicles".to_string(), Value::Int(n)),
            ("avg_car_speed".into(), Value::Double(100.0)),
        ]
        .into_iter()
        .collect();
        let metrics: ValueMap = ["throughput", "time_loss", "platoon_utilization", "platoon_time"]
            .iter()
            .map(|m| (m.to_string(), Value::Double(rng.random_range(0.2..0.9))))
            .collect();
        let input = fw.model().current_decision.clone();
        fw.on_observation(Observation {
            timestamp: 30.0 * (i + 1) as f64,
            context,
            input,
            metrics,
        })
        .unwrap();
    }
    fw
}

/// Every round that emitted a decision agrees with the model's situation in that round.
fn situations_agree(fw: &Framework) -> bool {
    fw.model().rounds.iter().all(|r| match r.decision {
        Some(i) => fw.decision_log()[i].situation == r.current_situation,
        None => true,
    })
}

#[test]
fn situation_change_during_wait_is_not_lost() {
    let (ddm, dir) = setup(4);
    // Decisions in situation 0 land on rounds 0, 4, 8; the change at round 10 falls inside the wait.
    let mut vehicles = vec![10; 10];
    vehicles.extend([30; 10]);
    let fw = replay(&ddm, dir.path(), &vehicles, 7);

    let rounds = &fw.model().rounds;
    let decided: Vec<usize> = fw.decision_log().iter().map(|d| d.round).collect();
    assert_eq!(&decided[..3], [0, 4, 8]);
    assert_eq!(rounds[10].current_situation, 1);
    assert_eq!(rounds[11].current_situation, 1);
    assert!(rounds[10].decision.is_none() && rounds[11].decision.is_none());

    let first_after = &fw.decision_log()[3];
    assert_eq!(first_after.round, 12);
    assert_eq!(first_after.situation, 1);
    assert_eq!(first_after.source, DecisionSource::Selection);
    assert!(situations_agree(&fw));
}

#[test]
fn change_on_an_adaptation_round_selects_immediately() {
    let (ddm, dir) = setup(1);
    let mut vehicles = vec![10; 6];
    vehicles.extend([30; 3]);
    let fw = replay(&ddm, dir.path(), &vehicles, 3);
    let at_change = fw.decision_log().iter().find(|d| d.round == 6).unwrap();
    assert_eq!((at_change.situation, at_change.source), (1, DecisionSource::Selection));
    assert!(situations_agree(&fw));
}

#[test]
fn noise_falls_back_and_keeps_counters() {
    let (ddm, dir) = setup(1);
    let mut vehicles = vec![10; 4];
    vehicles.extend([70; 3]);
    vehicles.extend([10; 2]);
    let fw = replay(&ddm, dir.path(), &vehicles, 5);
    let log = fw.decision_log();
    for d in log.iter().filter(|d| (4..7).contains(&d.round)) {
        assert_eq!((d.situation, d.source), (-1, DecisionSource::Fallback));
    }
    let strategy = &log[0].decision.strategy;
    // Four attempts before the noise, two after: counting resumed rather than restarted.
    let back: Vec<_> = log.iter().filter(|d| d.round >= 7).collect();
    assert_eq!(back.len(), 2);
    assert!(back
        .iter()
        .all(|d| d.situation == 0 && &d.decision.strategy == strategy));
    assert_eq!(fw.model().attempts(0, strategy), 6);
    assert!(situations_agree(&fw));
}

#[test]
fn attempts_gate_strategy_selection() {
    let (ddm, dir) = setup(1);
    let min = ddm.selection().min_optimization_attempts;
    let fw = replay(&ddm, dir.path(), &vec![10; min + 1], 11);
    let log = fw.decision_log();
    assert!(log[..min].iter().all(|d| d.source == DecisionSource::Optimization));
    assert_eq!(log[min].source, DecisionSource::Selection);
}

#[test]
fn clustering_warm_up_uses_fallback_until_enough_history() {
    let (ddm, dir) = setup(1);
    let settings = [("k_min", 1i64), ("k_max", 10)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), sao_core::ddm::SettingValue::Number(Value::Int(v))))
        .chain([(
            "features".to_string(),
            sao_core::ddm::SettingValue::Text("vehicles".into()),
        )])
        .collect();
    let ddm = ddm
        .with_detection(sao_core::DetectionAlgorithm::KMeans, settings)
        .unwrap();
    let vehicles: Vec<i64> = (0..25).map(|i| if i % 2 == 0 { 10 } else { 40 }).collect();
    let fw = replay(&ddm, dir.path(), &vehicles, 2);
    let log = fw.decision_log();
    assert!(log[..19].iter().all(|d| d.source == DecisionSource::Fallback));
    // One observation every 30 s: the twentieth, at t = 600 s, is the first with a situation.
    assert_eq!((log[19].round, log[19].timestamp), (19, 600.0));
    assert_eq!(log[19].source, DecisionSource::Optimization);
    assert!(log[19].situation >= 0);
}

#[test]
fn replay_reproduces_the_decision_log() {
    let (ddm, dir) = setup(2);
    let vehicles: Vec<i64> = (0..80).map(|i| [10, 30, 70, 150][(i / 9) % 4]).collect();
    let a = replay(&ddm, dir.path(), &vehicles, 42);
    let b = replay(&ddm, dir.path(), &vehicles, 42);
    assert_eq!(a.decision_log(), b.decision_log());
    assert_eq!(a.store().rows(), b.store().rows());
}

#[test]
fn decision_log_invariants() {
    let (ddm, dir) = setup(3);
    let vehicles: Vec<i64> = (0..120).map(|i| [10, 30, 150, 70, 30][(i / 13) % 5]).collect();
    let fw = replay(&ddm, dir.path(), &vehicles, 9);
    let log = fw.decision_log();
    let between = ddm.selection().observations_between_adaptations;

    assert!(
        log.windows(2).all(|w| w[0].round < w[1].round),
        "one decision per round, in order"
    );
    let planned: Vec<usize> = log
        .iter()
        .filter(|d| d.source != DecisionSource::Fallback)
        .map(|d| d.round)
        .collect();
    assert!(planned.windows(2).all(|w| w[1] - w[0] >= between), "{planned:?}");
    for d in log {
        check_decision(&ddm, &d.decision.strategy, &d.decision.parameters).unwrap();
    }
    for (situation, strategies) in &fw.model().tried {
        for s in strategies {
            assert!(log.iter().any(|d| d.situation == *situation
                && &d.decision.strategy == s
                && d.source != DecisionSource::Fallback));
        }
    }
    assert!(situations_agree(&fw));
}
