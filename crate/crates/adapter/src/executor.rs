//! Adaptation decisions to simulator commands.

use sao_core::AdaptationDecision;
use sao_platoon::{Simulator, StrategyConfig, StrategyError};

/// Switches the simulator to the decision's configuration at the next step boundary. Returns
/// whether anything changed; on error the running configuration is kept.
pub fn execute(sim: &mut Simulator, decision: &AdaptationDecision) -> Result<bool, StrategyError> {
    let config = StrategyConfig::new(&decision.strategy, &decision.parameters)?;
    if *sim.config() == config {
        return Ok(false);
    }
    sim.apply(config);
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sao_platoon::{setting, Scenario, SpawnProfile, StrategyKind};

    fn sim() -> Simulator {
        let text = r#"
name: t
seed: 1
duration_h: 1
dt_s: 0.5
window_s: 30
segment_length_m: 1000
lanes: 4
truck_share: 0
platooning_share: 1
car_max_kmh: 120
truck_max_kmh: 80
car_desired_kmh: { mean: 100, sd: 1 }
truck_desired_kmh: { mean: 80, sd: 1 }
platoon_gap_m: 10
leave_tolerance_kmh: 15
profile: { name: weekday, rates: [[0, 0]] }
"#;
        let s: Scenario = Scenario::parse(text).unwrap();
        let _: &SpawnProfile = &s.profile;
        Simulator::new(s, StrategyConfig::best_distance())
    }

    #[test]
    fn switch_then_noop() {
        let mut sim = sim();
        let d = AdaptationDecision::new(
            "BestVelocity",
            setting(&[
                ("advertising_duration", 10.0),
                ("search_distance_front", 600.0),
                ("search_distance_back", 250.0),
            ]),
        );
        assert!(execute(&mut sim, &d).unwrap());
        sim.step(0.5);
        assert_eq!(sim.config().kind, StrategyKind::BestVelocity);
        assert_eq!(sim.config().params.search_distance_front, 600.0);
        assert!(!execute(&mut sim, &d).unwrap());
    }

    #[test]
    fn unknown_strategy_keeps_previous() {
        let mut sim = sim();
        let d = AdaptationDecision::new("Convoy", setting(&[]));
        assert_eq!(
            execute(&mut sim, &d).unwrap_err(),
            StrategyError::UnknownStrategy("Convoy".into())
        );
        sim.step(0.5);
        assert_eq!(sim.config().kind, StrategyKind::BestDistance);
    }
}
