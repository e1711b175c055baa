//! Perceived effects: shock forecast minus baseline forecast.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{ForecastRecord, Pct};
use super::RunnerError;
use crate::profiles::PopulationKind;
use crate::{Scenario, VignetteId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub repeat: u32,
    pub kind: PopulationKind,
    pub agent_id: String,
    pub vignette: VignetteId,
    /// Rise or fall; kept after merging so the sign flip can be audited.
    pub scenario: Scenario,
    pub d_inflation: Pct,
    pub d_unemployment: Pct,
}

/// Δ = shock − baseline for one (agent, vignette, repeat).
pub fn perceived_effect(baseline: &ForecastRecord, shock: &ForecastRecord) -> Result<Effect, RunnerError> {
    let mismatch = |what: &str| RunnerError::EffectMismatch(format!(
        "{what}: baseline {}/{}/{} vs shock {}/{}/{}",
        baseline.agent_id, baseline.vignette, baseline.repeat, shock.agent_id, shock.vignette, shock.repeat
    ));
    if baseline.agent_id != shock.agent_id
        || baseline.vignette != shock.vignette
        || baseline.repeat != shock.repeat
        || baseline.kind != shock.kind
    {
        return Err(mismatch("keys differ"));
    }
    if baseline.scenario != Scenario::Baseline || !shock.scenario.is_shock() {
        return Err(mismatch("expected a baseline and a shock record"));
    }
    let values = |r: &ForecastRecord| match (r.is_ok(), r.inflation, r.unemployment) {
        (true, Some(pi), Some(u)) => Ok((pi, u)),
        _ => Err(mismatch("record has no usable forecast")),
    };
    let (pi0, u0) = values(baseline)?;
    let (pi1, u1) = values(shock)?;
    Ok(Effect {
        repeat: shock.repeat,
        kind: shock.kind,
        agent_id: shock.agent_id.clone(),
        vignette: shock.vignette.clone(),
        scenario: shock.scenario,
        d_inflation: pi1 - pi0,
        d_unemployment: u1 - u0,
    })
}

/// Negates fall-tagged effects so they read as rise effects. Rise effects are
/// untouched; applying the merge twice restores the fall values.
pub fn merge_fall_into_rise(effects: &[Effect]) -> Vec<Effect> {
    effects
        .iter()
        .map(|e| match e.scenario {
            Scenario::Fall => Effect { d_inflation: -e.d_inflation, d_unemployment: -e.d_unemployment, ..e.clone() },
            _ => e.clone(),
        })
        .collect()
}

/// Pairs every usable shock record with its baseline. Pairs where either side
/// failed to parse are skipped. Output is in record-key order.
pub fn effects_from_records(records: &[ForecastRecord]) -> Vec<Effect> {
    let mut baselines = BTreeMap::new();
    let mut shocks = Vec::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        if r.scenario == Scenario::Baseline {
            baselines.insert((r.repeat, r.kind, &r.vignette, r.agent_id.as_str()), r);
        } else {
            shocks.push(r);
        }
    }
    shocks.sort_by(|a, b| a.key().cmp(&b.key()));
    shocks
        .into_iter()
        .filter_map(|s| {
            let b = baselines.get(&(s.repeat, s.kind, &s.vignette, s.agent_id.as_str()))?;
            perceived_effect(b, s).ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::record::RecordStatus;

    fn rec(scenario: Scenario, pi: i64, u: i64) -> ForecastRecord {
        ForecastRecord {
            run_id: "r".into(),
            repeat: 0,
            agent_id: "a".into(),
            kind: PopulationKind::Household,
            vignette: VignetteId::new(VignetteId::OIL_PRICE),
            scenario,
            status: RecordStatus::Ok,
            inflation: Some(Pct(pi)),
            unemployment: Some(Pct(u)),
            considerations: scenario.is_shock().then(|| "x".to_string()),
            reasoning_content: None,
            response_hash: String::new(),
            attempts: 1,
            warnings: vec![],
            error: None,
        }
    }

    #[test]
    fn subtraction_and_merge() {
        let e = perceived_effect(&rec(Scenario::Baseline, 290, 410), &rec(Scenario::Rise, 350, 430)).unwrap();
        assert_eq!((e.d_inflation, e.d_unemployment), (Pct(60), Pct(20)));
        let same = perceived_effect(&rec(Scenario::Baseline, 290, 410), &rec(Scenario::Fall, 290, 410)).unwrap();
        assert_eq!((same.d_inflation, same.d_unemployment), (Pct(0), Pct(0)));
        let f = perceived_effect(&rec(Scenario::Baseline, 290, 410), &rec(Scenario::Fall, 240, 400)).unwrap();
        assert_eq!((f.d_inflation, f.d_unemployment), (Pct(-50), Pct(-10)));
        let merged = merge_fall_into_rise(&[e.clone(), f]);
        assert_eq!((merged[1].d_inflation, merged[1].d_unemployment), (Pct(50), Pct(10)));
        assert_eq!(merged[1].scenario, Scenario::Fall);
        assert_eq!(merged[0], e);
    }

    #[test]
    fn mismatched_keys_are_errors() {
        let mut s = rec(Scenario::Rise, 300, 400);
        s.agent_id = "b".into();
        assert!(perceived_effect(&rec(Scenario::Baseline, 290, 410), &s).is_err());
        let mut s = rec(Scenario::Rise, 300, 400);
        s.repeat = 1;
        assert!(perceived_effect(&rec(Scenario::Baseline, 290, 410), &s).is_err());
        assert!(perceived_effect(&rec(Scenario::Rise, 290, 410), &rec(Scenario::Rise, 1, 1)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn merge_is_involution_on_fall_and_identity_on_rise(
            vals in proptest::collection::vec((proptest::bool::ANY, -1000i64..1000, -1000i64..1000), 0..30)
        ) {
            let effects: Vec<Effect> = vals.iter().map(|&(fall, a, b)| {
                let scenario = if fall { Scenario::Fall } else { Scenario::Rise };
                let mut e = perceived_effect(&rec(Scenario::Baseline, 0, 0), &rec(scenario, 0, 0)).unwrap();
                e.d_inflation = Pct(a);
                e.d_unemployment = Pct(b);
                e
            }).collect();
            let once = merge_fall_into_rise(&effects);
            for (e, m) in effects.iter().zip(&once) {
                if e.scenario == Scenario::Rise {
                    proptest::prop_assert_eq!(e, m);
                } else {
                    proptest::prop_assert_eq!(m.d_inflation, -e.d_inflation);
                }
            }
            proptest::prop_assert_eq!(merge_fall_into_rise(&once), effects);
        }
    }
}
