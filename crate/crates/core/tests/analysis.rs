use std::collections::BTreeMap;

use clues_core::analysis::{
    ablation_compare, analyze, AnalysisConfig, AnalysisInputs, Channel, CodingStatus, Report, ResponseType, Variable,
};
use clues_core::backend::MockBackend;
use clues_core::knowledge::HashedEmbedder;
use clues_core::persona::{AblationConfig, Persona};
use clues_core::profiles::{generate_synthetic_profiles, PopulationKind};
use clues_core::runner::{run_experiment, Experiment, ForecastRecord, RunManifest};
use clues_core::{VignetteId, VignetteSet};

fn records(ablation: AblationConfig, repeats: u32) -> Vec<ForecastRecord> {
    let hh = generate_synthetic_profiles(PopulationKind::Household, 40, 5).unwrap();
    let mut m = RunManifest::new(3, "mock-model", "mock");
    m.repeats = repeats;
    m.ablation = ablation;
    let m = m.with_derived_id();
    let vignettes = VignetteSet::bundled();
    let persona = Persona::default();
    let backend = MockBackend::new(4);
    let knowledge = BTreeMap::new();
    let exp = Experiment {
        manifest: &m,
        households: Some(&hh),
        experts: None,
        vignettes: &vignettes,
        persona: &persona,
        knowledge: &knowledge,
        backend: &backend,
        workers: 4,
    };
    run_experiment(&exp).unwrap().records
}

fn report(records: &[ForecastRecord], config: &AnalysisConfig, label: &str) -> Report {
    let vignettes = VignetteSet::bundled();
    let coder = MockBackend::new(9);
    let embedder = HashedEmbedder::new(128);
    let inputs = AnalysisInputs {
        records,
        vignettes: &vignettes,
        coder: Some((&coder, "coder")),
        embedder: Some(&embedder),
        config,
        workers: 4,
    };
    analyze(&inputs, label).unwrap()
}

#[test]
fn full_pass_over_mock_run() {
    let recs = records(AblationConfig::default(), 3);
    let r = report(&recs, &AnalysisConfig::default(), "full");
    assert_eq!(r.repeats, vec![0]);
    assert_eq!(r.records, 80);
    // 40 households over 4 vignettes, two variables each.
    assert_eq!(r.direction.cells.len(), 8);
    let n: usize = r.direction.cells.iter().filter(|(c, _)| c.2 == Variable::Inflation).map(|(_, c)| c.n()).sum();
    assert_eq!(n, 40);
    assert_eq!(r.response_types.len(), 40);
    assert!(r.response_types.iter().all(|c| c.status == CodingStatus::Coded));
    assert!(r.response_type_shares.values().any(|s| s[&ResponseType::Mechanism] > 0.5));
    // Rise records only, one coding each.
    let rise = recs.iter().filter(|x| x.repeat == 0 && x.scenario == clues_core::Scenario::Rise).count();
    assert_eq!(r.mechanisms.len(), rise);
    assert!(r.mechanisms.iter().all(|m| m.dummies.values().all(|d| *d <= m.any_mechanism)));
    assert_eq!(r.regressions.len(), 4 * 2 * 2);
    assert_eq!(r.semantic.len(), 4);
    assert!(r.semantic.values().all(|s| (0.0..=2.0).contains(&s.score)));
    assert_eq!(r.repeat_similarity.len(), 4);
    assert!(r.repeat_similarity.values().all(|s| s.repeats == vec![0, 1, 2]));
    let text = r.render();
    assert!(text.contains("Forecast directions"));
}

#[test]
fn pooling_repeats_and_selecting_one() {
    let recs = records(AblationConfig::default(), 2);
    let pooled = report(&recs, &AnalysisConfig { pool_repeats: true, ..Default::default() }, "pooled");
    assert_eq!(pooled.repeats, vec![0, 1]);
    assert_eq!(pooled.records, 160);
    let second = report(&recs, &AnalysisConfig { repeat: Some(1), ..Default::default() }, "r1");
    assert_eq!(second.repeats, vec![1]);
    let vignettes = VignetteSet::bundled();
    let inputs = AnalysisInputs {
        records: &recs,
        vignettes: &vignettes,
        coder: None,
        embedder: None,
        config: &AnalysisConfig { repeat: Some(7), ..Default::default() },
        workers: 1,
    };
    assert!(analyze(&inputs, "x").is_err());
}

#[test]
fn bundle_is_deterministic_and_review_overrides_apply() {
    let recs = records(AblationConfig::default(), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = AnalysisConfig::default();
    let a = report(&recs, &cfg, "full");
    let b = report(&recs, &cfg, "full");
    a.write_bundle(&dir.path().join("a"), &recs).unwrap();
    b.write_bundle(&dir.path().join("b"), &recs).unwrap();
    for f in ["report.json", "direction.csv", "regressions.csv", "review_response_types.csv", "diversity.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let json = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(back.direction, a.direction);

    // Reviewer relabels the first answer as a guess and clears one mechanism row.
    let review = dir.path().join("a/review_response_types.csv");
    let mut rdr = csv::Reader::from_path(&review).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let mut rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let last = headers.len() - 1;
    let mut first: Vec<String> = rows[0].iter().map(str::to_string).collect();
    first[last] = "Guess".into();
    rows[0] = csv::StringRecord::from(first);
    let mut w = csv::Writer::from_path(&review).unwrap();
    w.write_record(&headers).unwrap();
    for r in &rows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();

    let mech = dir.path().join("a/review_mechanisms.csv");
    let mut rdr = csv::Reader::from_path(&mech).unwrap();
    let mheaders = rdr.headers().unwrap().clone();
    let mut mrows: Vec<Vec<String>> = rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    let vignette_col = mheaders.iter().position(|h| h == "vignette").unwrap();
    let target = mrows.iter().position(|r| r[vignette_col] == VignetteId::OIL_PRICE).unwrap();
    let ml = mheaders.len() - 1;
    mrows[target][ml] = "oil_dependency_minus".into();
    let mut w = csv::Writer::from_path(&mech).unwrap();
    w.write_record(&mheaders).unwrap();
    for r in &mrows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();

    let reviewed_cfg = AnalysisConfig { response_type_review: Some(review), mechanism_review: Some(mech), ..Default::default() };
    let reviewed = report(&recs, &reviewed_cfg, "reviewed");
    let c = &reviewed.response_types[0];
    assert_eq!(c.status, CodingStatus::Reviewed);
    assert_eq!(c.types.iter().copied().collect::<Vec<_>>(), vec![ResponseType::Guess]);
    let m = reviewed.mechanisms.iter().find(|m| m.status == CodingStatus::Reviewed).unwrap();
    assert_eq!(m.dummies[&Channel::OilDependencyMinus], 1);
    assert_eq!(m.any_mechanism, 1);
    assert_eq!(m.dummies.values().sum::<u8>(), 1);
}

#[test]
fn ablation_compare_identical_and_ablated() {
    let full = records(AblationConfig::default(), 1);
    let cfg = AnalysisConfig::default();
    let a = report(&full, &cfg, "full");
    let same = ablation_compare(&a, &a).unwrap();
    assert!(same.direction.values().chain(same.distribution.values()).all(|d| d.delta == 0.0));
    assert!(same.semantic.values().all(|d| d.delta == 0.0));

    let no_pepm = records(AblationConfig { drop_pepm: true, ..Default::default() }, 1);
    let b = report(&no_pepm, &cfg, "w/o PEPM");
    let delta = ablation_compare(&a, &b).unwrap();
    assert!(delta.render().contains("w/o PEPM"));
    assert!(delta.to_csv().lines().count() > 1);

    let mut fewer = b.clone();
    fewer.semantic.clear();
    assert!(ablation_compare(&a, &fewer).is_err());
}

