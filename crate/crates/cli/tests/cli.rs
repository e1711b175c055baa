mod common;

use std::path::Path;
use std::process::{Command, Output};

use clues_cli::layout::Layout;
use clues_core::analysis::Report;
use clues_core::profiles::{Category, KnowledgeType, PopulationKind};
use clues_core::runner::save_records;
use clues_core::{Scenario, VignetteId};

use common::{record, write_config, write_spf_fixture, ChatServer};

fn clues(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clues"))
        .arg("--config")
        .arg(dir.join("clues.toml"))
        .args(args)
        .env_remove("CLUES_API_KEY")
        .output()
        .expect("spawn clues")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = clues(dir, args);
    assert!(
        out.status.success(),
        "clues {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = clues(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(out.status.code(), Some(code), "clues {args:?}\nstderr:\n{stderr}");
    stderr
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    let path = path.as_ref();
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const HOUSEHOLDS_ONLY: &str = "
[households]
synthetic_count = 8

[experts]
enabled = false
";

#[test]
fn synthetic_construct_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "[paths]\ncorpora = \"@CORPORA@\"\n\n[households]\nsynthetic_count = 40\n\n[experts]\nsynthetic_base_rows = 2\n");
    let stdout = ok(tmp.path(), &["construct"]);
    assert!(stdout.contains("households\t40 agents"), "{stdout}");
    assert!(stdout.contains("experts\t30 agents"), "{stdout}");
    let layout = Layout::new(tmp.path().join("out"));
    for path in [layout.households(), layout.experts(), layout.construction_report()] {
        assert!(path.exists(), "{}", path.display());
    }
    for corpus in KnowledgeType::ALL {
        assert!(layout.index(*corpus).exists());
        assert!(layout.chunks(*corpus).exists());
    }
}

#[test]
fn missing_corpus_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "[paths]\ncorpora = \"nowhere\"\n");
    let stderr = fails(tmp.path(), &["construct"], 3);
    assert!(stderr.contains("nowhere"), "{stderr}");
}

#[test]
fn forecaster_file_yields_fifteen_agents_per_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_spf_fixture(&tmp.path().join("spf.csv"));
    write_config(
        tmp.path(),
        "[paths]\ncorpora = \"@CORPORA@\"\n\n[households]\nenabled = false\n\n[experts]\nfile = \"spf.csv\"\n",
    );
    let stdout = ok(tmp.path(), &["construct"]);
    assert!(stdout.contains("experts\t435 agents"), "{stdout}");
    assert!(stdout.contains("experts[confidence=moderate]\t87"), "{stdout}");
    assert!(stdout.contains("experts[knowledge_type=fomc]\t145"), "{stdout}");
}

#[test]
fn mock_run_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), &format!("{HOUSEHOLDS_ONLY}\n[run]\nrepeats = 2\n"));
    ok(tmp.path(), &["construct"]);
    let stdout = ok(tmp.path(), &["run"]);
    assert!(stdout.contains("32 records"), "{stdout}");
    let records = tmp.path().join("out/runs/full/records.jsonl");
    let first = read(&records);
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 32);
    ok(tmp.path(), &["run"]);
    assert_eq!(first, read(&records));
}

#[test]
fn strict_replay_with_a_cold_cache_stops_with_backend_status() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), &format!("{HOUSEHOLDS_ONLY}\n[paths]\ncache = \"cache.jsonl\"\n"));
    ok(tmp.path(), &["construct"]);
    let stderr = fails(tmp.path(), &["--backend", "replay", "run"], 4);
    assert!(stderr.contains("cache miss"), "{stderr}");
}

#[test]
fn warm_cache_rerun_sends_nothing_and_replay_matches() {
    let server = ChatServer::start(7);
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        &format!(
            "{HOUSEHOLDS_ONLY}\n[paths]\ncache = \"cache.jsonl\"\n\n[backend]\nkind = \"live\"\n\n[backend.live]\nendpoint = \"{}\"\napi_key_env = \"CLUES_TEST_UNSET_KEY\"\nmax_retries = 0\n",
            server.url
        ),
    );
    ok(tmp.path(), &["construct"]);
    ok(tmp.path(), &["run"]);
    let sent = server.requests();
    assert_eq!(sent, 16, "8 households, baseline and shock each");
    let records = tmp.path().join("out/runs/full/records.jsonl");
    let live = read(&records);

    ok(tmp.path(), &["run"]);
    assert_eq!(server.requests(), sent);
    assert_eq!(read(&records), live);

    ok(tmp.path(), &["--backend", "replay", "run"]);
    assert_eq!(server.requests(), sent);
    assert_eq!(read(&records), live);
}

#[test]
fn analyzing_an_empty_results_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HOUSEHOLDS_ONLY);
    std::fs::write(tmp.path().join("empty.jsonl"), "").unwrap();
    let empty = tmp.path().join("empty.jsonl");
    let stderr = fails(tmp.path(), &["analyze", "--results", empty.to_str().unwrap()], 6);
    assert!(stderr.contains("no records"), "{stderr}");
}

fn slugs(stdout: &str) -> Vec<String> {
    stdout.lines().filter_map(|l| l.split_once(": ")).map(|(s, _)| s.to_string()).filter(|s| s.starts_with("no_")).collect()
}

#[test]
fn household_ablation_covers_household_components() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HOUSEHOLDS_ONLY);
    ok(tmp.path(), &["construct"]);
    ok(tmp.path(), &["run"]);
    let stdout = ok(tmp.path(), &["ablate"]);
    assert_eq!(slugs(&stdout), ["no_pcm", "no_pepm", "no_initialization"]);
    let summary = String::from_utf8(read(tmp.path().join("out/ablation/summary.txt"))).unwrap();
    assert!(summary.contains("full vs no_pcm"), "{summary}");
}

#[test]
fn expert_ablation_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "[paths]\ncorpora = \"@CORPORA@\"\n\n[households]\nenabled = false\n\n[experts]\nsynthetic_base_rows = 1\n",
    );
    ok(tmp.path(), &["construct"]);
    ok(tmp.path(), &["run"]);
    let stdout = ok(tmp.path(), &["ablate"]);
    assert_eq!(slugs(&stdout), ["no_kam", "no_pepm", "no_initialization"]);
    let out = tmp.path().join("out");
    let snapshot = |out: &Path| {
        ["ablation/summary.txt", "runs/no_kam/records.jsonl", "runs/no_pepm/records.jsonl", "reports/no_kam/report.json"]
            .map(|p| read(out.join(p)))
    };
    let first = snapshot(&out);
    ok(tmp.path(), &["ablate"]);
    assert_eq!(first, snapshot(&out));
}

#[test]
fn preestimate_reports_each_custom_vignette() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), HOUSEHOLDS_ONLY);
    let assets = tmp.path().join("assets");
    ok(tmp.path(), &["export-assets", assets.to_str().unwrap()]);
    let custom = tmp.path().join("custom");
    for (from, to) in [("oil_price", "gas_price"), ("income_taxes", "sales_taxes")] {
        let target = custom.join(to);
        std::fs::create_dir_all(&target).unwrap();
        for part in ["introduction", "baseline", "rise", "fall"] {
            std::fs::copy(assets.join("vignettes").join(from).join(format!("{part}.txt")), target.join(format!("{part}.txt")))
                .unwrap();
        }
    }
    ok(tmp.path(), &["construct"]);
    let stdout = ok(tmp.path(), &["preestimate", "--vignettes", custom.to_str().unwrap()]);
    assert!(stdout.contains("report bundle written to"), "{stdout}");
    let json = read(tmp.path().join("out/preestimate/report/report.json"));
    let report: Report = serde_json::from_slice(&json).unwrap();
    assert_eq!(report.vignettes(), [VignetteId::new("gas_price"), VignetteId::new("sales_taxes")]);
    let rendered = report.direction.render(&report.vignettes());
    assert_eq!(rendered.lines().filter(|l| l.starts_with("Gas price") || l.starts_with("Sales taxes")).count(), 2, "{rendered}");
}

fn analyze_fixture(records: &[clues_core::runner::ForecastRecord]) -> Report {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), &format!("{HOUSEHOLDS_ONLY}\n[analysis]\ncode_responses = false\n"));
    let results = tmp.path().join("fixture.jsonl");
    save_records(&results, records).unwrap();
    let bundle = tmp.path().join("bundle");
    ok(tmp.path(), &["analyze", "--results", results.to_str().unwrap(), "--bundle", bundle.to_str().unwrap()]);
    serde_json::from_slice(&read(bundle.join("report.json"))).unwrap()
}

#[test]
fn identical_repeats_are_fully_similar() {
    let mut records = Vec::new();
    for repeat in 0..2 {
        for (agent, text) in [("h1", "Oil costs feed into transport prices."), ("h2", "Firms pass fuel costs to buyers.")] {
            let kind = PopulationKind::Household;
            records.push(record(repeat, kind, agent, VignetteId::OIL_PRICE, Scenario::Baseline, (300, 400), ""));
            records.push(record(repeat, kind, agent, VignetteId::OIL_PRICE, Scenario::Rise, (350, 410), text));
        }
    }
    let report = analyze_fixture(&records);
    let sim = &report.repeat_similarity[&(PopulationKind::Household, VignetteId::new(VignetteId::OIL_PRICE))];
    assert_eq!(sim.repeats, [0, 1]);
    assert!((sim.min_similarity - 1.0).abs() < 1e-9, "{}", sim.min_similarity);
}

#[test]
fn single_effect_gives_a_degenerate_distribution() {
    let kind = PopulationKind::Household;
    let records = [
        record(0, kind, "h1", VignetteId::OIL_PRICE, Scenario::Baseline, (300, 400), ""),
        record(0, kind, "h1", VignetteId::OIL_PRICE, Scenario::Fall, (250, 420), "Cheaper fuel."),
    ];
    let report = analyze_fixture(&records);
    let oil = VignetteId::new(VignetteId::OIL_PRICE);
    let (pi, u) = report.distributions.iter().fold((None, None), |acc, ((k, v, var), d)| {
        assert_eq!((*k, v), (kind, &oil));
        match var.as_str() {
            "inflation" => (Some(d.summary.clone()), acc.1),
            _ => (acc.0, Some(d.summary.clone())),
        }
    });
    let (pi, u) = (pi.unwrap(), u.unwrap());
    // Fall answers enter with the sign flipped.
    assert_eq!((pi.n, pi.mean, pi.sd, pi.min, pi.max), (1, 0.5, 0.0, 0.5, 0.5));
    assert_eq!(pi.quantiles, [0.5; 5]);
    assert_eq!((u.mean, u.sd), (-0.2, 0.0));
    assert_eq!(u.quantiles, [-0.2; 5]);
}

#[test]
fn validate_config_requires_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("clues.toml"), "workers = 2\n").unwrap();
    let stderr = fails(tmp.path(), &["validate-config"], 3);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn init_config_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("new.toml");
    ok(tmp.path(), &["init-config", path.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&path).unwrap().contains("seed = "));
    fails(tmp.path(), &["init-config", path.to_str().unwrap()], 2);
}
