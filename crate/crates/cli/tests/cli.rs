use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use newer_core::io::{self, PredictionLine};
use newer_core::predict::ModelDynamics;
use newer_core::{
    extract_subcascades, filter_cascades, fit::assemble_training, fit_newer, BasicPredictor, FeatureMatrix, Hyperparams,
    NewerModel, PartialCascade, PredictOptions, SolverOptions,
};
use serde_json::Value;

fn newer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newer")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = newer(args);
    assert!(out.status.success(), "newer {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// A small simulation with enough repeat spreaders to fit.
struct Fixture {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_path_buf();
        ok(&[
            "simulate", "--preset", "hub-dominated", "--nodes", "3000", "--cascades", "3000", "--history-cascades", "1000",
            "--seed", "3", "--out", &s(&dir.join("sim")),
        ]);
        Self { _tmp: tmp, dir }
    }

    fn p(&self, name: &str) -> String {
        s(&self.dir.join(name))
    }

    fn sim(&self, name: &str) -> String {
        s(&self.dir.join("sim").join(name))
    }

    fn fit(&self, out: &str, extra: &[&str]) -> Value {
        let (c, n, f) = (self.sim("cascades.jsonl"), self.sim("network.csv"), self.sim("features.csv"));
        let out = self.p(out);
        let mut args = vec!["fit", "--cascades", &c, "--network", &n, "--features", &f, "--out", &out];
        args.extend_from_slice(extra);
        ok(&args);
        let report = out.replace(".json", "_report.json");
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap()
    }

    fn predict(&self, model: &str, out: &str, extra: &[&str]) -> Vec<PredictionLine> {
        let (m, c, n, f, o) = (self.p(model), self.sim("cascades.jsonl"), self.sim("network.csv"), self.sim("features.csv"), self.p(out));
        let mut args = vec!["predict", "--model", &m, "--cascades", &c, "--network", &n, "--features", &f, "--out", &o];
        args.extend_from_slice(extra);
        ok(&args);
        io::read_predictions(&o).unwrap()
    }
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["simulate", "--nodes", "1000", "--seed", "7", "--out", &s(&a)]);
    ok(&["simulate", "--nodes", "1000", "--seed", "7", "--out", &s(&b)]);
    let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
    assert!(fa.contains_key("cascades.jsonl") && fa.contains_key("truth.json"));
    assert_eq!(fa, fb);
}

#[test]
fn missing_out_is_a_usage_error() {
    assert_eq!(newer(&["simulate", "--nodes", "10"]).status.code(), Some(2));
}

#[test]
fn invalid_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(&tmp.path().join("x"));
    assert_eq!(newer(&["simulate", "--nodes", "0", "--out", &out]).status.code(), Some(2));
    assert_eq!(newer(&["--threads", "0", "simulate", "--out", &out]).status.code(), Some(2));
}

#[test]
fn unreadable_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = s(&tmp.path().join("none.jsonl"));
    let out = newer(&["fit", "--cascades", &missing, "--network", &missing, "--out", &s(&tmp.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn size_histogram_matches_a_recount() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["simulate", "--out", &s(tmp.path())]);
    let cascades = io::read_cascades(tmp.path().join("cascades.jsonl")).unwrap();
    let mut recount = BTreeMap::new();
    for c in &cascades {
        *recount.entry(c.size()).or_insert(0usize) += 1;
    }
    let text = std::fs::read_to_string(tmp.path().join("size_histogram.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("size,count"));
    let written: BTreeMap<usize, usize> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(written, recount);
}

#[test]
fn fit_trace_is_nonincreasing() {
    let fx = Fixture::new();
    let report = fx.fit("model.json", &[]);
    let trace: Vec<f64> = report["trace"]["objective"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(trace.len() >= 2);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{w:?}");
    }
}

#[test]
fn exponential_model_has_unit_shapes() {
    let fx = Fixture::new();
    fx.fit("exp.json", &["--model", "exponential"]);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(fx.p("exp.json")).unwrap()).unwrap();
    let users = model["users"].as_array().unwrap();
    assert!(!users.is_empty());
    assert!(users.iter().all(|u| u["k"].as_f64() == Some(1.0)));
}

#[test]
fn warm_start_does_not_worsen_the_objective() {
    let fx = Fixture::new();
    let cold = fx.fit("cold.json", &[])["objective"].as_f64().unwrap();
    let warm_from = fx.p("cold.json");
    let warm = fx.fit("warm.json", &["--warm-start", &warm_from])["objective"].as_f64().unwrap();
    assert!(warm <= cold, "{warm} > {cold}");
}

#[test]
fn size_now_equals_observed_size() {
    let fx = Fixture::new();
    fx.fit("model.json", &[]);
    let lines = fx.predict("model.json", "now.jsonl", &["--te", "now", "--observe-prefix", "5"]);
    let cascades = io::read_cascades(fx.sim("cascades.jsonl")).unwrap();
    assert_eq!(lines.len(), cascades.len());
    for (l, c) in lines.iter().zip(&cascades) {
        assert_eq!(l.cascade, c.id);
        assert_eq!(l.final_size, c.size().min(5) as f64);
    }
}

#[test]
fn sampling_tracks_basic_within_epsilon() {
    let fx = Fixture::new();
    fx.fit("model.json", &[]);
    let basic = fx.predict("model.json", "basic.jsonl", &["--mode", "basic", "--observe-prefix", "10"]);
    let sampled = fx.predict("model.json", "sampled.jsonl", &["--mode", "sampling", "--epsilon", "0.1", "--observe-prefix", "10"]);
    for (b, s) in basic.iter().zip(&sampled) {
        let r = s.final_size / b.final_size;
        assert!((1.0 / 1.1..=1.1).contains(&r), "{}: {} vs {}", b.cascade, s.final_size, b.final_size);
    }
}

#[test]
fn outbreak_threshold_defaults_to_1000() {
    let fx = Fixture::new();
    fx.fit("model.json", &[]);
    let a = fx.predict("model.json", "a.jsonl", &["--task", "outbreak", "--observe-prefix", "10"]);
    let b = fx.predict("model.json", "b.jsonl", &["--task", "outbreak", "--observe-prefix", "10", "--threshold", "1000"]);
    let c = fx.predict("model.json", "c.jsonl", &["--task", "outbreak", "--observe-prefix", "10", "--threshold", "20"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn perfect_predictions_score_zero_and_sigma_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["simulate", "--nodes", "500", "--out", &s(tmp.path())]);
    let cascades = io::read_cascades(tmp.path().join("cascades.jsonl")).unwrap();
    let lines: Vec<PredictionLine> = cascades
        .iter()
        .map(|c| PredictionLine {
            cascade: c.id.clone(),
            t_limit: c.last_time(),
            final_size: c.size() as f64,
            outbreak_t: None,
            curve: Vec::new(),
            fallback_users: Vec::new(),
        })
        .collect();
    let preds = tmp.path().join("perfect.jsonl");
    io::write_predictions(&preds, &lines).unwrap();
    let out = tmp.path().join("report");
    ok(&["evaluate", "--predictions", &s(&preds), "--cascades", &s(&tmp.path().join("cascades.jsonl")), "--out", &s(&out)]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rmsle"].as_f64(), Some(0.0));
    assert_eq!(report["precision"].as_f64(), Some(1.0));
    assert_eq!(report["sigma"].as_f64(), Some(0.2));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(5), Some("0"));
}

#[test]
fn seeded_pipeline_reports_are_identical() {
    let run = || {
        let fx = Fixture::new();
        fx.fit("model.json", &[]);
        fx.predict("model.json", "p.jsonl", &["--observe-prefix", "5"]);
        let out = fx.p("report");
        ok(&["evaluate", "--predictions", &fx.p("p.jsonl"), "--cascades", &fx.sim("cascades.jsonl"), "--out", &out]);
        read_dir_bytes(Path::new(&out))
    };
    assert_eq!(run(), run());
}

#[test]
fn saved_model_predicts_like_the_in_memory_fit() {
    let fx = Fixture::new();
    fx.fit("model.json", &[]);
    let lines = fx.predict("model.json", "p.jsonl", &["--observe-prefix", "5"]);

    let cascades = io::read_cascades(fx.sim("cascades.jsonl")).unwrap();
    let net = io::read_network(fx.sim("network.csv")).unwrap();
    let table = io::read_features(fx.sim("features.csv")).unwrap();
    let kept = filter_cascades(&cascades, 5);
    let subs: Vec<_> = extract_subcascades(&kept).unwrap().into_values().collect();
    let (samples, rows) = assemble_training(&subs, |u| table.row(u).map(<[f64]>::to_vec), 5).unwrap();
    let x = FeatureMatrix::new(table.names().to_vec(), rows).unwrap();
    let (model, _) = fit_newer(&samples, &x, Hyperparams::default(), &SolverOptions::default()).unwrap();
    assert_eq!(model, NewerModel::load(fx.p("model.json")).unwrap());

    let dynamics = ModelDynamics::new(&model, Some(&table));
    for (l, c) in lines.iter().zip(&cascades) {
        let pc = PartialCascade::observe_prefix(c, 5, net.node_count()).unwrap();
        let p = BasicPredictor::new(&pc, &dynamics, PredictOptions::default()).unwrap();
        assert_eq!(l.final_size.to_bits(), p.final_size().to_bits(), "{}", c.id);
    }
}
