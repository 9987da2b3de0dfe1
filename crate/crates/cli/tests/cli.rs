//! Drives the `coldpack` binary end to end on small synthetic datasets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coldpack_cli::sha256_hex;
use serde_json::Value;

const SMALL: [&str; 4] = ["--users", "600", "--courses", "24"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldpack"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            out.insert(
                p.file_name().unwrap().to_string_lossy().into_owned(),
                sha256_hex(&fs::read(&p).unwrap()),
            );
        }
    }
    out
}

fn gen_small(root: &Path, name: &str, seed: &str) -> PathBuf {
    let dir = root.join(name);
    let mut args = vec!["gen", "--out", s(&dir), "--seed", seed];
    args.extend(SMALL);
    ok(&args);
    dir
}

#[test]
fn gen_is_deterministic_and_creates_nested_dirs() {
    let t = tempfile::tempdir().unwrap();
    let a = gen_small(t.path(), "a/deeper/still", "1");
    let b = gen_small(t.path(), "b", "1");
    let c = gen_small(t.path(), "c", "2");
    let (ha, hb) = (hashes(&a), hashes(&b));
    for f in [
        "courses.csv",
        "packages.csv",
        "bookings.csv",
        "holidays.csv",
        "manifest.json",
        "ground_truth.json",
        "labels.csv",
        "run_config.toml",
    ] {
        assert!(ha.contains_key(f), "missing {f}");
    }
    assert_eq!(ha, hb);
    assert_ne!(ha["bookings.csv"], hashes(&c)["bookings.csv"]);
}

#[test]
fn invalid_cluster_mix_exits_2_naming_the_field() {
    let t = tempfile::tempdir().unwrap();
    let out = run(&["gen", "--out", s(t.path()), "--cluster-mix", "0.35,0.35,0.1,0.05,0.05"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cluster_mix"));
}

#[test]
fn config_file_is_read_and_flags_win() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("gen.toml");
    fs::write(&cfg, "seed = 2\n[generator]\nn_users = 600\nn_courses = 24\n").unwrap();
    let from_file = t.path().join("f");
    ok(&["gen", "--config", s(&cfg), "--out", s(&from_file), "--seed", "1"]);
    let direct = gen_small(t.path(), "d", "1");
    assert_eq!(hashes(&from_file)["bookings.csv"], hashes(&direct)["bookings.csv"]);

    fs::write(&cfg, "seeed = 2\n").unwrap();
    let out = run(&["gen", "--config", s(&cfg), "--out", s(&from_file)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_hashed_manifest_and_retrains_identically() {
    let t = tempfile::tempdir().unwrap();
    let data = gen_small(t.path(), "data", "3");
    let before = hashes(&data);
    let (m1, m2) = (t.path().join("m1"), t.path().join("m2"));
    ok(&["train", "--data", s(&data), "--model", s(&m1)]);
    ok(&["train", "--data", s(&data), "--model", s(&m2)]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(m1.join("manifest.json")).unwrap()).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 5);
    let h1 = hashes(&m1);
    for a in artifacts {
        assert_eq!(h1[a["name"].as_str().unwrap()], a["sha256"].as_str().unwrap());
    }
    let h2 = hashes(&m2);
    for a in artifacts {
        let name = a["name"].as_str().unwrap();
        assert_eq!(h1[name], h2[name], "{name}");
    }
    assert!(h1.contains_key("option_weights.csv"));
    assert_eq!(manifest["as_of"], "2013-05-31");
    assert_eq!(hashes(&data), before, "training mutated the dataset");
}

#[test]
fn corrupted_booking_row_aborts_with_row_number() {
    let t = tempfile::tempdir().unwrap();
    let data = gen_small(t.path(), "data", "4");
    let path = data.join("bookings.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen(',', ",x", 1);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = run(&["train", "--data", s(&data), "--model", s(&t.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bookings.csv") && err.contains("row 3"), "{err}");
}

#[test]
fn tune_then_recommend() {
    let t = tempfile::tempdir().unwrap();
    let data = gen_small(t.path(), "data", "5");
    let model = t.path().join("m");
    ok(&["train", "--data", s(&data), "--model", s(&model), "--as-of", "2013-05-16"]);
    let weights: Value = serde_json::from_str(&ok(&["tune", "--model", s(&model), "--n", "5"])).unwrap();
    for setting in ["jaccard", "opt_only", "full_no_r", "full_with_r"] {
        let w = &weights[setting];
        let sum = w["w_p"].as_f64().unwrap() + w["w_o"].as_f64().unwrap() + w["w_c"].as_f64().unwrap();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    let tuning: Value = serde_json::from_str(&fs::read_to_string(model.join("tuning.json")).unwrap()).unwrap();
    for (_, r) in tuning["results"].as_object().unwrap() {
        assert!(r["emp"].as_f64().unwrap() >= r["start_emp"].as_f64().unwrap());
    }

    let labels = fs::read_to_string(data.join("labels.csv")).unwrap();
    let user = labels.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let rec: Value = serde_json::from_str(&ok(&[
        "recommend", "--model", s(&model), "--user", &user, "--window", "2013-06-01:2013-06-15", "--n", "5",
    ]))
    .unwrap();
    let items = rec["items"].as_array().unwrap();
    assert!(items.len() <= 5);
    for i in items {
        assert!(i["components"]["option"].is_number());
    }

    let bad = run(&["recommend", "--model", s(&model), "--user", &user, "--window", "2013-06-15"]);
    assert_eq!(bad.status.code(), Some(2));

    // A validation split that overlaps the training side is refused.
    let val = t.path().join("val.json");
    fs::write(
        &val,
        format!(r#"{{"data": {:?}, "cutoff": "2013-05-31", "horizon": 15}}"#, s(&data)),
    )
    .unwrap();
    assert_eq!(run(&["tune", "--model", s(&model), "--val", s(&val)]).status.code(), Some(2));

    // Tampered artifacts are detected.
    fs::write(model.join("seasonal_index.json"), "{}").unwrap();
    assert_eq!(run(&["tune", "--model", s(&model)]).status.code(), Some(2));
}

#[test]
fn eval_and_single_setting_pipeline_reports() {
    let t = tempfile::tempdir().unwrap();
    let data = gen_small(t.path(), "data", "6");
    let report = t.path().join("report");
    ok(&[
        "eval", "--data", s(&data), "--cutoff", "2013-05-31", "--horizon", "15", "--settings", "all", "--N", "20",
        "--out", s(&report),
    ]);
    for f in ["emp_curves.csv", "emp_curves.svg", "summary.json", "report.json", "run_config.toml"] {
        assert!(report.join(f).is_file(), "missing {f}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert!(summary["improvement_full_with_r_vs_jaccard"].is_number());
    assert!(summary["improvement_full_with_r_vs_opt_only"].is_number());
    let csv = fs::read_to_string(report.join("emp_curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 20);

    let p = t.path().join("p");
    let mut args = vec!["pipeline", "--out", s(&p), "--settings", "jaccard", "--seed", "6"];
    args.extend(SMALL);
    ok(&args);
    let csv = fs::read_to_string(p.join("report/emp_curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("jaccard,")));
    assert!(p.join("report/emp_curves.svg").is_file());
    assert!(p.join("timings.json").is_file());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(p.join("model/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 5);
}

#[test]
fn analysis_commands() {
    let t = tempfile::tempdir().unwrap();
    let data = gen_small(t.path(), "data", "7");
    let profile: Value = serde_json::from_str(&ok(&["profile", "--data", s(&data)])).unwrap();
    assert_eq!(profile["violations"], 0);
    assert!(profile["lifespan_within_31_days"].as_f64().unwrap() >= 0.85);

    let pr = t.path().join("price");
    let summary: Value = serde_json::from_str(&ok(&["price-report", "--data", s(&data), "--out", s(&pr)])).unwrap();
    assert!(summary["r_squared"].as_f64().unwrap() > 0.5);
    let svg = fs::read_to_string(pr.join("price_scatter.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<!-- data"));
    assert!(pr.join("price_predictions.csv").is_file());

    let labels = fs::read_to_string(data.join("labels.csv")).unwrap();
    let user = labels.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let out = t.path().join("ref/explain.json");
    ok(&["explain-ref", "--data", s(&data), "--user", &user, "--date", "2013-06-01", "--out", s(&out)]);
    let e: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let chosen = e["selection"]["course_id"].as_u64().unwrap();
    let best = e["courses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["score"].as_f64().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let chosen_score = e["courses"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["course_id"].as_u64() == Some(chosen))
        .unwrap()["score"]
        .as_f64()
        .unwrap();
    assert!((chosen_score - best).abs() < 1e-9);
    assert!(t.path().join("ref/explain.config.toml").is_file());
}
