use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn buckle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_buckle")).args(args).output().expect("spawn buckle")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", stderr(out));
    serde_json::from_str(stdout(out).trim()).unwrap()
}

fn generate(dir: &Path, args: &[&str]) -> String {
    let path = dir.join(format!("{}.json", args.join("_")));
    let p = path.to_str().unwrap().to_string();
    let mut full = vec!["generate", "-o", &p];
    full.extend_from_slice(args);
    let out = buckle(&full);
    assert!(out.status.success(), "{}", stderr(&out));
    p
}

#[test]
fn generated_models_have_expected_sizes() {
    let dir = tempdir().unwrap();
    for (args, nodes, elements, groups) in [
        (&["--kind", "von_mises"][..], 3, 2, 1),
        (&["--kind", "star_dome"][..], 13, 24, 3),
        (&["--kind", "star_dome", "--rings", "5"][..], 61, 156, 9),
        (&["--kind", "truss_column"][..], 34, 123, 10),
    ] {
        let path = generate(dir.path(), args);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), nodes, "{args:?}");
        assert_eq!(v["elements"].as_array().unwrap().len(), elements, "{args:?}");
        assert_eq!(v["groups"].as_array().unwrap().len(), groups, "{args:?}");
    }
}

#[test]
fn generator_overrides_apply() {
    let dir = tempdir().unwrap();
    let path = generate(dir.path(), &["--kind", "von_mises", "--rise", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["nodes"][1][2].as_f64(), Some(0.5));
}

#[test]
fn model_file_round_trip_is_byte_identical() {
    let dir = tempdir().unwrap();
    let first = generate(dir.path(), &["--kind", "star_dome"]);
    let second = dir.path().join("again.json");
    let out = buckle(&["generate", "--kind", "star_dome", "-o", second.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let parsed: buckle_core::model::ModelFile = serde_json::from_str(&fs::read_to_string(&first).unwrap()).unwrap();
    let reserialised = buckle_core::json::to_canonical_string(&parsed).unwrap() + "\n";
    assert_eq!(reserialised.as_bytes(), &fs::read(&first).unwrap()[..]);
    let from_file = json(&buckle(&["buckle", "-m", &first]));
    let from_kind = json(&buckle(&["buckle", "--kind", "star_dome"]));
    assert_eq!(from_file, from_kind);
}

#[test]
fn von_mises_buckles_at_a_limit_point() {
    let v = json(&buckle(&["buckle", "--kind", "von_mises"]));
    assert!(v["lambda_c"].as_f64().unwrap() > 0.0);
    assert_eq!(v["kind"], "limit");
    assert_eq!(v["x"].as_array().unwrap().len(), 9);
    assert_eq!(v["phi"].as_array().unwrap().len(), 9);
}

#[test]
fn tiny_imperfections_reproduce_the_perfect_load() {
    let v = json(&buckle(&["stats", "--kind", "von_mises", "--sigma-beta", "1e-12", "--samples", "8"]));
    let mean = v["mean"].as_f64().unwrap();
    let std = v["std"].as_f64().unwrap();
    assert!(std <= 1e-8 * mean, "std {std} mean {mean}");
    assert!((mean - v["lambda_c0"].as_f64().unwrap()).abs() <= 1e-8 * mean);
    assert_eq!(v["n_samples"], 8);
    assert_eq!(v["flagged"], 0);
}

#[test]
fn stats_writes_samples_and_depends_on_seed() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let a = json(&buckle(&["stats", "--kind", "von_mises", "--samples", "8", "--csv", csv.to_str().unwrap()]));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beta0,lambda_c");
    assert_eq!(lines.len(), 9);
    let b = json(&buckle(&["stats", "--kind", "von_mises", "--samples", "8", "--seed", "5"]));
    assert_ne!(a["mean"], b["mean"]);
    let odd = buckle(&["stats", "--kind", "von_mises", "--samples", "7"]);
    assert_eq!(odd.status.code(), Some(2));
}

#[test]
fn unknown_key_is_an_input_error() {
    let dir = tempdir().unwrap();
    let path = generate(dir.path(), &["--kind", "von_mises"]);
    let text = fs::read_to_string(&path).unwrap().replacen("{", "{\"colour\":1,", 1);
    fs::write(&path, text).unwrap();
    let out = buckle(&["buckle", "-m", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let dir = tempdir().unwrap();
    let path = generate(dir.path(), &["--kind", "von_mises"]);
    assert_eq!(buckle(&["buckle"]).status.code(), Some(2));
    assert_eq!(buckle(&["buckle", "-m", &path, "--kind", "von_mises"]).status.code(), Some(2));
    assert_eq!(buckle(&["buckle", "--kind", "geodesic"]).status.code(), Some(2));
    assert_eq!(buckle(&["buckle", "-m", "/nonexistent/model.json"]).status.code(), Some(2));
    let out = buckle(&["stats", "-m", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigma-beta"));
    fs::write(&path, "{\"nodes\": [").unwrap();
    assert_eq!(buckle(&["buckle", "-m", &path]).status.code(), Some(2));
}

#[test]
fn analyze_dumps_the_path() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let v = json(&buckle(&["analyze", "--kind", "von_mises", "--steps", "40", "--dump-path", csv.to_str().unwrap()]));
    let text = fs::read_to_string(&csv).unwrap();
    let rows = text.lines().count() - 1;
    assert_eq!(rows as u64, v["points"].as_u64().unwrap());
    assert!(text.lines().next().unwrap().contains("lambda"));
    assert!(v["lambda_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn optimize_is_deterministic() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let args = [
        "optimize", "--kind", "star_dome", "--alpha", "0.5", "--budget", "14", "--seed", "11", "--samples", "8",
        "--out-dir", out_dir,
    ];
    let a = json(&buckle(&args));
    let history = fs::read_to_string(a["history_csv_path"].as_str().unwrap()).unwrap();
    assert_eq!(history.lines().count(), 15);
    assert!(history.starts_with("index,status,g,mean,std,a0,a1,a2"));
    let b = json(&buckle(&args));
    assert_eq!(a, b);
    assert_eq!(a["a_opt"].as_array().unwrap().len(), 3);
    assert_eq!(a["evaluations"], 14);
}

#[test]
fn pareto_is_deterministic_across_thread_counts() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let run = |threads: &str| {
        let out = buckle(&[
            "pareto", "--kind", "star_dome", "--alphas", "1,0", "--budget", "11", "--seed", "2", "--samples", "8",
            "--threads", threads, "--out-dir", out_dir,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    let one = run("1");
    assert_eq!(one, run("2"));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[0], "alpha,mean,std,a0,a1,a2");
    assert!(lines[1].starts_with("0.0,"));
    assert!(lines[2].starts_with("1.0,"));
    let bad = buckle(&["pareto", "--kind", "star_dome", "--alphas", "1.5", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}
