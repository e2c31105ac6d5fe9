use lassoinf::cli::{run, CliOutput};
use serde_json::Value;
use std::path::Path;

fn lassoinf(args: &[&str]) -> CliOutput {
    let mut argv = vec!["lassoinf"];
    argv.extend_from_slice(args);
    run(argv)
}

fn simulate(dir: &Path, kind: &str, extra: &[&str]) -> String {
    let out = dir.join(format!("{kind}.csv")).to_string_lossy().into_owned();
    let mut args = vec!["simulate", kind, "--seed", "7", "--out", out.as_str()];
    args.extend_from_slice(extra);
    let res = lassoinf(&args);
    assert_eq!(res.code, 0, "{}", res.stderr);
    out
}

fn json(res: &CliOutput) -> Value {
    assert_eq!(res.code, 0, "{}", res.stderr);
    let v: Value = serde_json::from_str(&res.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    v
}

#[test]
fn fit_recovers_sparse_support() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(dir.path(), "sparse", &["--n", "200", "--p", "50", "--s", "3"]);
    let v = json(&lassoinf(&["fit", "--input", &csv, "--outcome", "y", "--post", "--format", "json"]));
    let text = v.to_string();
    for name in ["x1", "x2", "x3"] {
        assert!(text.contains(&format!("\"{name}\"")), "{name} missing from {text}");
    }
    let table = lassoinf(&["fit", "--input", &csv, "--outcome", "y"]);
    assert_eq!(table.code, 0);
    assert!(table.stdout.contains("Number of selected variables"));
}

#[test]
fn json_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(dir.path(), "causes", &["--n", "100", "--p1", "5", "--p2", "10"]);
    let args = ["effects", "--input", &csv, "--outcome", "y", "--targets", "d1..d5", "--joint", "--format", "json", "--seed", "3"];
    let one = lassoinf(&[&["--threads", "1"], &args[..]].concat());
    let four = lassoinf(&[&["--threads", "4"], &args[..]].concat());
    let again = lassoinf(&[&["--threads", "4"], &args[..]].concat());
    json(&one);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(four.stdout, again.stdout);
}

#[test]
fn iv_treat_and_supscore_run() {
    let dir = tempfile::tempdir().unwrap();
    let plm = simulate(dir.path(), "plm", &["--n", "300", "--p", "20"]);
    let v = json(&lassoinf(&["effects", "--input", &plm, "--outcome", "y", "--targets", "d", "--method", "double-selection", "--format", "json"]));
    assert!(v.to_string().contains("\"d\""));

    let v = json(&lassoinf(&["iv", "--input", &plm, "--outcome", "y", "--treatment", "d", "--instruments", "x1,x2", "--format", "json"]));
    assert!(v.to_string().contains("estimate"));

    let v = json(&lassoinf(&["supscore", "--input", &plm, "--outcome", "y", "--controls", "x1..x10", "--format", "json"]));
    assert!(v.to_string().contains("p_value"));

    // binary treatment built from the sign of a control
    let bin = dir.path().join("bin.csv");
    let mut rdr = csv::Reader::from_path(&plm).unwrap();
    let mut w = csv::Writer::from_path(&bin).unwrap();
    let mut header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    header.push("t".into());
    w.write_record(&header).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let mut row: Vec<String> = rec.iter().map(String::from).collect();
        let x1: f64 = rec[2].parse().unwrap();
        row.push(if x1 > 0.0 { "1" } else { "0" }.into());
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    let bin = bin.to_string_lossy().into_owned();
    for effect in ["ate", "atet"] {
        let v = json(&lassoinf(&["treat", "--input", &bin, "--outcome", "y", "--treatment", "t", "--effect", effect, "--controls", "x2..x20", "--format", "json"]));
        assert!(v.to_string().contains("se"));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(lassoinf(&["--help"]).code, 0);
    assert_eq!(lassoinf(&["fit", "--help"]).code, 0);
    assert_eq!(lassoinf(&["frobnicate"]).code, 2);
    assert_eq!(lassoinf(&["fit", "--outcome", "y"]).code, 2);

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv").to_string_lossy().into_owned();
    let res = lassoinf(&["fit", "--input", &missing, "--outcome", "y"]);
    assert_eq!(res.code, 1);
    assert!(!res.stderr.is_empty());

    let csv = simulate(dir.path(), "sparse", &["--n", "50", "--p", "5"]);
    let res = lassoinf(&["fit", "--input", &csv, "--outcome", "nosuch"]);
    assert_ne!(res.code, 0);
    assert!(res.stderr.contains("nosuch"));
    assert_eq!(lassoinf(&["fit", "--input", &csv, "--outcome", "y", "--c", "-1"]).code, 2);
}
