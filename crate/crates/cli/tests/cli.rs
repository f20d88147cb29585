use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gar")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gar(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, p: usize, n: usize, seed: u64) {
    ok(&["simulate", "--out-dir", s(dir), "--seed", &seed.to_string(), "--set", &format!("p={p}"), "--set", &format!("n={n}")]);
}

fn round_trip(p: usize) -> Value {
    let tmp = TempDir::new().unwrap();
    let (sim, fit, eval) = (tmp.path().join("sim"), tmp.path().join("fit"), tmp.path().join("eval"));
    simulate(&sim, p, 500, 7);
    ok(&["fit", "--data", s(&sim.join("data.csv")), "--out-dir", s(&fit)]);
    ok(&["eval", "--fit-dir", s(&fit), "--truth-dir", s(&sim), "--out-dir", s(&eval)]);
    json(&eval.join("report.json"))
}

#[test]
fn simulate_fit_eval_round_trip() {
    for p in [20, 50] {
        let report = round_trip(p);
        let f1 = report["metrics"]["f1"].as_f64().unwrap();
        assert!(f1 >= 0.9, "p = {p}: f1 {f1}");
        assert_eq!(report["command"], "eval");
    }
}

#[test]
fn simulate_writes_the_documented_files() {
    let tmp = TempDir::new().unwrap();
    simulate(tmp.path(), 100, 500, 7);
    let csv = fs::read_to_string(tmp.path().join("data.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<String> = (0..100).map(|j| format!("v{j}")).collect();
    assert_eq!(lines.next().unwrap(), header.join(","));
    assert_eq!(lines.count(), 500);
    let truth = json(&tmp.path().join("truth.json"));
    let edges = fs::read_to_string(tmp.path().join("truth_edges.tsv")).unwrap();
    assert_eq!(edges.lines().count() as u64, truth["truth"]["edges"].as_u64().unwrap());
    assert!(tmp.path().join("config.txt").exists());
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    simulate(a.path(), 30, 100, 11);
    simulate(b.path(), 30, 100, 11);
    for file in ["data.csv", "truth.json", "truth_edges.tsv", "config.txt"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn zero_nodes_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = gar(&["simulate", "--out-dir", s(tmp.path()), "--set", "p=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p must be positive"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "p = 10\nbogus = 1\n").unwrap();
    let out = gar(&["simulate", "--config", s(&cfg), "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run.cfg:2") && stderr(&out).contains("bogus"), "{}", stderr(&out));
}

fn small_data(tmp: &Path) -> std::path::PathBuf {
    simulate(&tmp.join("sim"), 12, 200, 3);
    tmp.join("sim").join("data.csv")
}

#[test]
fn echoed_config_reproduces_the_report() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let (first, second) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["fit", "--data", s(&data), "--gamma", "0.7", "--standardize", "--out-dir", s(&first)]);
    ok(&["fit", "--config", s(&first.join("config.txt")), "--out-dir", s(&second)]);
    for file in ["report.json", "edges.tsv", "config.txt"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
    let report = json(&first.join("report.json"));
    assert_eq!(report["config"]["gamma"], "0.7");
    assert_eq!(report["config"]["eps_abs"], "1e-5");
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let (one, three) = (tmp.path().join("one"), tmp.path().join("three"));
    ok(&["fit", "--data", s(&data), "--threads", "1", "--out-dir", s(&one)]);
    ok(&["fit", "--data", s(&data), "--threads", "3", "--out-dir", s(&three)]);
    assert_eq!(fs::read(one.join("report.json")).unwrap(), fs::read(three.join("report.json")).unwrap());
    assert_eq!(json(&one.join("timings.json"))["threads"], 1);
}

#[test]
fn single_values_skip_the_grid() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    ok(&["fit", "--data", s(&data), "--lambda", "0.1", "--eps-thre", "0.01", "--out-dir", s(tmp.path())]);
    let report = json(&tmp.path().join("report.json"));
    let cells = report["fit"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0]["lambda"], 0.1);
    let edges = report["fit"]["edges"].as_u64().unwrap();
    assert_eq!(report["fit"]["n_params"].as_u64().unwrap(), 1 + 12 + edges);
}

#[test]
fn header_is_optional() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let text = fs::read_to_string(&data).unwrap();
    let bare = tmp.path().join("bare.csv");
    fs::write(&bare, text.split_once('\n').unwrap().1).unwrap();
    let args = ["--lambda", "0.1", "--eps-thre", "0.01"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&[&["fit", "--data", s(&data), "--out-dir", s(&a)][..], &args].concat());
    ok(&[&["fit", "--data", s(&bare), "--out-dir", s(&b)][..], &args].concat());
    let (ra, rb) = (json(&a.join("report.json")), json(&b.join("report.json")));
    assert_eq!(ra["data"]["header"], true);
    assert_eq!(rb["data"]["header"], false);
    assert_eq!(ra["fit"], rb["fit"]);
}

fn fit_error(csv: &str, extra: &[&str]) -> (Option<i32>, String) {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("in.csv");
    fs::write(&path, csv).unwrap();
    let out = gar(&[&["fit", "--data", s(&path), "--out-dir", s(tmp.path())][..], extra].concat());
    (out.status.code(), stderr(&out))
}

#[test]
fn ragged_rows_are_reported_with_their_line() {
    let (code, err) = fit_error("a,b,c\n1,2,3\n4,5\n6,7,8\n", &[]);
    assert_eq!(code, Some(1));
    assert!(err.contains("line 3") && err.contains("expected 3 fields, found 2"), "{err}");
}

#[test]
fn non_numeric_cells_are_reported_with_row_and_column() {
    let (code, err) = fit_error("a,b\n1,2\n3,x\n", &[]);
    assert_eq!(code, Some(1));
    assert!(err.contains("line 3, column 2 (b)") && err.contains("\"x\""), "{err}");
}

#[test]
fn constant_column_cannot_be_standardized() {
    let (code, err) = fit_error("a,b\n1,5\n2,5\n3,5\n", &["--standardize"]);
    assert_eq!(code, Some(1));
    assert!(err.contains("column b has zero variance"), "{err}");
}

#[test]
fn a_single_row_is_rejected() {
    let (code, err) = fit_error("a,b\n1,2\n", &[]);
    assert_eq!(code, Some(1));
    assert!(err.contains("at least 2 data rows"), "{err}");
}

#[test]
fn gof_reports_every_draw_and_warns_when_p_exceeds_n() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, 8, 6, 5);
    let out = ok(&["gof", "--data", s(&sim.join("data.csv")), "--bootstrap-b", "5", "--out-dir", s(tmp.path())]);
    assert!(stderr(&out).contains("p = 8 exceeds n = 6"), "{}", stderr(&out));
    let report = json(&tmp.path().join("report.json"));
    let gof = &report["gof"];
    assert_eq!(gof["b"], 5);
    let boot = gof["ell_boot"].as_array().unwrap();
    assert_eq!(boot.len() as u64 + gof["failed"].as_u64().unwrap(), 5);
    let obs = gof["ell_obs"].as_f64().unwrap();
    let hits = boot.iter().filter(|x| x.as_f64().unwrap() <= obs).count();
    assert_eq!(gof["gf"].as_f64().unwrap(), hits as f64 / boot.len() as f64);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn gof_is_reproducible_from_its_seed() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        ok(&["gof", "--data", s(&data), "--bootstrap-b", "4", "--seed", seed, "--out-dir", s(&out)]);
        fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a", "9"), run("b", "9"));
    assert_ne!(run("a", "9"), run("c", "10"));
}

#[test]
fn eval_of_the_truth_itself_is_perfect() {
    // a fit directory assembled from the truth bundle scores perfectly
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, 10, 50, 4);
    let truth = json(&sim.join("truth.json"));
    let fit = tmp.path().join("fit");
    fs::create_dir_all(&fit).unwrap();
    let t = &truth["truth"];
    let report = serde_json::json!({ "fit": { "model": { "theta0": t["theta0"], "v0": t["v0"], "laplacian": t["laplacian"] } } });
    fs::write(fit.join("report.json"), report.to_string()).unwrap();
    fs::copy(sim.join("truth_edges.tsv"), fit.join("edges.tsv")).unwrap();
    let out = tmp.path().join("eval");
    ok(&["eval", "--fit-dir", s(&fit), "--truth-dir", s(&sim), "--out-dir", s(&out)]);
    let m = &json(&out.join("report.json"))["metrics"];
    assert_eq!((m["power"].as_f64(), m["fdr"].as_f64(), m["f1"].as_f64()), (Some(1.0), Some(0.0), Some(1.0)));
    assert!(m["l_err"].as_f64().unwrap() <= 1e-24);
}

#[test]
fn eval_requires_both_directories() {
    let tmp = TempDir::new().unwrap();
    let out = gar(&["eval", "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`fit_dir` is required"), "{}", stderr(&out));
}

#[test]
fn baseline_fit_recovers_the_shipped_truth() {
    let report = round_trip(100);
    let f1 = report["metrics"]["f1"].as_f64().unwrap();
    assert!(f1 >= 0.98, "f1 {f1}");
}
