use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compcomp")).args(args).output().unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_bundled_elastic_net() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, rep) = (dir.path().join("trace.csv"), dir.path().join("report.json"));
    let out = bin(&["solve", "--spec", s(&data("elastic_net.json")), "--trace", s(&trace), "--report", s(&rep)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&rep);
    let iters = r["iterations"].as_u64().unwrap() as usize;
    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,a_k,A_k,M_k,f,psi,obj,grad_dual_norm,doublings,elapsed_ms"));
    assert_eq!(lines.count(), iters + 1);
    for key in ["final_objective", "doublings", "elapsed_ms"] {
        assert!(r.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn solve_budget_exhausted_exits_2() {
    let out = bin(&["solve", "--spec", s(&data("elastic_net.json")), "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1,2\n3,x\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "1\n2\n").unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"builder":"elastic_net","matrix":"a.csv","response":"b.csv","lambda1":0.1}"#).unwrap();
    let out = bin(&["solve", "--spec", s(&spec)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.csv") && err.contains("line 2, column 3"), "{err}");
}

#[test]
fn dimension_mismatch_names_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1,2\n3,4\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "1\n2\n3\n").unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"builder":"bridge","matrix":"a.csv","response":"b.csv","lambda":0.1,"p":1.5}"#).unwrap();
    let out = bin(&["solve", "--spec", s(&spec)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.csv") && err.contains("b.csv"), "{err}");
}

#[test]
fn emitted_spec_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (emitted, r1, r2) = (dir.path().join("copy.json"), dir.path().join("r1.json"), dir.path().join("r2.json"));
    let spec = data("bridge.json");
    assert_eq!(bin(&["solve", "--spec", s(&spec), "--emit-spec", s(&emitted), "--report", s(&r1)]).status.code(), Some(0));
    assert_eq!(bin(&["solve", "--spec", s(&emitted), "--report", s(&r2)]).status.code(), Some(0));
    assert_eq!(report(&r1)["spec_hash"], report(&r2)["spec_hash"]);
    assert_eq!(report(&r1)["final_objective"], report(&r2)["final_objective"]);
}

#[test]
fn gradnorm_commands() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("g.json");
    let spec = data("correlated.json");
    let out = bin(&["gradnorm", "--spec", s(&spec), "--epsilon", "1e-4", "--report", s(&rep)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&rep);
    assert!(r["final_f_grad_norm"].as_f64().unwrap() <= 1e-4);
    assert!(r.get("restarts").is_some() && r.get("final_composite_grad_norm").is_some());
    let capped = bin(&["gradnorm", "--spec", s(&spec), "--max-restarts", "0", "--r-init", "1e-9"]);
    assert_eq!(capped.status.code(), Some(2));
}

#[test]
fn gradnorm_zero_gradient_is_immediate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1,0\n0,1\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "0\n0\n").unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"builder":"correlated","matrix":"a.csv","response":"b.csv","p_star":2.0}"#).unwrap();
    let rep = dir.path().join("g.json");
    assert_eq!(bin(&["gradnorm", "--spec", s(&spec), "--report", s(&rep)]).status.code(), Some(0));
    assert_eq!(report(&rep)["grad_queries"], 1);
}

#[test]
fn lb_prints_count_and_regime() {
    let out = bin(&["lb", "--p", "2", "--kappa", "2", "--l", "200", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("count=3 "));
    let out = bin(&["lb", "--p", "1.5", "--kappa", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("regime=none"));
}

#[test]
fn hard_run_writes_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    assert_eq!(bin(&["hard-run", "--m", "8", "--transcript", s(&path)]).status.code(), Some(0));
    let t = report(&path);
    assert_eq!(t["instance"]["signs"].as_array().unwrap().len(), 8);
    assert_eq!(t["guarantee_holds"], true);
}

#[test]
fn reference_uses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let spec = data("bridge.json");
    let args = ["reference", "--spec", s(&spec), "--tol", "1e-8", "--cache", s(&cache)];
    let first = bin(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    let second = bin(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn selfcheck_fault_injection_fails() {
    let out = bin(&["selfcheck", "--inject-fault", "duality-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("spaces         FAIL"));
}

#[test]
fn unknown_flag_is_input_error() {
    assert_eq!(bin(&["solve", "-e", "1"]).status.code(), Some(1));
}
