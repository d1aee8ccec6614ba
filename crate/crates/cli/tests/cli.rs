use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dtstar")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn dtstar(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tmpdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dtstar-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn run_reports_reference_cycle_counts() {
    let out = dtstar(&["run", "--scenario", scenario("fig1.json").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let cycles: Vec<(&str, &str)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1], f[4])
        })
        .collect();
    assert_eq!(
        cycles,
        vec![("dtstar", "4"), ("greedy1", "2"), ("greedy2", "3")]
    );
}

#[test]
fn run_writes_artifacts_and_smt() {
    let dir = tmpdir("artifacts");
    let smt = dir.join("model.smt2");
    let out = dtstar(&[
        "run",
        "--scenario",
        scenario("fig1.json").to_str().unwrap(),
        "--algo",
        "dtstar",
        "--out",
        dir.to_str().unwrap(),
        "--emit-smt",
        smt.to_str().unwrap(),
        "--verify",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("scenario,algorithm,objectives,seed,cycles"));
    assert!(csv.contains("fig1,dtstar,full,0,4"));
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run_dtstar_0.json")).unwrap())
            .unwrap();
    assert_eq!(log["trace"].as_array().unwrap().len(), 51);
    assert!(!log["plans"].as_array().unwrap().is_empty());
    let model = std::fs::read_to_string(&smt).unwrap();
    assert!(model.contains("(check-sat)"));
    assert!(model.contains("(maximize cy_count)"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bad_inputs_exit_2() {
    let missing = dtstar(&["run", "--scenario", "/definitely/not/there.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let dir = tmpdir("badjson");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{ \"workspace\": 3 }").unwrap();
    let malformed = dtstar(&["run", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(malformed.status.code(), Some(2));
    let algo = dtstar(&[
        "run",
        "--scenario",
        scenario("fig1.json").to_str().unwrap(),
        "--algo",
        "simulated-annealing",
    ]);
    assert_eq!(algo.status.code(), Some(2));
    let seeds = dtstar(&[
        "run",
        "--scenario",
        scenario("fig1.json").to_str().unwrap(),
        "--seeds",
        "0",
    ]);
    assert_eq!(seeds.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_passes_on_bundled_scenarios() {
    for name in ["fig1.json", "fig1_long.json"] {
        let out = dtstar(&["verify", "--scenario", scenario(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}");
        assert!(stdout(&out).contains("verified"));
    }
}

#[test]
fn dump_graph_emits_reduced_graph() {
    let out = dtstar(&[
        "dump-graph",
        "--scenario",
        scenario("fig1.json").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 10);
    assert_eq!(v["root"], 9);
}

#[test]
fn sweep_objectives_is_deterministic() {
    let w1 = scenario("w1.json");
    let args = [
        "sweep",
        "--scenario",
        w1.to_str().unwrap(),
        "--axis",
        "objectives",
        "--seeds",
        "2",
        "--total-time",
        "200",
    ];
    let a = dtstar(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis,value,algorithm,objectives,seed,cycles"
    );
    assert_eq!(lines.count(), 6); // 3 objective sets x 2 seeds
    assert_eq!(text, stdout(&dtstar(&args)));
}

#[test]
fn sweep_axes_need_generator_scenarios() {
    let out = dtstar(&[
        "sweep",
        "--scenario",
        scenario("fig1.json").to_str().unwrap(),
        "--axis",
        "arrival",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_grid_size_uses_generated_layouts() {
    let out = dtstar(&[
        "sweep",
        "--scenario",
        scenario("w1.json").to_str().unwrap(),
        "--axis",
        "grid-size",
        "--algo",
        "greedy1",
        "--seeds",
        "1",
        "--total-time",
        "150",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    for side in ["20", "30", "40", "50"] {
        assert!(text.contains(&format!("grid-size,{side},greedy1")), "{side}");
    }
}
