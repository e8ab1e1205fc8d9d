use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cewb"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cewb")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_empty_scenario_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["run", scenario("empty.json").to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(dir.path().join("trace.jsonl").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn fault_scenario_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", scenario("fault.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let all = text(&o.stdout) + &text(&o.stderr);
    assert!(all.contains("stage 25"), "{all}");
}

#[test]
fn least_demo_short_run_and_rerun_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = scenario("least-demo.json");
    for d in [&a, &b] {
        let o = run(&["run", s.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--stages", "300"]);
        assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    }
    for f in ["trace.jsonl", "report.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_scenario_is_invalid_input() {
    let o = run(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn classify_groups() {
    for (g, tag) in [("s3-on-3", "FinitelyManyActions"), ("swap-01", "FinitelyManyActions")] {
        let o = run(&["classify", g]);
        assert_eq!(code(&o), 0, "{g}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["tag"], tag, "{g}");
    }
    assert_eq!(code(&run(&["classify", "no-such-group"])), 2);
}

#[test]
fn reduce_maps() {
    let o = run(&["reduce", "shift-embed", "0", "0"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["members"], serde_json::json!([]));

    let o = run(&["reduce", "rn-step", "2", "3"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let members: Vec<u64> = serde_json::from_value(v["members"].clone()).unwrap();
    assert!(!members.is_empty());

    assert_eq!(code(&run(&["reduce", "esetn-to-eqce", "1", "3"])), 0);
    assert_eq!(code(&run(&["reduce", "no-such-map", "1", "3"])), 2);
    assert_eq!(code(&run(&["reduce", "shift-embed", "0", "999"])), 2);
}

#[test]
fn verify_rejects_corrupted_catalogs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "bad-table",
            r#"[{"name":"bad-table","generators":[{"table":{"forward":{"0":1,"1":0},"backward":{"0":0,"1":1}}}],"identity_oracle":"finite-support"}]"#,
            "catalog-valid[bad-table]",
        ),
        (
            "wrong-oracle",
            r#"[{"name":"wrong-oracle","generators":[{"cycles":[[0,1]]},{"cycles":[[0,1,2]]}],"identity_oracle":"finite-support","orbit_oracle":"block-pairs"}]"#,
            "orbit-oracle-sound[wrong-oracle]",
        ),
    ];
    for (name, body, needle) in cases {
        let p = dir.path().join(format!("{name}.json"));
        std::fs::write(&p, body).unwrap();
        let o = run(&["verify", "lemma-2-4", "--catalog", p.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{}", text(&o.stderr));
        assert!(text(&o.stderr).contains(needle), "{}", text(&o.stderr));
    }
}

#[test]
fn verify_accepts_sound_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s3.json");
    std::fs::write(
        &p,
        r#"[{"name":"s3","generators":[{"cycles":[[0,1]]},{"cycles":[[0,1,2]]}],"identity_oracle":"finite-support","orbit_oracle":"closure"}]"#,
    )
    .unwrap();
    let o = run(&["verify", "lemma-2-4", "--catalog", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
}

#[test]
fn verify_unknown_suite() {
    assert_eq!(code(&run(&["verify", "no-such-suite"])), 2);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}
