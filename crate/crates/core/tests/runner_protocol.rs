//! Drives the NDJSON runner protocol against a scripted Python runner.

use std::path::{Path, PathBuf};
use std::time::Duration;

use branchreach::coverage::Arm;
use branchreach::session::{Artifacts, ProcessRunner, RunRequest, RunnerError, TestRunner};
use branchreach::{parse_module, BranchOutcomeId, CoverageReport, ProgramModel};

const MODULE: &str = include_str!("../fixtures/set_definitions.py");

fn fake_runner() -> Vec<String> {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/support/fake_runner.py");
    vec!["python3".into(), script.display().to_string()]
}

struct Setup {
    _dir: tempfile::TempDir,
    module: PathBuf,
    model: ProgramModel,
    runner: ProcessRunner,
}

fn setup() -> Setup {
    let dir = tempfile::tempdir().unwrap();
    let module = dir.path().join("set_definitions.py");
    std::fs::write(&module, MODULE).unwrap();
    let model = parse_module(MODULE, &module).unwrap();
    let artifacts = Artifacts::create(dir.path()).unwrap();
    let map = artifacts.write_branch_map(&model.branch_map()).unwrap();
    let runner = ProcessRunner::new(fake_runner(), &module, &map).with_grace(Duration::from_millis(1500));
    Setup { _dir: dir, module, model, runner }
}

fn request(s: &Setup, id: &str, source: &str, timeout_s: f64) -> RunRequest {
    RunRequest { module_path: s.module.clone(), test_source: source.into(), test_id: id.into(), timeout_s }
}

#[test]
fn passing_test_reports_coverage() {
    let mut s = setup();
    let source = "from set_definitions import clamp\n\ndef test_clamp():\n    assert clamp(5, 1) == 1\n";
    let out = s.runner.run(&request(&s, "t1", source, 5.0)).unwrap();
    assert!(out.wire.syntactically_valid && out.wire.execution_passed);
    let clamp_branch = &s.model.method("clamp").unwrap().branch_sites[0].branch_id;
    assert_eq!(out.wire.covered, [BranchOutcomeId::new(clamp_branch.as_str(), Arm::True)]);
    let report = CoverageReport::from_wire(out.wire, &s.model, source).unwrap();
    assert!(report.invoked_methods.contains("clamp"));
}

#[test]
fn invalid_and_failing_tests() {
    let mut s = setup();
    let bad = s.runner.run(&request(&s, "t1", "def test_(:\n", 5.0)).unwrap();
    assert!(!bad.wire.syntactically_valid && !bad.wire.execution_passed && bad.wire.covered.is_empty());
    let failing = s.runner.run(&request(&s, "t2", "def test_f():\n    assert False\n", 5.0)).unwrap();
    assert!(failing.wire.syntactically_valid && !failing.wire.execution_passed);
}

#[test]
fn reported_errors_and_sequential_requests() {
    let mut s = setup();
    assert!(matches!(
        s.runner.run(&request(&s, "t1", "ERROR", 5.0)),
        Err(RunnerError::Reported(e)) if e == "ModuleImportError"
    ));
    for i in 0..5 {
        let id = format!("seq{i}");
        assert_eq!(s.runner.run(&request(&s, &id, "x = 1\n", 5.0)).unwrap().wire.test_id, id);
    }
}

#[test]
fn hung_runner_is_restarted() {
    let mut s = setup();
    assert!(matches!(s.runner.run(&request(&s, "h", "HANG", 0.1)), Err(RunnerError::Timeout(_))));
    assert!(s.runner.run(&request(&s, "after", "x = 1\n", 5.0)).unwrap().wire.syntactically_valid);
}

#[test]
fn crashed_runner_is_restarted() {
    let mut s = setup();
    assert!(matches!(s.runner.run(&request(&s, "c", "CRASH", 5.0)), Err(RunnerError::Exited)));
    assert!(s.runner.run(&request(&s, "after", "x = 1\n", 5.0)).is_ok());
}

#[test]
fn branch_map_json_shape() {
    let s = setup();
    let json = serde_json::to_value(s.model.branch_map()).unwrap();
    let first = &json["branches"][0];
    let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["branch_id", "false_target_line", "kind", "line", "method", "true_target_line"]);
    assert_eq!(first["kind"], "if");
    assert_eq!(json["branches"].as_array().unwrap().len(), 4);
}
