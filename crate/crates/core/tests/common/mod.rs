//! Helpers shared by integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use branchreach::deps::{analyze_dependencies, ContextPolicy, DEFAULT_DEPTH_BOUND};
use branchreach::prompt::{build_bundle, DEFAULT_PROMPT_CHAR_BUDGET};
use branchreach::{parse_module, InvocationSequence, Origin, TestCase};

pub const UPDATE_ENV: &str = "BRANCHREACH_UPDATE_GOLDEN";

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn seq(names: &[&str]) -> InvocationSequence {
    InvocationSequence::new(names.iter().map(|s| s.to_string()).collect())
}

pub const GOLDEN_SUMMARY: &str =
    "The method reports whether the field holds items and the registry has more than one definition.";

pub fn golden_counterexamples() -> Vec<TestCase> {
    vec![
        TestCase::new(
            "imported_0001",
            "from worked_example import Array, Class1\n\n\ndef test_method1_empty():\n    assert Class1({}).method1(Array([])) is False\n",
            Origin::Imported,
        ),
        TestCase::new(
            "llm_0003",
            "from worked_example import Array, Class2\n\n\ndef test_method3_items():\n    assert Class2('n').method3([1, 2]) is True\n",
            Origin::Llm,
        ),
    ]
}

/// (name, stage1, stage2) for every golden prompt case.
pub fn golden_cases() -> Vec<(&'static str, String, String)> {
    let mut out = Vec::new();

    let model = parse_module(&fixture("worked_example.py"), "worked_example.py").unwrap();
    let depset = analyze_dependencies(&model, "Class1.method1", DEFAULT_DEPTH_BOUND).unwrap();
    let tests = golden_counterexamples();
    let refs: Vec<&TestCase> = tests.iter().collect();
    let bundle = build_bundle(
        &seq(&["Class2.method3", "Class1.method1"]),
        &depset,
        &model,
        ContextPolicy::full(),
        &refs,
        DEFAULT_PROMPT_CHAR_BUDGET,
    )
    .unwrap();
    out.push(("worked_example", bundle.stage1_text.clone(), bundle.stage2_text(GOLDEN_SUMMARY)));

    let model = parse_module(&fixture("set_definitions.py"), "set_definitions.py").unwrap();
    let depset = analyze_dependencies(&model, "clamp", DEFAULT_DEPTH_BOUND).unwrap();
    let bundle =
        build_bundle(&seq(&["clamp"]), &depset, &model, ContextPolicy::default(), &[], DEFAULT_PROMPT_CHAR_BUDGET)
            .unwrap();
    out.push(("easy_clamp", bundle.stage1_text.clone(), bundle.stage2_text("It caps x at limit.")));
    out
}

/// Compares against (or, with the update variable set, rewrites) the golden
/// files. Returns the names of mismatching files.
pub fn check_goldens() -> Vec<String> {
    let update = std::env::var_os(UPDATE_ENV).is_some();
    let mut mismatches = Vec::new();
    for (name, stage1, stage2) in golden_cases() {
        for (stage, text) in [("stage1", stage1), ("stage2", stage2)] {
            let path = golden_dir().join(format!("{name}.{stage}.txt"));
            if update {
                std::fs::write(&path, &text).unwrap();
            } else if std::fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
                mismatches.push(path.display().to_string());
            }
        }
    }
    mismatches
}
