//! Prompt texts are frozen in `tests/golden`. Regenerate with
//! `BRANCHREACH_UPDATE_GOLDEN=1 cargo test -p branchreach-core --test prompt_golden`.

mod common;

use branchreach::prompt::DIVERGENCE_INSTRUCTION;

#[test]
fn prompts_match_golden_files() {
    let mismatches = common::check_goldens();
    assert!(mismatches.is_empty(), "golden mismatch: {mismatches:?}");
}

#[test]
fn golden_stage2_contains_counterexamples_and_instruction() {
    let cases = common::golden_cases();
    let (_, _, stage2) = &cases[0];
    let mut last = 0;
    for t in common::golden_counterexamples() {
        let at = stage2.find(&t.source_text).expect("verbatim counter-example");
        assert!(at >= last);
        last = at;
    }
    assert!(stage2.find(DIVERGENCE_INSTRUCTION).unwrap() > last);
    assert!(stage2.contains(common::GOLDEN_SUMMARY));
}
