//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and case counts are pinned below.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use branchreach::callgraph::CallGraph;
use branchreach::coverage::Arm;
use branchreach::deps::{analyze_dependencies, classify_branch, BranchKindClass, DEFAULT_DEPTH_BOUND};
use branchreach::llm::MockBackend;
use branchreach::prompt::DIVERGENCE_INSTRUCTION;
use branchreach::sampler::sample_over;
use branchreach::session::{
    detect_plateau, run_session, ImportedSuite, ReplayRunner, SessionConfig, SessionParts, SessionReport, SimClock,
};
use branchreach::{
    build_call_graph, extract_sequences, filter_shortest, parse_module, BranchOutcomeId, CoverageReport, Origin,
    TestCase,
};

const SEQUENCE_TIME_LIMIT: Duration = Duration::from_secs(1);
const PATH_ORACLE_CASES: usize = 200;
const PATH_ORACLE_MAX_NODES: usize = 12;
const PATH_ORACLE_MAX_DENSITY: f64 = 0.4;
const PATH_ORACLE_TIME_LIMIT: Duration = Duration::from_secs(30);
const SAMPLER_CASES: usize = 500;
const SAMPLER_MAX_TESTS: usize = 10;
const SAMPLER_MAX_OUTCOMES: usize = 16;
const SAMPLER_TIME_LIMIT: Duration = Duration::from_secs(60);
const PLATEAU_CASES: usize = 50;
const E2E_TIME_LIMIT: Duration = Duration::from_secs(120);
const E2E_SWITCH_COVERAGE: f64 = 0.6;
const E2E_SEED: u64 = 7;

/// Instruction quoted from the method description; the prompt builder must
/// reproduce it byte for byte.
const EXPECTED_INSTRUCTION: &str = "These counter-examples enter the target method via the selected sequence of method invocations. They can cover different parts of the method. Please generate new test cases that cover different scenarios or edge cases.";

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn names(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn call_chain_sequences() -> Outcome {
    let started = Instant::now();
    let model = parse_module(&common::fixture("call_chain.py"), "call_chain.py").map_err(|e| e.to_string())?;
    let graph = build_call_graph(&model);
    let all = extract_sequences(&graph, "Class1.method1", true).map_err(|e| e.to_string())?;
    let filtered = filter_shortest(&all);
    let elapsed = started.elapsed();
    let as_set = |v: &[branchreach::InvocationSequence]| -> BTreeSet<Vec<String>> {
        v.iter().map(|s| s.methods().to_vec()).collect()
    };
    let (v1, v2, v3) = ("Class1.method1", "Class1.method2", "Class2.method3");
    let want_all: BTreeSet<_> = [names(&[v3, v2, v1]), names(&[v3, v1]), names(&[v1])].into();
    let want_filtered: BTreeSet<_> = [names(&[v3, v1]), names(&[v1])].into();
    if as_set(&all) != want_all || all.len() != 3 {
        return Err(format!("extract_sequences gave {all:?}"));
    }
    if as_set(&filtered) != want_filtered || filtered.len() != 2 {
        return Err(format!("filter_shortest gave {filtered:?}"));
    }
    if elapsed >= SEQUENCE_TIME_LIMIT {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("3 sequences, 2 after filtering, {elapsed:?}"))
}

fn worked_example_dependencies() -> Outcome {
    let model = parse_module(&common::fixture("worked_example.py"), "worked_example.py").map_err(|e| e.to_string())?;
    let set = analyze_dependencies(&model, "Class1.method1", DEFAULT_DEPTH_BOUND).map_err(|e| e.to_string())?;
    let got: BTreeSet<&str> = set.methods.iter().map(String::as_str).collect();
    let want: BTreeSet<&str> = ["Class1.dependent_method0", "Class1.dependent_method1"].into();
    if got == want && set.methods.len() == 2 {
        Ok(format!("{:?}", set.methods))
    } else {
        Err(format!("got {:?}", set.methods))
    }
}

/// Simple paths ending at `target` from every in-degree-zero node, by
/// breadth-first extension of partial paths over an adjacency matrix.
fn oracle_paths(matrix: &[Vec<bool>], target: usize, public: bool) -> BTreeSet<Vec<usize>> {
    let n = matrix.len();
    let sources: Vec<usize> = (0..n).filter(|&j| (0..n).all(|i| !matrix[i][j])).collect();
    let mut found = BTreeSet::new();
    let mut frontier: Vec<Vec<usize>> = sources.into_iter().map(|s| vec![s]).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for path in frontier {
            let last = *path.last().unwrap();
            if last == target {
                found.insert(path);
                continue;
            }
            for (step, &edge) in matrix[last].iter().enumerate() {
                if edge && !path.contains(&step) {
                    let mut longer = path.clone();
                    longer.push(step);
                    next.push(longer);
                }
            }
        }
        frontier = next;
    }
    if public {
        found.insert(vec![target]);
    }
    found
}

fn path_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut mismatches = 0;
    let mut total_paths = 0;
    let mut largest = 0;
    for case in 0..PATH_ORACLE_CASES {
        let n = rng.gen_range(2..=PATH_ORACLE_MAX_NODES);
        let density = rng.gen_range(0.0..=PATH_ORACLE_MAX_DENSITY);
        let matrix: Vec<Vec<bool>> = (0..n).map(|_| (0..n).map(|_| rng.gen_bool(density)).collect()).collect();
        let name = |i: usize| format!("n{i:02}");
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| matrix[i][j])
            .map(|(i, j)| (name(i), name(j)));
        let graph = CallGraph::from_parts((0..n).map(name), edges).map_err(|e| e.to_string())?;
        let target = rng.gen_range(0..n);
        let public = rng.gen_bool(0.5);
        let got = extract_sequences(&graph, &name(target), public).map_err(|e| e.to_string())?;
        let got_set: BTreeSet<Vec<usize>> =
            got.iter().map(|s| s.methods().iter().map(|m| m[1..].parse::<usize>().unwrap()).collect()).collect();
        let want = oracle_paths(&matrix, target, public);
        total_paths += want.len();
        largest = largest.max(want.len());
        if got_set != want || got_set.len() != got.len() {
            mismatches += 1;
            eprintln!("path mismatch in case {case}: got {} paths, oracle {}", got.len(), want.len());
        }
    }
    let elapsed = started.elapsed();
    let detail = format!(
        "{PATH_ORACLE_CASES} graphs, {mismatches} mismatches, {total_paths} paths (max {largest}), {elapsed:?}"
    );
    if mismatches == 0 && elapsed < PATH_ORACLE_TIME_LIMIT {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn outcome(i: usize) -> BranchOutcomeId {
    BranchOutcomeId::new(format!("b{}", i / 2), if i.is_multiple_of(2) { Arm::True } else { Arm::False })
}

fn sampler_properties() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut failures = 0;
    let mut gap_cases = 0;
    let mut max_gap = 0;
    for case in 0..SAMPLER_CASES {
        let n_outcomes = rng.gen_range(1..=SAMPLER_MAX_OUTCOMES);
        let n_tests = rng.gen_range(1..=SAMPLER_MAX_TESTS);
        let universe: BTreeSet<BranchOutcomeId> = (0..n_outcomes).map(outcome).collect();
        let p = rng.gen_range(0.05..0.6);
        let covers: Vec<BTreeSet<usize>> =
            (0..n_tests).map(|_| (0..n_outcomes).filter(|_| rng.gen_bool(p)).collect()).collect();
        let pool: Vec<TestCase> = covers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut report = CoverageReport::empty(format!("t{i:02}"), true);
                report.covered_outcomes = c.iter().map(|&o| outcome(o)).collect();
                TestCase::new(format!("t{i:02}"), String::new(), Origin::Llm).with_report(report)
            })
            .collect();
        let refs: Vec<&TestCase> = pool.iter().collect();
        let sel = sample_over(&refs, &universe);

        let union: BTreeSet<usize> = covers.iter().flatten().copied().collect();
        let selected: BTreeSet<usize> = sel
            .tests
            .iter()
            .map(|t| t.test_id[1..].parse::<usize>().unwrap())
            .flat_map(|i| covers[i].iter().copied())
            .collect();
        let mut ok = union == selected;
        let mut so_far: BTreeSet<usize> = BTreeSet::new();
        for t in &sel.tests {
            let before = so_far.len();
            so_far.extend(covers[t.test_id[1..].parse::<usize>().unwrap()].iter().copied());
            ok &= so_far.len() > before;
        }
        if !ok {
            failures += 1;
            eprintln!("sampler failure in case {case}");
        }
        // exhaustive minimum cover size (informational)
        let minimum = (0u32..1 << n_tests)
            .filter(|mask| {
                let u: BTreeSet<usize> =
                    (0..n_tests).filter(|i| mask & (1 << i) != 0).flat_map(|i| covers[i].iter().copied()).collect();
                u == union
            })
            .map(u32::count_ones)
            .min()
            .unwrap_or(0) as usize;
        let gap = sel.tests.len() - minimum;
        if gap > 0 {
            gap_cases += 1;
            max_gap = max_gap.max(gap);
        }
    }
    let elapsed = started.elapsed();
    let detail = format!(
        "{SAMPLER_CASES} pools, {failures} failures, greedy above exhaustive minimum in {gap_cases} (max +{max_gap}), {elapsed:?}"
    );
    if failures == 0 && elapsed < SAMPLER_TIME_LIMIT {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn classifier_fixtures() -> Outcome {
    let classify = |file: &str, method: &str, index: usize| -> Result<BranchKindClass, String> {
        let model = parse_module(&common::fixture(file), file).map_err(|e| e.to_string())?;
        let m = model.method(method).ok_or(format!("no {method}"))?;
        let depset = analyze_dependencies(&model, method, DEFAULT_DEPTH_BOUND).map_err(|e| e.to_string())?;
        Ok(classify_branch(m, &m.branch_sites[index], &depset).kind)
    };
    let cases = [
        ("set_definitions.py", "set_definitions", 0, BranchKindClass::ComplexObject),
        ("public_family.py", "Parser.is_public_family", 0, BranchKindClass::ComplexDependency),
        ("set_definitions.py", "clamp", 0, BranchKindClass::Easy),
    ];
    let mut wrong = Vec::new();
    for (file, method, index, want) in cases {
        let got = classify(file, method, index)?;
        if got != want {
            wrong.push(format!("{method}: {got:?} != {want:?}"));
        }
    }
    if wrong.is_empty() {
        Ok("complex_object, complex_dependency, easy".into())
    } else {
        Err(wrong.join("; "))
    }
}

fn prompt_goldens() -> Outcome {
    let first = common::golden_cases();
    let second = common::golden_cases();
    if first != second {
        return Err("prompts differ between runs".into());
    }
    let mismatches = common::check_goldens();
    if !mismatches.is_empty() {
        return Err(format!("golden mismatch: {mismatches:?}"));
    }
    if DIVERGENCE_INSTRUCTION != EXPECTED_INSTRUCTION {
        return Err("instruction constant differs from the quoted string".into());
    }
    let (_, _, stage2) = &first[0];
    if !stage2.contains(EXPECTED_INSTRUCTION) {
        return Err("stage 2 lacks the instruction".into());
    }
    Ok(format!("{} prompt files byte-identical", first.len() * 2))
}

/// Smallest integer `t >= timeframe` with no event in `(t - timeframe, t]`.
fn plateau_oracle(events: &[u64], timeframe: u64, budget: u64) -> Option<u64> {
    (timeframe..=budget).find(|&t| !events.iter().any(|&e| e + timeframe > t && e <= t))
}

fn plateau_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let budget = 1200;
    let mut cases: Vec<(Vec<u64>, u64)> = vec![(vec![], 120), (vec![10, 50], 120)];
    while cases.len() < PLATEAU_CASES {
        let timeframe = rng.gen_range(10..=300);
        let mut events: Vec<u64> = if rng.gen_bool(0.3) {
            let step = rng.gen_range(1..timeframe);
            (1..).map(|k| k * step).take_while(|&t| t <= budget + 100).collect()
        } else {
            (0..rng.gen_range(0..25)).map(|_| rng.gen_range(0..budget)).collect()
        };
        events.sort_unstable();
        cases.push((events, timeframe));
    }
    let mut mismatches = 0;
    let mut zero_event_ok = false;
    for (events, timeframe) in &cases {
        let durations: Vec<Duration> = events.iter().map(|&s| Duration::from_secs(s)).collect();
        let got = detect_plateau(&durations, Duration::from_secs(*timeframe), Duration::from_secs(budget));
        let want = plateau_oracle(events, *timeframe, budget).map(Duration::from_secs);
        if got != want {
            mismatches += 1;
            eprintln!("plateau mismatch: events {events:?}, timeframe {timeframe}: got {got:?}, want {want:?}");
        }
        if events.is_empty() {
            zero_event_ok = got == Some(Duration::from_secs(*timeframe));
        }
    }
    let detail =
        format!("{} cases, {mismatches} mismatches, zero-event switch at timeframe: {zero_event_ok}", cases.len());
    if mismatches == 0 && zero_event_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_fixture_session() -> Result<SessionReport, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/session");
    let module = dir.join("inventory.py");
    let source = std::fs::read_to_string(&module).map_err(|e| e.to_string())?;
    let model = parse_module(&source, &module).map_err(|e| e.to_string())?;
    let config =
        SessionConfig { seed: E2E_SEED, mock: true, import_suite: Some(dir.join("suite")), ..Default::default() };
    let mut preceding = ImportedSuite::load(&dir.join("suite")).map_err(|e| e.to_string())?;
    let mut backend = MockBackend::from_file(&dir.join("mock.json")).map_err(|e| e.to_string())?;
    let mut runner = ReplayRunner::from_file(&dir.join("replay.json")).map_err(|e| e.to_string())?;
    let clock = SimClock::new();
    run_session(
        &config,
        &model,
        SessionParts {
            preceding: &mut preceding,
            backend: &mut backend,
            runner: &mut runner,
            clock: &clock,
            artifacts: None,
        },
    )
    .map_err(|e| e.to_string())
}

fn end_to_end_session() -> Outcome {
    let started = Instant::now();
    let first = run_fixture_session()?;
    let second = run_fixture_session()?;
    let elapsed = started.elapsed();
    let mut problems = Vec::new();
    if (first.coverage_at_switch - E2E_SWITCH_COVERAGE).abs() > 1e-9 {
        problems.push(format!("switch coverage {}", first.coverage_at_switch));
    }
    if first.final_coverage <= first.coverage_at_switch {
        problems.push("no coverage gain".to_string());
    }
    let mut previous = first.covered_at_switch;
    for it in &first.iterations {
        if it.covered_after < previous {
            problems.push(format!("coverage dropped at iteration {}", it.index));
        }
        previous = it.covered_after;
    }
    let mut triples = BTreeSet::new();
    for it in &first.iterations {
        for id in &it.counterexample_ids {
            if !triples.insert((id.clone(), it.target.clone(), it.sequence.clone())) {
                problems.push(format!("{id} re-sampled for {} via {}", it.target, it.sequence));
            }
        }
    }
    let per_target: BTreeMap<&str, usize> = first.iterations.iter().fold(BTreeMap::new(), |mut m, it| {
        *m.entry(it.target.as_str()).or_default() += 1;
        m
    });
    if first.iterations != second.iterations || first != second {
        problems.push("seeded runs differ".to_string());
    }
    if elapsed >= E2E_TIME_LIMIT {
        problems.push(format!("took {elapsed:?}"));
    }
    let detail = format!(
        "coverage {:.0}% -> {:.0}% in {} iterations {:?}, {} counter-example uses, {elapsed:?}",
        first.coverage_at_switch * 100.0,
        first.final_coverage * 100.0,
        first.iterations.len(),
        per_target,
        triples.len()
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("call-chain sequence reproduction", call_chain_sequences),
        ("worked-example dependency set", worked_example_dependencies),
        ("path-oracle equivalence", path_oracle_equivalence),
        ("sampler properties", sampler_properties),
        ("classifier fixtures", classifier_fixtures),
        ("prompt golden files", prompt_goldens),
        ("plateau arithmetic", plateau_arithmetic),
        ("end-to-end mock session", end_to_end_session),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
