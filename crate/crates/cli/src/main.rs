use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tracing_subscriber::EnvFilter;

use branchreach::deps::{analyze_dependencies, classify_method, hard_to_cover_fraction, DEFAULT_DEPTH_BOUND};
use branchreach::llm::{ChatBackend, HttpBackend, HttpConfig, MockBackend};
use branchreach::session::{
    load_module, load_report, run_session, Artifacts, BaselineGenerator, ImportedSuite, PrecedingSource, ProcessRunner,
    ReplayRunner, SessionConfig, SessionParts, SystemClock, TestRunner,
};
use branchreach::{build_call_graph, extract_sequences, filter_shortest, ProgramModel};

#[derive(Parser)]
#[command(name = "branchreach", version, about = "Coverage-guided LLM test generation for Python modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the call graph, invocation sequences, dependency sets and branch
    /// classes of a module.
    Analyze(AnalyzeArgs),
    /// Run a generation session.
    Generate(Box<GenerateArgs>),
    /// Summarize a finished session directory.
    Report { session_dir: PathBuf },
}

#[derive(Args)]
struct AnalyzeArgs {
    module: PathBuf,
    /// Restrict the per-method output to one qualified name.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DEPTH_BOUND)]
    depth: usize,
    /// Write the analysis as JSON to this file ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the runner's branch map to this file.
    #[arg(long)]
    branch_map: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    module: PathBuf,
    /// Time budget in seconds.
    #[arg(long, default_value_t = 1200.0)]
    budget: f64,
    /// Plateau timeframe in seconds.
    #[arg(long, default_value_t = 120.0)]
    plateau: f64,
    #[arg(long, required_unless_present = "mock", conflicts_with = "mock")]
    llm_endpoint: Option<String>,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    model: String,
    /// Replay LLM responses from a script file instead of calling an endpoint.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of existing test files used as the preceding phase.
    #[arg(long)]
    import_suite: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Runner command line, split on whitespace; the module and branch map
    /// paths are appended as --module and --branch-map.
    #[arg(long, required_unless_present = "replay_results", conflicts_with = "replay_results")]
    runner_cmd: Option<String>,
    /// Serve execution results from a recorded file instead of a runner.
    #[arg(long)]
    replay_results: Option<PathBuf>,
    #[arg(long)]
    single_turn: bool,
    #[arg(long, default_value_t = 10.0)]
    test_timeout: f64,
    #[arg(long, default_value_t = DEFAULT_DEPTH_BOUND)]
    depth: usize,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Analyze(args) => analyze(&args),
        Command::Generate(args) => generate(&args),
        Command::Report { session_dir } => {
            let report = load_report(&session_dir).with_context(|| format!("reading {}", session_dir.display()))?;
            print!("{}", report.render());
            Ok(())
        }
    }
}

fn analysis_json(model: &ProgramModel, target: Option<&str>, depth: usize) -> Result<Value> {
    let graph = build_call_graph(model);
    let mut methods = Vec::new();
    for method in &model.methods {
        if target.is_some_and(|t| t != method.qualified_name) {
            continue;
        }
        let name = &method.qualified_name;
        let sequences = filter_shortest(&extract_sequences(&graph, name, method.is_public)?);
        let depset = analyze_dependencies(model, name, depth)?;
        methods.push(json!({
            "name": name,
            "public": method.is_public,
            "sequences": sequences,
            "dependencies": depset.methods,
            "unanalyzed": depset.unanalyzed,
            "branches": classify_method(method, &depset),
        }));
    }
    if let Some(t) = target {
        if methods.is_empty() {
            bail!("no method named {t} in {}", model.module_path.display());
        }
    }
    Ok(json!({
        "module": model.module_path,
        "call_graph": graph,
        "hard_to_cover_fraction": hard_to_cover_fraction(model, depth),
        "methods": methods,
    }))
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let model = load_module(&args.module)?;
    let analysis = analysis_json(&model, args.target.as_deref(), args.depth)?;
    if let Some(path) = &args.branch_map {
        std::fs::write(path, serde_json::to_string_pretty(&model.branch_map())?)?;
    }
    match args.json.as_deref() {
        Some(p) if p == Path::new("-") => println!("{}", serde_json::to_string_pretty(&analysis)?),
        Some(p) => std::fs::write(p, serde_json::to_string_pretty(&analysis)?)?,
        None => print_analysis(&analysis),
    }
    Ok(())
}

fn print_analysis(analysis: &Value) {
    let list = |v: &Value| -> String {
        v.as_array().map(|a| a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(", ")).unwrap_or_default()
    };
    println!("module: {}", analysis["module"].as_str().unwrap_or_default());
    println!("hard-to-cover branches: {:.1}%", analysis["hard_to_cover_fraction"].as_f64().unwrap_or(0.0) * 100.0);
    for m in analysis["methods"].as_array().into_iter().flatten() {
        println!("\n{}{}", m["name"].as_str().unwrap_or_default(), if m["public"] == true { "" } else { " (private)" });
        for s in m["sequences"].as_array().into_iter().flatten() {
            println!("  sequence: {}", list(s).replace(", ", " -> "));
        }
        if m["dependencies"].as_array().is_some_and(|d| !d.is_empty()) {
            println!("  depends on: {}", list(&m["dependencies"]));
        }
        if m["unanalyzed"].as_array().is_some_and(|u| !u.is_empty()) {
            println!("  not followed: {}", list(&m["unanalyzed"]));
        }
        for b in m["branches"].as_array().into_iter().flatten() {
            println!(
                "  branch {}: {}",
                b["branch_id"].as_str().unwrap_or_default(),
                b["kind"].as_str().unwrap_or_default()
            );
        }
    }
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let model = load_module(&args.module)?;
    let config = SessionConfig {
        time_budget_s: args.budget,
        plateau_timeframe_s: args.plateau,
        depth_bound: args.depth,
        seed: args.seed,
        test_timeout_s: args.test_timeout,
        two_turn: !args.single_turn,
        model_name: args.model.clone(),
        mock: args.mock.is_some(),
        import_suite: args.import_suite.clone(),
        ..SessionConfig::default()
    };
    config.validate()?;
    let artifacts = Artifacts::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let branch_map = artifacts.write_branch_map(&model.branch_map())?;

    let mut backend: Box<dyn ChatBackend> = match (&args.mock, &args.llm_endpoint) {
        (Some(script), _) => Box::new(MockBackend::from_file(script)?),
        (None, Some(url)) => Box::new(HttpBackend::new(HttpConfig::new(url))?),
        (None, None) => bail!("either --llm-endpoint or --mock is required"),
    };
    let mut runner: Box<dyn TestRunner> = match (&args.replay_results, &args.runner_cmd) {
        (Some(file), _) => Box::new(ReplayRunner::from_file(file)?),
        (None, Some(cmd)) => {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                bail!("--runner-cmd is empty");
            }
            Box::new(ProcessRunner::new(argv, &args.module, &branch_map))
        }
        (None, None) => bail!("either --runner-cmd or --replay-results is required"),
    };
    let mut preceding: Box<dyn PrecedingSource> = match &args.import_suite {
        Some(dir) => Box::new(ImportedSuite::load(dir).with_context(|| format!("loading {}", dir.display()))?),
        None => Box::new(BaselineGenerator::new(&model)),
    };
    let clock = SystemClock::start();
    let report = run_session(
        &config,
        &model,
        SessionParts {
            preceding: preceding.as_mut(),
            backend: backend.as_mut(),
            runner: runner.as_mut(),
            clock: &clock,
            artifacts: Some(&artifacts),
        },
    )?;
    print!("{}", report.render());
    Ok(())
}
