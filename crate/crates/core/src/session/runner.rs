//! Client side of the test-runner protocol.
//!
//! The runner is a separate process started as
//! `<command...> --module PATH --branch-map PATH`. It reads one JSON
//! [`RunRequest`] per line on stdin and answers each with one JSON line:
//! either a [`WireReport`] or `{"error": "..."}`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::coverage::{BranchOutcomeId, WireReport};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("cannot start runner `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("runner I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("runner produced no result within {0:?}")]
    Timeout(Duration),
    #[error("runner exited unexpectedly")]
    Exited,
    #[error("malformed runner reply: {0}")]
    Protocol(String),
    #[error("runner reported: {0}")]
    Reported(String),
    #[error("no replay entry for test `{0}`")]
    NoReplay(String),
    #[error("cannot load replay file: {0}")]
    ReplayLoad(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub module_path: PathBuf,
    pub test_source: String,
    pub test_id: String,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub wire: WireReport,
    /// Time the run cost; charged to the session clock.
    pub elapsed: Duration,
}

pub trait TestRunner {
    fn run(&mut self, request: &RunRequest) -> Result<RunOutcome, RunnerError>;
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Reply {
    Report(WireReport),
    Error { error: String },
}

/// Parses one reply line and checks it answers `test_id`.
pub fn parse_reply(line: &str, test_id: &str) -> Result<WireReport, RunnerError> {
    match serde_json::from_str::<Reply>(line) {
        Ok(Reply::Report(w)) if w.test_id == test_id => Ok(w),
        Ok(Reply::Report(w)) => {
            Err(RunnerError::Protocol(format!("expected result for `{test_id}`, got `{}`", w.test_id)))
        }
        Ok(Reply::Error { error }) => Err(RunnerError::Reported(error)),
        Err(e) => Err(RunnerError::Protocol(format!("{e}: {line}"))),
    }
}

struct Live {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// Long-lived runner process, restarted after a timeout or crash.
pub struct ProcessRunner {
    command: Vec<String>,
    module: PathBuf,
    branch_map: PathBuf,
    /// Added to the per-test timeout before the runner is presumed hung.
    grace: Duration,
    live: Option<Live>,
}

impl ProcessRunner {
    pub fn new(command: Vec<String>, module: &Path, branch_map: &Path) -> Self {
        assert!(!command.is_empty(), "runner command must not be empty");
        Self {
            command,
            module: module.to_path_buf(),
            branch_map: branch_map.to_path_buf(),
            grace: Duration::from_secs(5),
            live: None,
        }
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    fn spawn(&self) -> Result<Live, RunnerError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .arg("--module")
            .arg(&self.module)
            .arg("--branch-map")
            .arg(&self.branch_map)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| RunnerError::Spawn { command: self.command.join(" "), source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        debug!(command = ?self.command, "runner started");
        Ok(Live { child, stdin, lines: rx })
    }

    fn kill(&mut self) {
        if let Some(mut live) = self.live.take() {
            let _ = live.child.kill();
            let _ = live.child.wait();
        }
    }
}

impl TestRunner for ProcessRunner {
    fn run(&mut self, request: &RunRequest) -> Result<RunOutcome, RunnerError> {
        if self.live.is_none() {
            self.live = Some(self.spawn()?);
        }
        let started = Instant::now();
        let wait = Duration::from_secs_f64(request.timeout_s) + self.grace;
        let live = self.live.as_mut().expect("spawned");
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        if let Err(e) = live.stdin.write_all(line.as_bytes()).and_then(|_| live.stdin.flush()) {
            self.kill();
            return Err(e.into());
        }
        let reply = match live.lines.recv_timeout(wait) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                self.kill();
                return Err(e.into());
            }
            Err(RecvTimeoutError::Timeout) => {
                warn!(test_id = %request.test_id, "runner hung, restarting");
                self.kill();
                return Err(RunnerError::Timeout(wait));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill();
                return Err(RunnerError::Exited);
            }
        };
        let wire = parse_reply(&reply, &request.test_id)?;
        Ok(RunOutcome { wire, elapsed: started.elapsed() })
    }
}

impl Drop for ProcessRunner {
    fn drop(&mut self) {
        if let Some(mut live) = self.live.take() {
            drop(live.stdin);
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                if matches!(live.child.try_wait(), Ok(Some(_))) {
                    return;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            let _ = live.child.kill();
            let _ = live.child.wait();
        }
    }
}

/// Recorded result for one test source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub syntactically_valid: bool,
    pub execution_passed: bool,
    #[serde(default)]
    pub covered: Vec<BranchOutcomeId>,
    #[serde(default)]
    pub invoked: Option<Vec<String>>,
    #[serde(default)]
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub source: String,
    pub result: ReplayResult,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFile {
    pub entries: Vec<ReplayEntry>,
    /// Answer for sources without an entry; absent means such sources fail.
    #[serde(default)]
    pub default: Option<ReplayResult>,
}

/// Answers from recorded results keyed by exact test source.
#[derive(Debug, Clone)]
pub struct ReplayRunner {
    by_source: BTreeMap<String, ReplayResult>,
    default: Option<ReplayResult>,
}

impl ReplayRunner {
    pub fn new(file: ReplayFile) -> Self {
        Self { by_source: file.entries.into_iter().map(|e| (e.source, e.result)).collect(), default: file.default }
    }

    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| RunnerError::ReplayLoad(format!("{}: {e}", path.display())))?;
        let file =
            serde_json::from_str(&text).map_err(|e| RunnerError::ReplayLoad(format!("{}: {e}", path.display())))?;
        Ok(Self::new(file))
    }
}

impl TestRunner for ReplayRunner {
    fn run(&mut self, request: &RunRequest) -> Result<RunOutcome, RunnerError> {
        let result = self
            .by_source
            .get(&request.test_source)
            .or(self.default.as_ref())
            .ok_or_else(|| RunnerError::NoReplay(request.test_id.clone()))?;
        Ok(RunOutcome {
            wire: WireReport {
                test_id: request.test_id.clone(),
                syntactically_valid: result.syntactically_valid,
                execution_passed: result.execution_passed,
                covered: result.covered.clone(),
                invoked: result.invoked.clone(),
            },
            elapsed: Duration::from_millis(result.elapsed_ms),
        })
    }
}
