use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::SessionReport;
use crate::coverage::WireReport;
use crate::llm::ChatResponse;

pub const REPORT_FILE: &str = "session.json";
pub const BRANCH_MAP_FILE: &str = "branch_map.json";

/// Session output directory: `prompts/`, `responses/`, `tests/`,
/// `coverage/` and `session.json`.
#[derive(Debug, Clone)]
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn create(root: &Path) -> io::Result<Self> {
        for sub in ["prompts", "responses", "tests", "coverage"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_json<T: Serialize>(path: PathBuf, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn write_prompt(&self, iteration: usize, stage: u8, text: &str) -> io::Result<()> {
        std::fs::write(self.root.join("prompts").join(format!("iter_{iteration:04}_stage{stage}.txt")), text)
    }

    pub fn write_response(&self, iteration: usize, stage: u8, response: &ChatResponse) -> io::Result<()> {
        Self::write_json(self.root.join("responses").join(format!("iter_{iteration:04}_stage{stage}.json")), response)
    }

    pub fn write_test(&self, test_id: &str, source: &str) -> io::Result<()> {
        std::fs::write(self.root.join("tests").join(format!("{test_id}.py")), source)
    }

    pub fn write_coverage(&self, wire: &WireReport) -> io::Result<()> {
        Self::write_json(self.root.join("coverage").join(format!("{}.json", wire.test_id)), wire)
    }

    pub fn write_report(&self, report: &SessionReport) -> io::Result<()> {
        Self::write_json(self.root.join(REPORT_FILE), report)
    }

    pub fn write_branch_map<T: Serialize>(&self, map: &T) -> io::Result<PathBuf> {
        let path = self.root.join(BRANCH_MAP_FILE);
        Self::write_json(path.clone(), map)?;
        Ok(path)
    }
}

pub fn load_report(session_dir: &Path) -> io::Result<SessionReport> {
    let text = std::fs::read_to_string(session_dir.join(REPORT_FILE))?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
