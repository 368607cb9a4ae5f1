use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// Replay script. A request is answered from `by_hash` when its prompt hash
/// is listed, otherwise by the next unused `sequence` entry, otherwise by
/// `fallback`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_hash: BTreeMap<String, String>,
    #[serde(default)]
    pub sequence: Vec<String>,
    #[serde(default)]
    pub fallback: Option<String>,
    /// Latency reported for every reply; lets simulated clocks charge time.
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    cursor: usize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self { script, cursor: 0 }
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::MockLoad(format!("{}: {e}", path.display())))?;
        let script =
            serde_json::from_str(&text).map_err(|e| GatewayError::MockLoad(format!("{}: {e}", path.display())))?;
        Ok(Self::new(script))
    }
}

impl ChatBackend for MockBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let hash = request.prompt_hash();
        let text = if let Some(reply) = self.script.by_hash.get(&hash) {
            reply.clone()
        } else if let Some(reply) = self.script.sequence.get(self.cursor) {
            self.cursor += 1;
            reply.clone()
        } else if let Some(reply) = &self.script.fallback {
            reply.clone()
        } else {
            return Err(GatewayError::MockMiss(hash));
        };
        debug!(%hash, "mock reply");
        Ok(ChatResponse { text, latency_ms: self.script.latency_ms, endpoint_status: 200 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Role;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("mock", vec![(Role::User, text.into())])
    }

    #[test]
    fn lookup_order() {
        let script = MockScript {
            by_hash: [(req("known").prompt_hash(), "canned".to_string())].into(),
            sequence: vec!["first".into()],
            fallback: Some("later".into()),
            latency_ms: 7,
        };
        let mut mock = MockBackend::new(script);
        let r = mock.complete(&req("known")).unwrap();
        assert_eq!((r.text.as_str(), r.latency_ms), ("canned", 7));
        assert_eq!(mock.complete(&req("x")).unwrap().text, "first");
        assert_eq!(mock.complete(&req("x")).unwrap().text, "later");
        assert_eq!(mock.complete(&req("known")).unwrap().text, "canned");
    }

    #[test]
    fn miss_and_replay() {
        let mut empty = MockBackend::new(MockScript::default());
        assert!(matches!(empty.complete(&req("a")), Err(GatewayError::MockMiss(_))));
        let script = MockScript { sequence: vec!["1".into(), "2".into()], ..Default::default() };
        let run = |mut m: MockBackend| (0..2).map(|_| m.complete(&req("p")).unwrap().text).collect::<Vec<_>>();
        assert_eq!(run(MockBackend::new(script.clone())), run(MockBackend::new(script)));
    }

    #[test]
    fn loads_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mock.json");
        std::fs::write(&path, r#"{"fallback": "ok"}"#).unwrap();
        assert_eq!(MockBackend::from_file(&path).unwrap().complete(&req("q")).unwrap().text, "ok");
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(MockBackend::from_file(&path), Err(GatewayError::MockLoad(_))));
    }
}
