use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::deps::DEFAULT_DEPTH_BOUND;
use crate::prompt::DEFAULT_PROMPT_CHAR_BUDGET;
use crate::sampler::DEFAULT_COUNTEREXAMPLE_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub time_budget_s: f64,
    pub plateau_timeframe_s: f64,
    pub depth_bound: usize,
    pub prompt_char_budget: usize,
    pub counterexample_cap: usize,
    pub seed: u64,
    /// Per-test execution timeout passed to the runner.
    pub test_timeout_s: f64,
    /// Send stage 2 as a continuation of the stage-1 dialogue rather than as
    /// a standalone message.
    pub two_turn: bool,
    pub model_name: String,
    pub mock: bool,
    pub import_suite: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            time_budget_s: 1200.0,
            plateau_timeframe_s: 120.0,
            depth_bound: DEFAULT_DEPTH_BOUND,
            prompt_char_budget: DEFAULT_PROMPT_CHAR_BUDGET,
            counterexample_cap: DEFAULT_COUNTEREXAMPLE_CAP,
            seed: 0,
            test_timeout_s: 10.0,
            two_turn: true,
            model_name: "gpt-3.5-turbo".to_string(),
            mock: false,
            import_suite: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |what: &str| Err(SessionError::Config(what.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.time_budget_s) || !positive(self.plateau_timeframe_s) || !positive(self.test_timeout_s) {
            return bad("time budget, plateau timeframe and test timeout must be positive");
        }
        if self.depth_bound == 0 || self.prompt_char_budget == 0 || self.counterexample_cap == 0 {
            return bad("depth bound, prompt budget and counter-example cap must be positive");
        }
        if self.plateau_timeframe_s >= self.time_budget_s {
            return bad("plateau timeframe must be shorter than the time budget");
        }
        Ok(())
    }

    pub fn time_budget(&self) -> Duration {
        Duration::from_secs_f64(self.time_budget_s)
    }

    pub fn plateau_timeframe(&self) -> Duration {
        Duration::from_secs_f64(self.plateau_timeframe_s)
    }
}
