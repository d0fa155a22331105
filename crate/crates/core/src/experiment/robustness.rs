use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::factory::FactoryEnv;
use crate::qmac::{evaluate, Actor};

use super::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub iterations: usize,
    /// Phase schedule; the built-in four-phase schedule when unset.
    pub scenario: Option<PathBuf>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { iterations: 100, scenario: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    /// Start minute of the step.
    pub minute: f64,
    /// Zero-based scenario phase in effect during the step.
    pub phase: usize,
    /// Mean AMR load precision after the step, averaged over iterations, percent.
    pub mean_precision_pct: f64,
}

/// Greedy episodes under `env`'s scenario, averaged step by step.
pub fn robustness_series(env: &FactoryEnv, actor: &dyn Actor, iterations: usize, seed: u64) -> Result<Vec<RobustnessPoint>> {
    if iterations == 0 {
        return Err(ExperimentError::Config("robustness needs at least one iteration".into()));
    }
    let episodes = evaluate(env, actor, iterations, seed)?;
    let config = env.config();
    let steps = config.episode_length;
    let mut sums = vec![0.0; steps];
    for ep in &episodes {
        for (t, m) in ep.steps.iter().enumerate() {
            sums[t] += m.precision;
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(t, sum)| {
            let minute = t as f64 * config.minutes_per_step;
            RobustnessPoint {
                minute,
                phase: env.scenario().phase_at(minute),
                mean_precision_pct: 100.0 * sum / iterations as f64,
            }
        })
        .collect())
}
