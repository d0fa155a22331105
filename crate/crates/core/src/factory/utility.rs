//! Scalar load, quality, delay and balance utilities.

use serde::{Deserialize, Serialize};

/// Clipped load update: `clip(current − delivered + received, 0, cap)`.
pub fn load_update(current: f64, delivered: f64, received: f64, cap: f64) -> f64 {
    clip(current - delivered + received, 0.0, cap)
}

pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    hi.min(x.max(lo))
}

/// Positive predictive value of a load; an empty load counts as 1.0.
pub fn precision_utility(tp: f64, fp: f64) -> f64 {
    let total = tp + fp;
    if total <= 0.0 {
        1.0
    } else {
        (tp / total).clamp(0.0, 1.0)
    }
}

pub fn delay_utility(quality_request: bool, quality_delay: u32) -> f64 {
    -(1.0 + f64::from(quality_delay) * f64::from(u8::from(quality_request)))
}

/// Non-positive penalty for hitting either bound. `residual` is the
/// unclipped magnitude `|c − a + b|`.
pub fn balance_utility(residual: f64, cap: f64, hit_floor: bool, hit_ceiling: bool) -> f64 {
    let mut penalty = 0.0;
    if hit_floor {
        penalty += residual;
    }
    if hit_ceiling {
        penalty += (cap - residual).abs();
    }
    -penalty
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub delay: f64,
    pub balance: f64,
    pub warehouse: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { delay: 0.1, balance: 1.0, warehouse: 10.0 }
    }
}

/// Per-step utilities for every agent and site.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepUtilities {
    pub quality: Vec<f64>,
    pub delay: Vec<f64>,
    pub balance: Vec<f64>,
    pub warehouse: Vec<f64>,
}

/// Shared team reward `Σ_n (u^q + w_d u^d + w_b u^b) + w_W Σ_m u^W`.
pub fn reward(u: &StepUtilities, w: &RewardWeights) -> f64 {
    let agents: f64 = u
        .quality
        .iter()
        .zip(&u.delay)
        .zip(&u.balance)
        .map(|((q, d), b)| q + w.delay * d + w.balance * b)
        .sum();
    agents + w.warehouse * u.warehouse.iter().sum::<f64>()
}
