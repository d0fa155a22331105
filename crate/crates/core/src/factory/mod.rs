//! Multi-AMR LCD factory environment.
//!
//! `N` mobile robots each receive panels every step and deliver them to one
//! of `M` warehouses, or park for a quality re-inspection that removes every
//! defective panel. All agents share one reward built from load precision,
//! processing delay and over/underflow penalties.

mod env;
mod scenario;
mod utility;

pub use env::{FactoryEnv, StepMetrics, StepOutcome};
pub use scenario::{NamedSource, Phase, PrecisionSource, Scenario};
pub use utility::{
    balance_utility, clip, delay_utility, load_update, precision_utility, reward, RewardWeights,
    StepUtilities,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary index bits prepended to every observation.
pub const INDEX_BITS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid factory configuration: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("action index {index} outside catalog of {size}")]
    ActionIndex { index: usize, size: usize },
    #[error("episode already finished at t={0}")]
    Terminal(usize),
}

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactoryConfig {
    pub num_agents: usize,
    pub num_sites: usize,
    /// kg
    pub warehouse_capacity: f64,
    /// kg
    pub amr_capacity: f64,
    pub episode_length: usize,
    /// kg per panel
    pub lcd_unit_weight: f64,
    pub precision_catalog: Vec<f64>,
    /// Steps an AMR stays parked after requesting quality control.
    pub quality_delay: u32,
    pub reward_weights: RewardWeights,
    /// Upper bound of the uniform per-step arrival mass, kg.
    pub arrival_cap: f64,
    /// Demand drained from each warehouse per step, kg.
    pub warehouse_outflow: f64,
    /// Deliverable quantities, kg.
    pub quantity_levels: Vec<f64>,
    pub minutes_per_step: f64,
}

impl Default for FactoryConfig {
    fn default() -> Self {
        Self {
            num_agents: 6,
            num_sites: 2,
            warehouse_capacity: 2000.0,
            amr_capacity: 500.0,
            episode_length: 30,
            lcd_unit_weight: 6.0,
            precision_catalog: vec![0.619, 0.958, 0.971],
            quality_delay: 3,
            reward_weights: RewardWeights::default(),
            arrival_cap: 60.0,
            warehouse_outflow: 100.0,
            quantity_levels: vec![30.0, 90.0],
            minutes_per_step: 2.0,
        }
    }
}

impl FactoryConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(EnvError::Config(msg));
        if !(1..=1 << INDEX_BITS).contains(&self.num_agents) {
            return fail(format!("num_agents {} outside 1..={}", self.num_agents, 1 << INDEX_BITS));
        }
        if self.num_sites == 0 {
            return fail("num_sites must be at least 1".into());
        }
        if self.episode_length == 0 {
            return fail("episode_length must be at least 1".into());
        }
        for (name, v) in [
            ("warehouse_capacity", self.warehouse_capacity),
            ("amr_capacity", self.amr_capacity),
            ("lcd_unit_weight", self.lcd_unit_weight),
            ("minutes_per_step", self.minutes_per_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("arrival_cap", self.arrival_cap), ("warehouse_outflow", self.warehouse_outflow)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.precision_catalog.is_empty() || self.precision_catalog.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return fail("precision_catalog entries must lie in (0, 1]".into());
        }
        if self.quantity_levels.is_empty() || self.quantity_levels.iter().any(|&q| !(q >= 0.0 && q.is_finite())) {
            return fail("quantity_levels must be non-empty and non-negative".into());
        }
        let w = self.reward_weights;
        if [w.delay, w.balance, w.warehouse].iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return fail("reward weights must be non-negative".into());
        }
        Ok(())
    }

    /// `M · |P|` delivery actions plus the quality request.
    pub fn num_actions(&self) -> usize {
        self.num_sites * self.quantity_levels.len() + 1
    }

    pub fn observation_dim(&self) -> usize {
        INDEX_BITS + 1 + self.num_sites
    }

    pub fn state_dim(&self) -> usize {
        2 * self.num_agents + self.num_sites
    }

    pub fn horizon_minutes(&self) -> f64 {
        self.episode_length as f64 * self.minutes_per_step
    }
}

/// Discrete action index into the catalog
/// `[(site 0, q_0), (site 0, q_1), …, (site M−1, q_last), quality request]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentAction(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionKind {
    Deliver { site: usize, quantity: f64 },
    QualityRequest,
}

impl AgentAction {
    pub fn decode(self, config: &FactoryConfig) -> Result<ActionKind> {
        let size = config.num_actions();
        let levels = config.quantity_levels.len();
        match self.0 {
            i if i + 1 == size => Ok(ActionKind::QualityRequest),
            i if i < size => Ok(ActionKind::Deliver {
                site: i / levels,
                quantity: config.quantity_levels[i % levels],
            }),
            index => Err(EnvError::ActionIndex { index, size }),
        }
    }
}

/// Local view of one agent, every entry in `[0, 1]`: index bits
/// (least-significant first), own load, then every warehouse load, each
/// divided by its capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn agent_index(&self) -> usize {
        self.0[..INDEX_BITS]
            .iter()
            .enumerate()
            .map(|(k, &b)| usize::from(b > 0.5) << k)
            .sum()
    }
}

/// True-positive / false-positive panel counts carried by one AMR. Counts
/// are fractional after proportional delivery or overflow losses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DefectStats {
    pub tp: f64,
    pub fp: f64,
}

impl DefectStats {
    pub fn precision(&self) -> f64 {
        precision_utility(self.tp, self.fp)
    }

    pub fn panels(&self) -> f64 {
        self.tp + self.fp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoryState {
    pub t: usize,
    pub warehouse_loads: Vec<f64>,
    pub amr_loads: Vec<f64>,
    pub defects: Vec<DefectStats>,
    /// Remaining parked steps per agent; 0 when active.
    pub pending_quality: Vec<u32>,
    pub last_delay_utilities: Vec<f64>,
    /// Precision of panels currently arriving at each agent.
    pub input_precision: Vec<f64>,
    pub phase: usize,
}

impl FactoryState {
    pub fn observation(&self, agent: usize, config: &FactoryConfig) -> Observation {
        let mut v = Vec::with_capacity(config.observation_dim());
        v.extend((0..INDEX_BITS).map(|k| ((agent >> k) & 1) as f64));
        v.push(self.amr_loads[agent] / config.amr_capacity);
        v.extend(self.warehouse_loads.iter().map(|c| c / config.warehouse_capacity));
        Observation(v)
    }

    pub fn observations(&self, config: &FactoryConfig) -> Vec<Observation> {
        (0..config.num_agents).map(|n| self.observation(n, config)).collect()
    }

    /// Centralized critic input in `[0, 1]`: per agent its load and its last
    /// delay utility mapped from `[−(1+τ), −1]`, then every warehouse load.
    pub fn critic_features(&self, config: &FactoryConfig) -> Vec<f64> {
        let tau = f64::from(config.quality_delay);
        let mut v = Vec::with_capacity(config.state_dim());
        for n in 0..config.num_agents {
            v.push(self.amr_loads[n] / config.amr_capacity);
            let delay = if tau > 0.0 { ((-self.last_delay_utilities[n] - 1.0) / tau).clamp(0.0, 1.0) } else { 0.0 };
            v.push(delay);
        }
        v.extend(self.warehouse_loads.iter().map(|c| c / config.warehouse_capacity));
        v
    }

    pub fn is_terminal(&self, config: &FactoryConfig) -> bool {
        self.t >= config.episode_length
    }
}
