//! Centralized-training, decentralized-execution actor-critic.
//!
//! One parameter-shared policy acts for every agent from its local
//! observation; a centralized critic scores the full factory state. The
//! quantum variants read scaled Pauli-Z observables of the variational
//! circuits in [`crate::vqc`].

mod adam;
mod train;

pub use adam::Adam;
pub use train::{
    actor_loss_gradient, critic_loss_gradient, evaluate, rollout_episode, stream_rng, td_errors,
    Episode, EpisodeBatch, TrainConfig, Trainer, Transition, EVAL_STREAM_BASE, INIT_STREAM,
    ROLLOUT_STREAM,
};

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factory::{AgentAction, EnvError, Observation};
use crate::vqc::{
    encode_actor_observation, encode_critic_state, evaluate_observables, parameter_shift_gradient,
    CircuitLayout, ParamVector, Role, VqcError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Circuit(#[from] VqcError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: usize,
        #[source]
        source: Box<TrainError>,
    },
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Action distribution of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl PolicyOutput {
    pub fn from_logits(logits: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = logits.iter().find(|l| !l.is_finite()) {
            return Err(TrainError::NonFinite(format!("logit {bad}")));
        }
        let probabilities = softmax(&logits);
        Ok(Self { logits, probabilities })
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Categorical draw, used while training.
    Sample,
    /// Argmax with ties to the lowest index, used for execution.
    Greedy,
}

pub fn select_action<R: Rng + ?Sized>(dist: &PolicyOutput, mode: SelectionMode, rng: &mut R) -> AgentAction {
    let p = &dist.probabilities;
    match mode {
        SelectionMode::Greedy => {
            let mut best = 0;
            for (i, &v) in p.iter().enumerate() {
                if v > p[best] {
                    best = i;
                }
            }
            AgentAction(best)
        }
        SelectionMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, &v) in p.iter().enumerate() {
                acc += v;
                if u < acc {
                    return AgentAction(i);
                }
            }
            // Rounding left u above the cumulative sum: take the last action with mass.
            AgentAction(p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1))
        }
    }
}

/// TD error `r + γ V_target(s') − V(s)`; terminal steps bootstrap from 0.
pub fn td_target(reward: f64, v_next_target: f64, v_current: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { v_next_target };
    reward + gamma * bootstrap - v_current
}

/// Shared decentralized policy.
pub trait Actor: Send + Sync {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn distribution(&self, obs: &Observation) -> Result<PolicyOutput>;
    /// Gradient of `Σ_k cotangent[k] · logits[k]` with respect to the
    /// parameters, at the current parameters.
    fn logits_vjp(&self, obs: &Observation, cotangent: &[f64]) -> Result<Vec<f64>>;
    /// Human-readable architecture, stored next to parameter snapshots.
    fn describe(&self) -> String;
    /// Selection rule actually used when `requested` is asked for. Policies
    /// that are random by definition keep sampling during execution.
    fn execution_mode(&self, requested: SelectionMode) -> SelectionMode {
        requested
    }
}

/// Centralized state-value function. Takes explicit parameters so the same
/// model can evaluate both the live and the target copy.
pub trait Critic: Send + Sync {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn value_with(&self, params: &[f64], features: &[f64]) -> Result<f64>;
    /// `∂V/∂params` at the current parameters.
    fn value_gradient(&self, features: &[f64]) -> Result<Vec<f64>>;
    fn describe(&self) -> String;

    fn value(&self, features: &[f64]) -> Result<f64> {
        self.value_with(self.params(), features)
    }
}

/// Maps features in `[0, 1]` to rotation angles in `[0, π]`.
pub fn to_angles(features: &[f64]) -> Vec<f64> {
    features.iter().map(|x| x * PI).collect()
}

/// Initial angles drawn from `U(−scale, scale)`.
pub fn init_angles<R: Rng + ?Sized>(len: usize, scale: f64, rng: &mut R) -> ParamVector {
    ParamVector((0..len).map(|_| rng.gen_range(-scale..=scale)).collect())
}

/// Softmax policy over `β_a · ⟨Z⟩` of an angle-encoded observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumActor {
    pub layout: CircuitLayout,
    pub params: ParamVector,
    pub beta: f64,
}

impl QuantumActor {
    /// 8-qubit, 54-parameter actor with one measured wire per action.
    pub fn new(num_actions: usize, params: ParamVector, beta: f64) -> Result<Self> {
        let layout = if num_actions == 5 {
            CircuitLayout::default_for(Role::Actor)
        } else {
            CircuitLayout::with_budget(8, 54, (0..num_actions).collect())?
        };
        Self::with_layout(layout, params, beta)
    }

    pub fn with_layout(layout: CircuitLayout, params: ParamVector, beta: f64) -> Result<Self> {
        if params.len() != layout.parameter_count() {
            return Err(VqcError::ParamMismatch { expected: layout.parameter_count(), got: params.len() }.into());
        }
        Ok(Self { layout, params, beta })
    }

    fn encode(&self, obs: &Observation) -> Result<crate::qsim::StateVector> {
        Ok(encode_actor_observation(&to_angles(&obs.0), self.layout.num_qubits())?)
    }
}

impl Actor for QuantumActor {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params.0
    }

    fn distribution(&self, obs: &Observation) -> Result<PolicyOutput> {
        let observables = evaluate_observables(&self.layout, &self.params, &self.encode(obs)?)?;
        PolicyOutput::from_logits(observables.iter().map(|o| self.beta * o).collect())
    }

    fn logits_vjp(&self, obs: &Observation, cotangent: &[f64]) -> Result<Vec<f64>> {
        let upstream: Vec<f64> = cotangent.iter().map(|c| self.beta * c).collect();
        Ok(parameter_shift_gradient(&self.layout, &self.params, &self.encode(obs)?, &upstream)?)
    }

    fn describe(&self) -> String {
        self.layout.describe()
    }
}

/// `V(s) = β_c · ⟨Z_0⟩` of a dense-encoded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCritic {
    pub layout: CircuitLayout,
    pub params: ParamVector,
    pub beta: f64,
}

impl QuantumCritic {
    pub fn new(params: ParamVector, beta: f64) -> Result<Self> {
        Self::with_layout(CircuitLayout::default_for(Role::Critic), params, beta)
    }

    pub fn with_layout(layout: CircuitLayout, params: ParamVector, beta: f64) -> Result<Self> {
        if params.len() != layout.parameter_count() {
            return Err(VqcError::ParamMismatch { expected: layout.parameter_count(), got: params.len() }.into());
        }
        if layout.measured_wires().len() != 1 {
            return Err(TrainError::Shape("critic layout must measure exactly one wire".into()));
        }
        Ok(Self { layout, params, beta })
    }

    fn encode(&self, features: &[f64]) -> Result<crate::qsim::StateVector> {
        Ok(encode_critic_state(&to_angles(features), self.layout.num_qubits())?)
    }
}

impl Critic for QuantumCritic {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params.0
    }

    fn value_with(&self, params: &[f64], features: &[f64]) -> Result<f64> {
        let obs = evaluate_observables(&self.layout, params, &self.encode(features)?)?;
        Ok(self.beta * obs[0])
    }

    fn value_gradient(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(parameter_shift_gradient(&self.layout, &self.params, &self.encode(features)?, &[self.beta])?)
    }

    fn describe(&self) -> String {
        self.layout.describe()
    }
}

/// Hard copy of the live critic parameters into the target.
pub fn sync_target(critic_params: &[f64], target: &mut Vec<f64>) {
    target.clear();
    target.extend_from_slice(critic_params);
}
