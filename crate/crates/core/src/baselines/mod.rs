//! Comparison schemes at matched parameter budgets: small and large classical
//! actor-critics, a hybrid quantum-actor/classical-critic, and a random walk.
//!
//! Every scheme is exposed through the [`Actor`]/[`Critic`] traits so the
//! training loop in [`crate::qmac`] does not care which one it drives.

mod dense;

pub use dense::{Activation, DenseNet};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factory::{AgentAction, FactoryConfig, Observation};
use crate::qmac::{
    init_angles, select_action, stream_rng, Actor, Critic, PolicyOutput, QuantumActor, QuantumCritic,
    SelectionMode, TrainConfig, TrainError, INIT_STREAM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid baseline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

impl From<BaselineError> for TrainError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Train(inner) => inner,
            BaselineError::Shape(m) => TrainError::Shape(m),
            BaselineError::Config(m) => TrainError::Config(m),
        }
    }
}

/// Parameter budget of the small schemes, matched to the quantum model.
pub const SMALL_BUDGET: usize = 110;
/// Parameter budget of the large classical scheme.
pub const LARGE_BUDGET: usize = 40_000;
/// Share of a classical budget given to the actor.
const ACTOR_SHARE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Quantum actor, quantum critic.
    Proposed,
    /// Quantum actor, small classical critic.
    Comp1,
    /// Small classical actor-critic.
    Comp2,
    /// Large classical actor-critic.
    Comp3,
    /// Uniform random walk.
    Comp4,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::Comp1, Scheme::Comp2, Scheme::Comp3, Scheme::Comp4];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Comp1 => "comp1",
            Scheme::Comp2 => "comp2",
            Scheme::Comp3 => "comp3",
            Scheme::Comp4 => "comp4",
        }
    }

    pub fn is_trainable(self) -> bool {
        self != Scheme::Comp4
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" | "qmarl" => Ok(Scheme::Proposed),
            "comp1" | "comp1_hybrid" => Ok(Scheme::Comp1),
            "comp2" | "comp2_classical_small" => Ok(Scheme::Comp2),
            "comp3" | "comp3_classical_large" => Ok(Scheme::Comp3),
            "comp4" | "comp4_random" => Ok(Scheme::Comp4),
            other => Err(BaselineError::Config(format!(
                "unknown scheme '{other}' (expected proposed, comp1, comp2, comp3 or comp4)"
            ))),
        }
    }
}

/// Classical policy whose network output is used directly as logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalActor {
    pub net: DenseNet,
}

impl Actor for ClassicalActor {
    fn params(&self) -> &[f64] {
        &self.net.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.net.params
    }

    fn distribution(&self, obs: &Observation) -> std::result::Result<PolicyOutput, TrainError> {
        PolicyOutput::from_logits(self.net.forward(&obs.0)?)
    }

    fn logits_vjp(&self, obs: &Observation, cotangent: &[f64]) -> std::result::Result<Vec<f64>, TrainError> {
        Ok(self.net.backward(&obs.0, cotangent)?)
    }

    fn describe(&self) -> String {
        self.net.describe()
    }
}

/// Classical state-value network with a single linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCritic {
    pub net: DenseNet,
}

impl Critic for ClassicalCritic {
    fn params(&self) -> &[f64] {
        &self.net.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.net.params
    }

    fn value_with(&self, params: &[f64], features: &[f64]) -> std::result::Result<f64, TrainError> {
        Ok(self.net.forward_with(params, features)?[0])
    }

    fn value_gradient(&self, features: &[f64]) -> std::result::Result<Vec<f64>, TrainError> {
        Ok(self.net.backward(features, &[1.0])?)
    }

    fn describe(&self) -> String {
        self.net.describe()
    }
}

/// Stateless uniform policy. It keeps sampling even when greedy execution is
/// requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformActor {
    pub num_actions: usize,
}

impl Actor for UniformActor {
    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn distribution(&self, _obs: &Observation) -> std::result::Result<PolicyOutput, TrainError> {
        PolicyOutput::from_logits(vec![0.0; self.num_actions])
    }

    fn logits_vjp(&self, _obs: &Observation, _cotangent: &[f64]) -> std::result::Result<Vec<f64>, TrainError> {
        Ok(Vec::new())
    }

    fn describe(&self) -> String {
        format!("uniform over {} actions", self.num_actions)
    }

    fn execution_mode(&self, _requested: SelectionMode) -> SelectionMode {
        SelectionMode::Sample
    }
}

/// Uniform draw over the action catalog; the observation is ignored.
pub fn random_walk_policy<R: Rng + ?Sized>(_obs: &Observation, num_actions: usize, rng: &mut R) -> AgentAction {
    let uniform = PolicyOutput { logits: vec![0.0; num_actions], probabilities: vec![1.0 / num_actions as f64; num_actions] };
    select_action(&uniform, SelectionMode::Sample, rng)
}

/// Scheme together with its total parameter budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub scheme: Scheme,
    pub budget: usize,
}

impl BaselineSpec {
    pub fn new(scheme: Scheme) -> Self {
        let budget = match scheme {
            Scheme::Comp3 => LARGE_BUDGET,
            Scheme::Comp4 => 0,
            _ => SMALL_BUDGET,
        };
        Self { scheme, budget }
    }
}

/// Actor and optional critic of one scheme, ready for the trainer.
pub struct Models {
    pub actor: Box<dyn Actor>,
    pub critic: Option<Box<dyn Critic>>,
}

impl Models {
    pub fn parameter_count(&self) -> usize {
        self.actor.params().len() + self.critic.as_ref().map_or(0, |c| c.params().len())
    }
}

/// Hidden width `h` (same for every hidden layer) whose network parameter
/// count is closest to `target`; smaller widths win ties.
fn width_for(input: usize, output: usize, hidden_layers: usize, target: usize) -> usize {
    let count = |h: usize| {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(h, hidden_layers));
        sizes.push(output);
        DenseNet::count_for(&sizes)
    };
    let mut best = 1;
    for h in 1.. {
        let c = count(h);
        if c.abs_diff(target) < count(best).abs_diff(target) {
            best = h;
        }
        if c > target {
            break;
        }
    }
    best
}

fn layer_sizes(input: usize, width: usize, hidden_layers: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(width, hidden_layers));
    sizes.push(output);
    sizes
}

fn check_budget(total: usize, budget: usize) -> Result<()> {
    let tolerance = budget as f64 * 0.1;
    if (total as f64 - budget as f64).abs() > tolerance {
        return Err(BaselineError::Config(format!("{total} parameters is outside ±10% of budget {budget}")));
    }
    Ok(())
}

fn classical_pair<R: Rng + ?Sized>(env: &FactoryConfig, budget: usize, hidden_layers: usize, rng: &mut R) -> Result<Models> {
    let (obs, acts, state) = (env.observation_dim(), env.num_actions(), env.state_dim());
    let actor_target = (budget as f64 * ACTOR_SHARE).round() as usize;
    let h_a = width_for(obs, acts, hidden_layers, actor_target);
    let mut actor = DenseNet::mlp(layer_sizes(obs, h_a, hidden_layers, acts), Activation::Relu)?;
    let h_c = width_for(state, 1, hidden_layers, budget.saturating_sub(actor.parameter_count()));
    let mut critic = DenseNet::mlp(layer_sizes(state, h_c, hidden_layers, 1), Activation::Tanh)?;
    check_budget(actor.parameter_count() + critic.parameter_count(), budget)?;
    actor.init_uniform(rng);
    critic.init_uniform(rng);
    Ok(Models { actor: Box::new(ClassicalActor { net: actor }), critic: Some(Box::new(ClassicalCritic { net: critic })) })
}

/// Builds and initializes the models of `spec`. Initialization draws from the
/// seed's init stream, actor first.
pub fn build_baseline(spec: BaselineSpec, env: &FactoryConfig, train: &TrainConfig) -> Result<Models> {
    let mut rng = stream_rng(train.seed, INIT_STREAM);
    let num_actions = env.num_actions();
    let quantum_actor = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<QuantumActor> {
        Ok(QuantumActor::new(num_actions, init_angles(54, train.init_scale, rng), train.beta_actor)?)
    };
    match spec.scheme {
        Scheme::Proposed => {
            let actor = quantum_actor(&mut rng)?;
            let critic = QuantumCritic::new(init_angles(54, train.init_scale, &mut rng), train.beta_critic)?;
            Ok(Models { actor: Box::new(actor), critic: Some(Box::new(critic)) })
        }
        Scheme::Comp1 => {
            let actor = quantum_actor(&mut rng)?;
            let state = env.state_dim();
            let h = width_for(state, 1, 1, spec.budget.saturating_sub(actor.params.len()));
            let mut critic = DenseNet::mlp(vec![state, h, 1], Activation::Tanh)?;
            check_budget(actor.params.len() + critic.parameter_count(), spec.budget)?;
            critic.init_uniform(&mut rng);
            Ok(Models { actor: Box::new(actor), critic: Some(Box::new(ClassicalCritic { net: critic })) })
        }
        Scheme::Comp2 => classical_pair(env, spec.budget, 1, &mut rng),
        Scheme::Comp3 => classical_pair(env, spec.budget, 2, &mut rng),
        Scheme::Comp4 => Ok(Models { actor: Box::new(UniformActor { num_actions }), critic: None }),
    }
}
