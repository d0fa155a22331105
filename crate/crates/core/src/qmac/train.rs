use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{select_action, td_target, Actor, Adam, Critic, PolicyOutput, Result, SelectionMode, TrainError};
use crate::factory::{AgentAction, FactoryEnv, Observation, StepMetrics};
use crate::metrics::{EpisodeAccumulator, EpisodeSummary};

/// Rng stream for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// Rng stream for training rollouts.
pub const ROLLOUT_STREAM: u64 = 1;
/// Evaluation episode `i` uses stream `EVAL_STREAM_BASE + i`.
pub const EVAL_STREAM_BASE: u64 = 1 << 32;

/// Independent ChaCha stream derived from one seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub weight_decay: f64,
    pub gamma: f64,
    pub beta_actor: f64,
    pub beta_critic: f64,
    /// Hard target sync period, in epochs.
    pub target_update_period: usize,
    pub max_epochs: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Initial angles are drawn from `U(−init_scale, init_scale)`.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-2,
            critic_lr: 1e-3,
            weight_decay: 1e-5,
            gamma: 0.99,
            beta_actor: 3.0,
            beta_critic: 35.0,
            target_update_period: 10,
            max_epochs: 1000,
            eval_episodes: 100,
            seed: 0,
            init_scale: PI / 50.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.beta_actor.is_finite() && self.beta_critic.is_finite() && self.beta_critic > 0.0) {
            return bad("beta scales must be finite, beta_critic positive");
        }
        if self.target_update_period == 0 {
            return bad("target_update_period must be at least 1");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be finite and non-negative");
        }
        Ok(())
    }
}

/// One synchronous step of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub observations: Vec<Observation>,
    pub actions: Vec<AgentAction>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Time-ordered transitions of a single episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeBatch {
    pub transitions: Vec<Transition>,
}

impl EpisodeBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub batch: EpisodeBatch,
    pub steps: Vec<StepMetrics>,
    pub summary: EpisodeSummary,
}

/// Plays one full episode from a fresh reset.
pub fn rollout_episode<R: Rng + ?Sized>(
    env: &FactoryEnv,
    actor: &dyn Actor,
    mode: SelectionMode,
    rng: &mut R,
) -> Result<Episode> {
    let config = env.config();
    let (mut state, mut obs) = env.reset_with(rng);
    let mut batch = EpisodeBatch::default();
    let mut steps = Vec::with_capacity(config.episode_length);
    let mut acc = EpisodeAccumulator::default();
    while !state.is_terminal(config) {
        let step = state.t;
        let at = |e| TrainError::AtStep { step, source: Box::new(e) };
        let dists: Vec<PolicyOutput> =
            obs.par_iter().map(|o| actor.distribution(o)).collect::<Result<_>>().map_err(at)?;
        let actions: Vec<AgentAction> = dists.iter().map(|d| select_action(d, actor.execution_mode(mode), rng)).collect();
        let out = env.step(&state, &actions, rng).map_err(|e| at(e.into()))?;
        acc.push(out.reward, &out.metrics);
        batch.transitions.push(Transition {
            state: state.critic_features(config),
            observations: obs,
            actions,
            reward: out.reward,
            next_state: out.state.critic_features(config),
            terminal: out.done,
        });
        steps.push(out.metrics);
        state = out.state;
        obs = out.observations;
    }
    Ok(Episode { batch, steps, summary: acc.finish() })
}

/// Greedy evaluation episodes, run in parallel, each on its own rng stream.
pub fn evaluate(env: &FactoryEnv, actor: &dyn Actor, episodes: usize, seed: u64) -> Result<Vec<Episode>> {
    (0..episodes as u64)
        .into_par_iter()
        .map(|i| rollout_episode(env, actor, SelectionMode::Greedy, &mut stream_rng(seed, EVAL_STREAM_BASE + i)))
        .collect()
}

/// `y_t` for every transition, live critic on `s_t`, target parameters on `s_{t+1}`.
pub fn td_errors(batch: &EpisodeBatch, critic: &dyn Critic, target: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    batch
        .transitions
        .par_iter()
        .enumerate()
        .map(|(t, tr)| {
            let eval = || -> Result<f64> {
                let v = critic.value(&tr.state)?;
                let v_next = if tr.terminal { 0.0 } else { critic.value_with(target, &tr.next_state)? };
                let y = td_target(tr.reward, v_next, v, gamma, tr.terminal);
                if !y.is_finite() {
                    return Err(TrainError::NonFinite(format!("td error {y}")));
                }
                Ok(y)
            };
            eval().map_err(|e| TrainError::AtStep { step: t, source: Box::new(e) })
        })
        .collect()
}

fn check_weights(batch: &EpisodeBatch, ys: &[f64]) -> Result<()> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if ys.len() != batch.len() {
        return Err(TrainError::Shape(format!("{} td errors for {} transitions", ys.len(), batch.len())));
    }
    Ok(())
}

fn mean_of(parts: Vec<Vec<f64>>, len: usize, count: usize) -> Vec<f64> {
    let mut total = vec![0.0; len];
    for part in parts {
        for (acc, g) in total.iter_mut().zip(part) {
            *acc += g;
        }
    }
    total.iter_mut().for_each(|g| *g /= count as f64);
    total
}

/// Gradient of `(1/T) Σ_t Σ_n −y_t log π(a^n_t | o^n_t)` with `y_t` held
/// constant. All agents share the actor, so their terms add.
pub fn actor_loss_gradient(actor: &dyn Actor, batch: &EpisodeBatch, ys: &[f64]) -> Result<Vec<f64>> {
    check_weights(batch, ys)?;
    let len = actor.params().len();
    let jobs: Vec<(usize, &Observation, AgentAction)> = batch
        .transitions
        .iter()
        .enumerate()
        .flat_map(|(t, tr)| tr.observations.iter().zip(&tr.actions).map(move |(o, &a)| (t, o, a)))
        .collect();
    let parts = jobs
        .par_iter()
        .map(|&(t, obs, action)| {
            let y = ys[t];
            if y == 0.0 || len == 0 {
                return Ok(vec![0.0; len]);
            }
            let run = || -> Result<Vec<f64>> {
                let dist = actor.distribution(obs)?;
                if action.0 >= dist.probabilities.len() {
                    return Err(TrainError::Shape(format!("action {} outside policy", action.0)));
                }
                // d(−y log p_a)/d logits = −y (e_a − p)
                let cotangent: Vec<f64> = dist
                    .probabilities
                    .iter()
                    .enumerate()
                    .map(|(k, p)| -y * (f64::from(u8::from(k == action.0)) - p))
                    .collect();
                actor.logits_vjp(obs, &cotangent)
            };
            run().map_err(|e| TrainError::AtStep { step: t, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_of(parts, len, batch.len()))
}

/// Gradient of `(1/T) Σ_t y_t²` with respect to the live critic, target fixed:
/// `(1/T) Σ_t 2 y_t (−∂V(s_t)/∂φ)`.
pub fn critic_loss_gradient(critic: &dyn Critic, batch: &EpisodeBatch, ys: &[f64]) -> Result<Vec<f64>> {
    check_weights(batch, ys)?;
    let len = critic.params().len();
    let parts = batch
        .transitions
        .par_iter()
        .zip(ys.par_iter())
        .enumerate()
        .map(|(t, (tr, &y))| {
            if y == 0.0 {
                return Ok(vec![0.0; len]);
            }
            let grad = critic
                .value_gradient(&tr.state)
                .map_err(|e| TrainError::AtStep { step: t, source: Box::new(e) })?;
            Ok(grad.into_iter().map(|g| -2.0 * y * g).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_of(parts, len, batch.len()))
}

/// Episode-per-update actor-critic loop with a hard-synced target critic.
pub struct Trainer {
    env: FactoryEnv,
    actor: Box<dyn Actor>,
    critic: Option<Box<dyn Critic>>,
    target: Vec<f64>,
    actor_opt: Adam,
    critic_opt: Adam,
    config: TrainConfig,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    /// The target critic starts as a copy of the critic's current parameters.
    /// Without a critic the policy is rolled out but never updated.
    pub fn new(
        env: FactoryEnv,
        actor: Box<dyn Actor>,
        critic: Option<Box<dyn Critic>>,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let target = critic.as_ref().map(|c| c.params().to_vec()).unwrap_or_default();
        let actor_opt = Adam::new(actor.params().len(), config.actor_lr, config.weight_decay);
        let critic_opt = Adam::new(target.len(), config.critic_lr, config.weight_decay);
        let rng = stream_rng(config.seed, ROLLOUT_STREAM);
        Ok(Self { env, actor, critic, target, actor_opt, critic_opt, config, rng, epoch: 0 })
    }

    pub fn env(&self) -> &FactoryEnv {
        &self.env
    }

    pub fn actor(&self) -> &dyn Actor {
        self.actor.as_ref()
    }

    pub fn critic(&self) -> Option<&dyn Critic> {
        self.critic.as_deref()
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Roll out one sampled episode, update from it, and discard it.
    pub fn run_epoch(&mut self) -> Result<EpisodeSummary> {
        let epoch = self.epoch;
        let at = |e| TrainError::AtEpoch { epoch, source: Box::new(e) };
        let mut episode =
            rollout_episode(&self.env, self.actor.as_ref(), SelectionMode::Sample, &mut self.rng).map_err(at)?;
        if let Some(critic) = self.critic.as_mut() {
            let ys = td_errors(&episode.batch, critic.as_ref(), &self.target, self.config.gamma).map_err(at)?;
            let actor_grad = actor_loss_gradient(self.actor.as_ref(), &episode.batch, &ys).map_err(at)?;
            let critic_grad = critic_loss_gradient(critic.as_ref(), &episode.batch, &ys).map_err(at)?;
            self.actor_opt.step(self.actor.params_mut(), &actor_grad).map_err(at)?;
            self.critic_opt.step(critic.params_mut(), &critic_grad).map_err(at)?;
        }
        episode.batch.clear();
        self.epoch += 1;
        if self.epoch.is_multiple_of(self.config.target_update_period) {
            if let Some(critic) = self.critic.as_ref() {
                super::sync_target(critic.params(), &mut self.target);
            }
        }
        Ok(episode.summary)
    }

    /// Runs the remaining epochs up to `max_epochs`.
    pub fn train(&mut self) -> Result<Vec<EpisodeSummary>> {
        let mut out = Vec::with_capacity(self.config.max_epochs.saturating_sub(self.epoch));
        while self.epoch < self.config.max_epochs {
            out.push(self.run_epoch()?);
        }
        Ok(out)
    }

    pub fn evaluate(&self) -> Result<Vec<Episode>> {
        evaluate(&self.env, self.actor.as_ref(), self.config.eval_episodes, self.config.seed)
    }

    pub fn into_parts(self) -> (Box<dyn Actor>, Option<Box<dyn Critic>>) {
        (self.actor, self.critic)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{init_angles, QuantumActor, QuantumCritic};
    use super::*;
    use crate::factory::FactoryConfig;
    use crate::vqc::{Axis, CircuitLayout, ParamVector};

    fn small_env() -> FactoryEnv {
        FactoryEnv::with_config(FactoryConfig { num_agents: 2, episode_length: 4, ..Default::default() }).unwrap()
    }

    fn models(seed: u64) -> (QuantumActor, QuantumCritic) {
        let mut rng = stream_rng(seed, INIT_STREAM);
        let a = QuantumActor::new(5, init_angles(54, 0.3, &mut rng), 3.0).unwrap();
        let c = QuantumCritic::new(init_angles(54, 0.3, &mut rng), 35.0).unwrap();
        (a, c)
    }

    fn toy_batch(state: Vec<f64>, reward: f64) -> EpisodeBatch {
        EpisodeBatch {
            transitions: vec![Transition {
                state: state.clone(),
                observations: vec![Observation(vec![0.0; 6])],
                actions: vec![AgentAction(2)],
                reward,
                next_state: state,
                terminal: true,
            }],
        }
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        for cfg in [
            TrainConfig { gamma: 1.0, ..Default::default() },
            TrainConfig { actor_lr: 0.0, ..Default::default() },
            TrainConfig { target_update_period: 0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(TrainError::Config(_))));
        }
    }

    #[test]
    fn zero_weights_give_zero_gradients() {
        let (actor, critic) = models(1);
        let batch = toy_batch(vec![0.2; 6], 0.0);
        assert!(actor_loss_gradient(&actor, &batch, &[0.0]).unwrap().iter().all(|&g| g == 0.0));
        assert!(critic_loss_gradient(&critic, &batch, &[0.0]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_batch_is_an_error() {
        let (actor, critic) = models(1);
        let empty = EpisodeBatch::default();
        assert_eq!(actor_loss_gradient(&actor, &empty, &[]), Err(TrainError::EmptyBatch));
        assert_eq!(critic_loss_gradient(&critic, &empty, &[]), Err(TrainError::EmptyBatch));
        assert_eq!(td_errors(&empty, &critic, critic.params(), 0.99), Err(TrainError::EmptyBatch));
    }

    #[test]
    fn critic_gradient_is_linear_in_td_error() {
        let (_, critic) = models(2);
        let batch = toy_batch(vec![0.4; 6], 0.0);
        let g1 = critic_loss_gradient(&critic, &batch, &[0.7]).unwrap();
        let g2 = critic_loss_gradient(&critic, &batch, &[1.4]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_agents_add_their_contributions() {
        let (actor, _) = models(3);
        let o1 = Observation(vec![1.0, 0.0, 0.0, 0.3, 0.1, 0.2]);
        let o2 = Observation(vec![0.0, 1.0, 0.0, 0.5, 0.1, 0.2]);
        let single = |o: &Observation, a| EpisodeBatch {
            transitions: vec![Transition {
                state: vec![],
                observations: vec![o.clone()],
                actions: vec![AgentAction(a)],
                reward: 0.0,
                next_state: vec![],
                terminal: true,
            }],
        };
        let both = EpisodeBatch {
            transitions: vec![Transition {
                state: vec![],
                observations: vec![o1.clone(), o2.clone()],
                actions: vec![AgentAction(1), AgentAction(4)],
                reward: 0.0,
                next_state: vec![],
                terminal: true,
            }],
        };
        let g = actor_loss_gradient(&actor, &both, &[0.8]).unwrap();
        let g1 = actor_loss_gradient(&actor, &single(&o1, 1), &[0.8]).unwrap();
        let g2 = actor_loss_gradient(&actor, &single(&o2, 4), &[0.8]).unwrap();
        for i in 0..g.len() {
            assert!((g[i] - g1[i] - g2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn toy_critic_gradient_matches_closed_form() {
        // V = β cos θ on |0⟩; loss y², y = r − V, dL/dθ = 2y · β sin θ.
        let theta = 0.7;
        let critic =
            QuantumCritic::with_layout(CircuitLayout::single_rotation(Axis::Y), ParamVector(vec![theta]), 35.0).unwrap();
        let batch = toy_batch(vec![0.0], -1.0);
        let ys = td_errors(&batch, &critic, critic.params(), 0.99).unwrap();
        let y = -1.0 - 35.0 * theta.cos();
        assert!((ys[0] - y).abs() < 1e-12);
        let g = critic_loss_gradient(&critic, &batch, &ys).unwrap();
        assert!((g[0] - 2.0 * y * 35.0 * theta.sin()).abs() < 1e-9);
    }

    #[test]
    fn zero_epochs_leave_parameters_untouched() {
        let (actor, critic) = models(4);
        let (a0, c0) = (actor.params.clone(), critic.params.clone());
        let cfg = TrainConfig { max_epochs: 0, ..Default::default() };
        let mut trainer = Trainer::new(small_env(), Box::new(actor), Some(Box::new(critic)), cfg).unwrap();
        assert!(trainer.train().unwrap().is_empty());
        assert_eq!(trainer.actor().params(), &a0[..]);
        assert_eq!(trainer.critic().unwrap().params(), &c0[..]);
        assert_eq!(trainer.target_params(), &c0[..]);
    }

    #[test]
    fn training_is_deterministic_and_target_holds_between_syncs() {
        let run = || {
            let (actor, critic) = models(5);
            let cfg = TrainConfig { max_epochs: 3, target_update_period: 3, seed: 9, ..Default::default() };
            let mut trainer = Trainer::new(small_env(), Box::new(actor), Some(Box::new(critic)), cfg).unwrap();
            let initial_target = trainer.target_params().to_vec();
            let mut summaries = Vec::new();
            for _ in 0..2 {
                summaries.push(trainer.run_epoch().unwrap());
                assert_eq!(trainer.target_params(), &initial_target[..]);
            }
            summaries.push(trainer.run_epoch().unwrap());
            assert_eq!(trainer.target_params(), trainer.critic().unwrap().params());
            assert_ne!(trainer.actor().params(), &models(5).0.params[..]);
            (summaries, trainer.actor().params().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn evaluation_is_reproducible() {
        let (actor, _) = models(6);
        let env = small_env();
        let a = evaluate(&env, &actor, 3, 11).unwrap();
        let b = evaluate(&env, &actor, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].steps.len(), 4);
        assert!(a[2].batch.transitions.last().unwrap().terminal);
    }

    #[test]
    fn stream_rngs_are_independent() {
        let a: u64 = stream_rng(1, 0).gen();
        let b: u64 = stream_rng(1, 1).gen();
        let c: u64 = stream_rng(1, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
