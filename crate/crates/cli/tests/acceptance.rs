//! End-to-end acceptance checks. Each check prints one `[PASS]`/`[FAIL]` line
//! on stderr and then asserts. Checks with a time limit run one at a time.

use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmarl_core::baselines::{build_baseline, BaselineSpec, Scheme};
use qmarl_core::experiment::{encoding_benchmark, robustness_series, EncodingBenchConfig, EncodingScheme};
use qmarl_core::factory::{
    AgentAction, DefectStats, FactoryConfig, FactoryEnv, FactoryState, Observation, Phase, PrecisionSource, Scenario,
};
use qmarl_core::qmac::{
    actor_loss_gradient, critic_loss_gradient, softmax, td_errors, Actor, Critic, EpisodeBatch, QuantumActor,
    QuantumCritic, TrainConfig, Trainer, Transition,
};
use qmarl_core::qsim::{GateSpec, StateVector};
use qmarl_core::vqc::{encode_critic_state, evaluate_observables, parameter_shift_gradient, CircuitLayout, ParamVector};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: u32, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {criterion}: {detail}");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

// ---------------------------------------------------------------- 1

fn random_gate(n: usize, rng: &mut ChaCha8Rng) -> GateSpec {
    let t = rng.gen_range(0..n);
    let kinds = if n >= 2 { 8 } else { 6 };
    let angle = rng.gen_range(-2.0 * PI..2.0 * PI);
    let control = (t + rng.gen_range(1..n.max(2))) % n;
    match rng.gen_range(0..kinds) {
        0 => GateSpec::x(t),
        1 => GateSpec::y(t),
        2 => GateSpec::z(t),
        3 => GateSpec::rx(t, angle),
        4 => GateSpec::ry(t, angle),
        5 => GateSpec::rz(t, angle),
        6 => GateSpec::cz(control, t),
        _ => GateSpec::cnot(control, t),
    }
}

#[test]
fn criterion_1_quantum_core() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let gates: Vec<GateSpec> = (0..rng.gen_range(0..=64)).map(|_| random_gate(n, &mut rng)).collect();
        let out = StateVector::zero(n).unwrap().apply_circuit(&gates).unwrap();
        worst_norm = worst_norm.max((out.norm_sqr() - 1.0).abs());
    }
    let mut worst_cos: f64 = 0.0;
    for k in 0..100 {
        let delta = -PI + 2.0 * PI * k as f64 / 99.0;
        let s = StateVector::zero(1).unwrap().apply_gate(&GateSpec::ry(0, delta)).unwrap();
        worst_cos = worst_cos.max((s.expectation_z(0).unwrap() - delta.cos()).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst_norm < 1e-10 && worst_cos < 1e-12 && within(elapsed, Duration::from_secs(10));
    verdict(1, ok, &format!("max norm error {worst_norm:.2e}, max |<Z>-cos| {worst_cos:.2e}, {elapsed:.2?}"));
}

// ---------------------------------------------------------------- 2

fn central_difference(f: impl Fn(&[f64]) -> f64, params: &[f64], i: usize) -> f64 {
    let h = 1e-4;
    let mut p = params.to_vec();
    p[i] += h;
    let plus = f(&p);
    p[i] -= 2.0 * h;
    let minus = f(&p);
    (plus - minus) / (2.0 * h)
}

fn toy_batch(states: &[Vec<f64>], obs: &[Vec<f64>], actions: &[usize], rewards: &[f64]) -> EpisodeBatch {
    let t_max = rewards.len();
    EpisodeBatch {
        transitions: (0..t_max)
            .map(|t| Transition {
                state: states[t].clone(),
                observations: vec![Observation(obs[t].clone())],
                actions: vec![AgentAction(actions[t])],
                reward: rewards[t],
                next_state: states[t + 1].clone(),
                terminal: t + 1 == t_max,
            })
            .collect(),
    }
}

fn uniform_vec(len: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

#[test]
fn criterion_2_parameter_shift_fidelity() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut worst_circuit: f64 = 0.0;
    for _ in 0..20 {
        let q = rng.gen_range(1..=4);
        let budget = rng.gen_range(1..=12);
        let wires: Vec<usize> = (0..q).filter(|_| rng.gen_bool(0.6)).collect();
        let wires = if wires.is_empty() { vec![0] } else { wires };
        let upstream = uniform_vec(wires.len(), -2.0, 2.0, &mut rng);
        let layout = CircuitLayout::with_budget(q, budget, wires).unwrap();
        let params = uniform_vec(budget, -PI, PI, &mut rng);
        let encoded = encode_critic_state(&uniform_vec(2 * q, 0.0, PI, &mut rng), q).unwrap();
        let scalar = |p: &[f64]| -> f64 {
            evaluate_observables(&layout, p, &encoded).unwrap().iter().zip(&upstream).map(|(o, u)| o * u).sum()
        };
        let grad = parameter_shift_gradient(&layout, &params, &encoded, &upstream).unwrap();
        for i in 0..budget {
            worst_circuit = worst_circuit.max((grad[i] - central_difference(scalar, &params, i)).abs());
        }
    }

    // Actor loss −(1/T) Σ_t y_t log π(a_t | o_t) on a 3-qubit, 3-action policy.
    let mut worst_actor: f64 = 0.0;
    let mut worst_critic: f64 = 0.0;
    for _ in 0..5 {
        let layout = CircuitLayout::with_budget(3, 9, vec![0, 1, 2]).unwrap();
        let actor_of = |p: &[f64]| QuantumActor::with_layout(layout.clone(), ParamVector(p.to_vec()), 3.0).unwrap();
        let params = uniform_vec(9, -PI, PI, &mut rng);
        let obs: Vec<Vec<f64>> = (0..4).map(|_| uniform_vec(3, 0.0, 1.0, &mut rng)).collect();
        let actions: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
        let ys = uniform_vec(4, -5.0, 5.0, &mut rng);
        let batch = toy_batch(&vec![vec![0.0]; 5], &obs, &actions, &[0.0; 4]);
        let loss = |p: &[f64]| -> f64 {
            let actor = actor_of(p);
            batch
                .transitions
                .iter()
                .zip(&ys)
                .map(|(tr, y)| -y * actor.distribution(&tr.observations[0]).unwrap().probabilities[tr.actions[0].0].ln())
                .sum::<f64>()
                / batch.len() as f64
        };
        let grad = actor_loss_gradient(&actor_of(&params), &batch, &ys).unwrap();
        for i in 0..params.len() {
            worst_actor = worst_actor.max((grad[i] - central_difference(loss, &params, i)).abs());
        }

        // Critic loss (1/T) Σ_t y_t² with a fixed target.
        let layout = CircuitLayout::with_budget(2, 8, vec![0]).unwrap();
        let critic_of = |p: &[f64]| QuantumCritic::with_layout(layout.clone(), ParamVector(p.to_vec()), 35.0).unwrap();
        let params = uniform_vec(8, -PI, PI, &mut rng);
        let target = uniform_vec(8, -PI, PI, &mut rng);
        let states: Vec<Vec<f64>> = (0..5).map(|_| uniform_vec(4, 0.0, 1.0, &mut rng)).collect();
        let rewards = uniform_vec(4, -2.0, 2.0, &mut rng);
        let batch = toy_batch(&states, &vec![vec![0.0; 3]; 4], &[0; 4], &rewards);
        let loss = |p: &[f64]| -> f64 {
            let ys = td_errors(&batch, &critic_of(p), &target, 0.99).unwrap();
            ys.iter().map(|y| y * y).sum::<f64>() / batch.len() as f64
        };
        let critic = critic_of(&params);
        let ys = td_errors(&batch, &critic, &target, 0.99).unwrap();
        let grad = critic_loss_gradient(&critic, &batch, &ys).unwrap();
        for i in 0..params.len() {
            worst_critic = worst_critic.max((grad[i] - central_difference(loss, &params, i)).abs());
        }
    }

    let elapsed = start.elapsed();
    let ok = worst_circuit < 1e-5 && worst_actor < 1e-5 && worst_critic < 1e-5 && within(elapsed, Duration::from_secs(60));
    verdict(
        2,
        ok,
        &format!(
            "circuits {worst_circuit:.2e}, actor loss {worst_actor:.2e}, critic loss {worst_critic:.2e}, {elapsed:.2?}"
        ),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_parameter_parity() {
    let env = FactoryConfig::default();
    let train = TrainConfig::default();
    let count = |scheme| build_baseline(BaselineSpec::new(scheme), &env, &train).unwrap().parameter_count();
    let (proposed, comp2, comp3) = (count(Scheme::Proposed), count(Scheme::Comp2), count(Scheme::Comp3));
    let ok = proposed == 108 && (99..=121).contains(&comp2) && (36_000..=44_000).contains(&comp3);
    verdict(3, ok, &format!("proposed {proposed}, comp2 {comp2}, comp3 {comp3}"));
}

// ---------------------------------------------------------------- 4

/// Straight-line transition written from the model equations, consuming the
/// rng in the documented order: phase redraws, then per agent the arrival
/// mass and the fractional-panel coin.
struct OracleStep {
    state: FactoryState,
    reward: f64,
}

fn oracle_step(c: &FactoryConfig, phases: &[Phase], s: &FactoryState, actions: &[usize], rng: &mut ChaCha8Rng) -> OracleStep {
    let minute = s.t as f64 * c.minutes_per_step;
    let mut phase = 0;
    for (k, p) in phases.iter().enumerate() {
        if p.start_minute <= minute {
            phase = k;
        }
    }
    let mut precision = s.input_precision.clone();
    if phase != s.phase {
        for p in precision.iter_mut() {
            *p = match phases[phase].precision {
                PrecisionSource::Fixed(v) => v,
                PrecisionSource::Uniform { uniform: (lo, hi) } => lo + (hi - lo) * rng.gen::<f64>(),
                _ => c.precision_catalog[rng.gen_range(0..c.precision_catalog.len())],
            };
        }
    }

    let n = c.num_agents;
    let tau = c.quality_delay;
    let quality_action = c.num_sites * c.quantity_levels.len();
    let mut amr = s.amr_loads.clone();
    let mut defects = s.defects.clone();
    let mut pending = s.pending_quality.clone();
    let mut inflow = vec![0.0; c.num_sites];
    let mut u_d = vec![0.0; n];
    let mut u_b = vec![0.0; n];
    for k in 0..n {
        let mut a = 0.0;
        let mut site = None;
        let mut inspected = false;
        if pending[k] > 0 {
            pending[k] -= 1;
            inspected = pending[k] == 0;
            u_d[k] = -1.0;
        } else if actions[k] == quality_action {
            pending[k] = tau;
            inspected = tau == 0;
            u_d[k] = -(1.0 + tau as f64);
        } else {
            site = Some(actions[k] / c.quantity_levels.len());
            a = c.quantity_levels[actions[k] % c.quantity_levels.len()];
            u_d[k] = -1.0;
        }
        if inspected {
            amr[k] = f64::max(0.0, amr[k] - defects[k].fp * c.lcd_unit_weight);
            defects[k].fp = 0.0;
        }

        let panels = (rng.gen::<f64>() * c.arrival_cap / c.lcd_unit_weight).floor();
        let mean_tp = panels * precision[k];
        let coin = rng.gen::<f64>();
        let tp = f64::min(panels, mean_tp.floor() + if coin < mean_tp.fract() { 1.0 } else { 0.0 });
        let b = panels * c.lcd_unit_weight;

        let c_now = amr[k];
        let c_tilde = c_now - a + b;
        let c_next = c_tilde.clamp(0.0, c.amr_capacity);
        if let Some(m) = site {
            inflow[m] += f64::min(a, c_now + b);
        }
        let share = if c_now + b > 0.0 { c_next / (c_now + b) } else { 0.0 };
        defects[k] = DefectStats { tp: (defects[k].tp + tp) * share, fp: (defects[k].fp + panels - tp) * share };
        amr[k] = c_next;

        let mut ub = 0.0;
        if c_next == 0.0 {
            ub -= c_tilde.abs();
        }
        if c_next == c.amr_capacity {
            ub -= (c.amr_capacity - c_tilde.abs()).abs();
        }
        u_b[k] = ub;
    }

    let mut wh = s.warehouse_loads.clone();
    let mut u_w = vec![0.0; c.num_sites];
    for m in 0..c.num_sites {
        let out = f64::min(c.warehouse_outflow, wh[m]);
        let c_tilde = wh[m] - out + inflow[m];
        let c_next = c_tilde.clamp(0.0, c.warehouse_capacity);
        let mut uw = 0.0;
        if c_next == 0.0 {
            uw -= c_tilde.abs();
        }
        if c_next == c.warehouse_capacity {
            uw -= (c.warehouse_capacity - c_tilde.abs()).abs();
        }
        u_w[m] = uw;
        wh[m] = c_next;
    }

    let w = c.reward_weights;
    let mut reward = 0.0;
    for k in 0..n {
        let total = defects[k].tp + defects[k].fp;
        let u_q = if total > 0.0 { defects[k].tp / total } else { 1.0 };
        reward += u_q + w.delay * u_d[k] + w.balance * u_b[k];
    }
    reward += w.warehouse * u_w.iter().sum::<f64>();

    let state = FactoryState {
        t: s.t + 1,
        warehouse_loads: wh,
        amr_loads: amr,
        defects,
        pending_quality: pending,
        last_delay_utilities: u_d,
        input_precision: precision,
        phase,
    };
    OracleStep { state, reward }
}

fn random_state(c: &FactoryConfig, rng: &mut ChaCha8Rng) -> FactoryState {
    let n = c.num_agents;
    let amr: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=c.amr_capacity)).collect();
    let defects = amr
        .iter()
        .map(|&l| {
            let panels = (l / c.lcd_unit_weight).floor();
            let tp = rng.gen_range(0.0..=panels);
            DefectStats { tp, fp: panels - tp }
        })
        .collect();
    FactoryState {
        t: rng.gen_range(0..c.episode_length),
        warehouse_loads: (0..c.num_sites).map(|_| rng.gen_range(0.0..=c.warehouse_capacity)).collect(),
        amr_loads: amr,
        defects,
        pending_quality: (0..n).map(|_| rng.gen_range(0..=c.quality_delay)).collect(),
        last_delay_utilities: vec![-1.0; n],
        input_precision: (0..n).map(|_| c.precision_catalog[rng.gen_range(0..3)]).collect(),
        phase: rng.gen_range(0..4),
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

#[test]
fn criterion_4_environment_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scenarios = [
        Scenario::training(),
        Scenario::four_phase(),
        Scenario {
            phases: vec![
                Phase { start_minute: 0.0, precision: PrecisionSource::Uniform { uniform: (0.6, 0.99) } },
                Phase { start_minute: 20.0, precision: PrecisionSource::CATALOG },
            ],
        },
    ];
    let mut mismatches = 0;
    let mut bound_violations = 0;
    let mut max_err: f64 = 0.0;
    for i in 0..1000 {
        let c = FactoryConfig {
            num_agents: rng.gen_range(1..=8),
            arrival_cap: [60.0, 300.0, 900.0][i % 3],
            ..Default::default()
        };
        let scenario = scenarios[i % scenarios.len()].clone();
        let phases = scenario.phases.clone();
        let env = FactoryEnv::new(c.clone(), scenario).unwrap();
        let state = if i % 2 == 0 {
            random_state(&c, &mut rng)
        } else {
            env.reset_with(&mut rng).0
        };
        let actions: Vec<usize> = (0..c.num_agents).map(|_| rng.gen_range(0..c.num_actions())).collect();
        let seed = rng.gen::<u64>();

        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(seed);
        let got = env.step(&state, &actions.iter().copied().map(AgentAction).collect::<Vec<_>>(), &mut env_rng).unwrap();
        let want = oracle_step(&c, &phases, &state, &actions, &mut oracle_rng);

        let (g, w) = (&got.state, &want.state);
        let tp = |s: &FactoryState| s.defects.iter().flat_map(|d| [d.tp, d.fp]).collect::<Vec<_>>();
        let same = g.t == w.t
            && g.phase == w.phase
            && g.pending_quality == w.pending_quality
            && close(&g.amr_loads, &w.amr_loads)
            && close(&g.warehouse_loads, &w.warehouse_loads)
            && close(&tp(g), &tp(w))
            && close(&g.input_precision, &w.input_precision)
            && close(&g.last_delay_utilities, &w.last_delay_utilities)
            && (got.reward - want.reward).abs() <= 1e-9
            && env_rng.gen::<u64>() == oracle_rng.gen::<u64>();
        max_err = max_err.max((got.reward - want.reward).abs());
        if !same {
            mismatches += 1;
        }
        let in_bounds = g.amr_loads.iter().all(|&l| (0.0..=500.0).contains(&l))
            && g.warehouse_loads.iter().all(|&l| (0.0..=2000.0).contains(&l));
        if !in_bounds {
            bound_violations += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && bound_violations == 0 && within(elapsed, Duration::from_secs(10));
    verdict(
        4,
        ok,
        &format!(
            "1000 transitions, {mismatches} mismatches, max reward error {max_err:.2e}, {bound_violations} capacity violations, {elapsed:.2?}"
        ),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_encoding_benchmark() {
    let _guard = serial();
    let start = Instant::now();
    let cfg = EncodingBenchConfig::default();
    let runs = encoding_benchmark(&cfg).unwrap();
    let final_of = |scheme, seed| runs.iter().find(|r| r.scheme == scheme && r.seed == seed).unwrap().final_mse();
    let wins = |scheme| {
        cfg.seeds
            .iter()
            .filter(|&&seed| final_of(scheme, seed) < final_of(EncodingScheme::FourVariable, seed))
            .count()
    };
    let (one, two) = (wins(EncodingScheme::OneVariable), wins(EncodingScheme::TwoVariable));
    let elapsed = start.elapsed();
    let ok = one >= 4 && two >= 4 && runs.iter().all(|r| r.parameters == 50) && within(elapsed, Duration::from_secs(600));
    verdict(5, ok, &format!("1-variable beats 4-variable on {one}/5 seeds, 2-variable on {two}/5, {elapsed:.2?}"));
}

// ---------------------------------------------------------------- 6

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn criterion_6_desk_scale_training() {
    let _guard = serial();
    let start = Instant::now();
    let env_cfg = FactoryConfig { num_agents: 2, num_sites: 2, ..Default::default() };
    let env = FactoryEnv::with_config(env_cfg.clone()).unwrap();
    let seeds = [0u64, 1, 2];
    let eval = |scheme: Scheme| -> (Vec<f64>, Vec<f64>) {
        let mut rewards = Vec::new();
        let mut curve = vec![0.0; 300];
        for &seed in &seeds {
            let tc = TrainConfig { max_epochs: 300, eval_episodes: 20, seed, ..Default::default() };
            let models = build_baseline(BaselineSpec::new(scheme), &env_cfg, &tc).unwrap();
            let mut trainer = Trainer::new(env.clone(), models.actor, models.critic, tc).unwrap();
            for (c, s) in curve.iter_mut().zip(trainer.train().unwrap()) {
                *c += s.total_reward / seeds.len() as f64;
            }
            rewards.extend(trainer.evaluate().unwrap().iter().map(|e| e.summary.total_reward));
        }
        (rewards, curve)
    };
    let (proposed, curve) = eval(Scheme::Proposed);
    let (random, _) = eval(Scheme::Comp4);
    let (n1, n2) = (proposed.len() as f64, random.len() as f64);
    let pooled = (((n1 - 1.0) * sample_var(&proposed) + (n2 - 1.0) * sample_var(&random)) / (n1 + n2 - 2.0)).sqrt();
    let effect = (mean(&proposed) - mean(&random)) / pooled;
    let (first, last) = (mean(&curve[..50]), mean(&curve[250..]));
    let elapsed = start.elapsed();
    let ok = effect >= 0.5 && last > first && within(elapsed, Duration::from_secs(1800));
    verdict(
        6,
        ok,
        &format!(
            "proposed {:.2} vs random walk {:.2} ({effect:.2} pooled sd), first-50 {first:.2} -> last-50 {last:.2}, {elapsed:.2?}",
            mean(&proposed),
            mean(&random)
        ),
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_policy_and_critic_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    let mut negative = 0;
    for i in 0..10_000 {
        if i % 100 == 0 {
            let actor = QuantumActor::new(5, ParamVector(uniform_vec(54, -PI, PI, &mut rng)), 3.0).unwrap();
            let critic = QuantumCritic::new(ParamVector(uniform_vec(54, -PI, PI, &mut rng)), 35.0).unwrap();
            for _ in 0..100 {
                let d = actor.distribution(&Observation(uniform_vec(6, 0.0, 1.0, &mut rng))).unwrap();
                negative += d.probabilities.iter().filter(|&&p| p < 0.0).count();
                worst_sum = worst_sum.max((d.probabilities.iter().sum::<f64>() - 1.0).abs());
                worst_value = worst_value.max(critic.value(&uniform_vec(14, 0.0, 1.0, &mut rng)).unwrap().abs());
            }
        }
        let logits = uniform_vec(5, -10.0, 10.0, &mut rng);
        let shift = rng.gen_range(-100.0..100.0);
        let moved: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        for (a, b) in softmax(&logits).iter().zip(softmax(&moved)) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    let ok = negative == 0 && worst_sum < 1e-9 && worst_value <= 35.0 && worst_shift < 1e-12;
    verdict(
        7,
        ok,
        &format!("max |sum-1| {worst_sum:.2e}, max |V| {worst_value:.3}, max shift deviation {worst_shift:.2e}"),
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_robustness_scenario() {
    let _guard = serial();
    let start = Instant::now();
    let env_cfg = FactoryConfig::default();
    let env = FactoryEnv::new(env_cfg.clone(), Scenario::four_phase()).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for seed in [0u64, 1] {
        let tc = TrainConfig { seed, ..Default::default() };
        let models = build_baseline(BaselineSpec::new(Scheme::Proposed), &env_cfg, &tc).unwrap();
        let a = robustness_series(&env, models.actor.as_ref(), 100, seed).unwrap();
        let b = robustness_series(&env, models.actor.as_ref(), 100, seed).unwrap();
        let min = a.iter().min_by(|x, y| x.mean_precision_pct.total_cmp(&y.mean_precision_pct)).unwrap();
        let in_phase_two = (30.0..40.0).contains(&min.minute) && min.phase == 1;
        ok &= a == b && a.len() == 30 && in_phase_two;
        details.push(format!(
            "seed {seed}: deterministic {}, minimum {:.2}% at minute {}",
            a == b,
            min.mean_precision_pct,
            min.minute
        ));
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, Duration::from_secs(300));
    verdict(8, ok, &format!("{}, {elapsed:.2?}", details.join("; ")));
}

// ---------------------------------------------------------------- 9

const SMALL_CONFIG: &str = r#"
scheme = "proposed"
seeds = [5]

[env]
num_agents = 2
episode_length = 30

[train]
max_epochs = 3
eval_episodes = 3

[encoding]
iterations = 4
seeds = [0, 1]

[robustness]
iterations = 2
"#;

fn qmarl(config: &Path, out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qmarl"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn qmarl")
}

fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_9_end_to_end_determinism() {
    let _guard = serial();
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("small.toml");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let invocations: [&[&str]; 7] = [
        &["train"],
        &["train", "--scheme", "comp2", "--seed", "9"],
        &["train", "--scheme", "comp4"],
        &["eval"],
        &["encode-bench"],
        &["robustness"],
        &["report"],
    ];
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = work.path().join(name);
            let mut failures = Vec::new();
            for args in invocations {
                let result = qmarl(&config, &out, args);
                if !result.status.success() {
                    failures.push(format!("{args:?}: {}", String::from_utf8_lossy(&result.stderr).trim()));
                }
            }
            (failures, snapshot_dir(&out))
        })
        .collect();
    let (failures, a) = &runs[0];
    let (_, b) = &runs[1];
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a.iter().zip(b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();

    let bad_scheme = qmarl(&config, &work.path().join("c"), &["train", "--scheme", "nonsense"]);
    let missing = qmarl(&work.path().join("missing.toml"), &work.path().join("c"), &["eval"]);
    let errors_exit_nonzero = !bad_scheme.status.success() && !missing.status.success();

    let ok = failures.is_empty()
        && a.len() == b.len()
        && differing.is_empty()
        && names.len() >= 9
        && errors_exit_nonzero;
    verdict(
        9,
        ok,
        &format!(
            "{} files compared, {} differ, failures {failures:?}, error exit codes nonzero {errors_exit_nonzero} ({})",
            a.len(),
            differing.len(),
            names.join(" ")
        ),
    );
}
