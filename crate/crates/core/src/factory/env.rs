use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    balance_utility, clip, delay_utility, reward, ActionKind, AgentAction, DefectStats, EnvError,
    FactoryConfig, FactoryState, Observation, Result, Scenario, StepUtilities,
};

/// Per-step quantities logged for metrics. Masses in kg.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Mean precision over agents after the step, in `[0, 1]`.
    pub precision: f64,
    /// `Σ_n −u^d` converted to minutes.
    pub processing_time: f64,
    pub mean_amr_load: f64,
    pub mean_warehouse_load: f64,
    pub overflow_amr: f64,
    pub overflow_warehouse: f64,
    pub underflow_amr: f64,
    pub underflow_warehouse: f64,
    /// Mass actually moved by each agent this step.
    pub delivered: Vec<f64>,
    /// Mass received by each warehouse from agents this step.
    pub warehouse_inflow: Vec<f64>,
    /// Defective mass removed by completed quality inspections.
    pub defects_removed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FactoryState,
    pub observations: Vec<Observation>,
    pub reward: f64,
    pub utilities: StepUtilities,
    pub metrics: StepMetrics,
    pub done: bool,
}

/// Environment definition. Holds no episode state; every transition maps a
/// [`FactoryState`] value and an rng stream to the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoryEnv {
    config: FactoryConfig,
    scenario: Scenario,
}

impl FactoryEnv {
    pub fn new(config: FactoryConfig, scenario: Scenario) -> Result<Self> {
        config.validate()?;
        scenario.validate(Some(config.horizon_minutes()))?;
        Ok(Self { config, scenario })
    }

    pub fn with_config(config: FactoryConfig) -> Result<Self> {
        Self::new(config, Scenario::training())
    }

    pub fn config(&self) -> &FactoryConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Seeded initial state.
    pub fn reset(&self, seed: u64) -> (FactoryState, Vec<Observation>) {
        self.reset_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Empty loads at `t = 0`; per-agent input precision drawn from the first
    /// scenario phase.
    pub fn reset_with<R: Rng + ?Sized>(&self, rng: &mut R) -> (FactoryState, Vec<Observation>) {
        let c = &self.config;
        let source = self.scenario.phases[0].precision;
        let input_precision =
            (0..c.num_agents).map(|_| source.sample(&c.precision_catalog, rng)).collect();
        let state = FactoryState {
            t: 0,
            warehouse_loads: vec![0.0; c.num_sites],
            amr_loads: vec![0.0; c.num_agents],
            defects: vec![DefectStats::default(); c.num_agents],
            pending_quality: vec![0; c.num_agents],
            last_delay_utilities: vec![-1.0; c.num_agents],
            input_precision,
            phase: 0,
        };
        let obs = state.observations(c);
        (state, obs)
    }

    /// Draws the panel composition of one arrival. Returns the credited mass
    /// (whole panels only) and its TP/FP split.
    fn draw_arrival<R: Rng + ?Sized>(&self, precision: f64, rng: &mut R) -> (f64, DefectStats) {
        let c = &self.config;
        let raw = rng.gen::<f64>() * c.arrival_cap;
        let panels = (raw / c.lcd_unit_weight).floor();
        let expected_tp = panels * precision;
        let whole = expected_tp.floor();
        let extra = if rng.gen::<f64>() < expected_tp - whole { 1.0 } else { 0.0 };
        let tp = (whole + extra).min(panels);
        (panels * c.lcd_unit_weight, DefectStats { tp, fp: panels - tp })
    }

    /// One synchronous transition.
    ///
    /// Order within a step:
    /// 1. the scenario phase for the step's start minute is applied; entering
    ///    a new phase redraws every agent's input precision;
    /// 2. parked agents count down; an inspection that finishes removes all
    ///    false-positive panels from the load;
    /// 3. quality requests park the agent for `quality_delay` steps and charge
    ///    the delay utility immediately;
    /// 4. every agent receives a uniform arrival in whole panels;
    /// 5. delivering agents command their quantity; the load update clips the
    ///    residual and the mass actually moved (`min(commanded, load + arrival)`)
    ///    reaches the chosen warehouse;
    /// 6. warehouses drain `min(outflow, load)` and absorb deliveries;
    /// 7. utilities and the shared reward are evaluated on the new state.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &FactoryState,
        actions: &[AgentAction],
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let c = &self.config;
        if actions.len() != c.num_agents {
            return Err(EnvError::ActionCount { expected: c.num_agents, got: actions.len() });
        }
        if state.is_terminal(c) {
            return Err(EnvError::Terminal(state.t));
        }
        let kinds = actions.iter().map(|a| a.decode(c)).collect::<Result<Vec<_>>>()?;

        let mut next = state.clone();
        let phase = self.scenario.phase_at(state.t as f64 * c.minutes_per_step);
        if phase != state.phase {
            let source = self.scenario.phases[phase].precision;
            for p in next.input_precision.iter_mut() {
                *p = source.sample(&c.precision_catalog, rng);
            }
            next.phase = phase;
        }

        let n_agents = c.num_agents;
        let mut u = StepUtilities {
            quality: vec![0.0; n_agents],
            delay: vec![0.0; n_agents],
            balance: vec![0.0; n_agents],
            warehouse: vec![0.0; c.num_sites],
        };
        let mut m = StepMetrics {
            delivered: vec![0.0; n_agents],
            warehouse_inflow: vec![0.0; c.num_sites],
            ..StepMetrics::default()
        };

        for n in 0..n_agents {
            let mut commanded = 0.0;
            let mut destination = None;
            let mut finish_inspection = false;
            if next.pending_quality[n] > 0 {
                next.pending_quality[n] -= 1;
                finish_inspection = next.pending_quality[n] == 0;
                u.delay[n] = delay_utility(false, c.quality_delay);
            } else {
                match kinds[n] {
                    ActionKind::QualityRequest => {
                        next.pending_quality[n] = c.quality_delay;
                        finish_inspection = c.quality_delay == 0;
                        u.delay[n] = delay_utility(true, c.quality_delay);
                    }
                    ActionKind::Deliver { site, quantity } => {
                        commanded = quantity;
                        destination = Some(site);
                        u.delay[n] = delay_utility(false, c.quality_delay);
                    }
                }
            }
            if finish_inspection {
                let removed = next.defects[n].fp * c.lcd_unit_weight;
                m.defects_removed += removed;
                next.amr_loads[n] = (next.amr_loads[n] - removed).max(0.0);
                next.defects[n].fp = 0.0;
            }

            let (arrival, fresh) = self.draw_arrival(next.input_precision[n], rng);
            let load = next.amr_loads[n];
            let residual = load - commanded + arrival;
            let updated = clip(residual, 0.0, c.amr_capacity);
            let moved = (load + arrival - residual.max(0.0)).max(0.0);
            if let Some(site) = destination {
                m.delivered[n] = moved;
                m.warehouse_inflow[site] += moved;
            }

            let pool = DefectStats { tp: next.defects[n].tp + fresh.tp, fp: next.defects[n].fp + fresh.fp };
            let available = load + arrival;
            let keep = if available > 0.0 { updated / available } else { 0.0 };
            next.defects[n] = DefectStats { tp: pool.tp * keep, fp: pool.fp * keep };
            next.amr_loads[n] = updated;

            u.balance[n] = balance_utility(
                residual.abs(),
                c.amr_capacity,
                updated == 0.0,
                updated == c.amr_capacity,
            );
            m.underflow_amr += (-residual).max(0.0);
            m.overflow_amr += (residual - c.amr_capacity).max(0.0);
        }

        for s in 0..c.num_sites {
            let load = next.warehouse_loads[s];
            let drained = c.warehouse_outflow.min(load);
            let residual = load - drained + m.warehouse_inflow[s];
            let updated = clip(residual, 0.0, c.warehouse_capacity);
            next.warehouse_loads[s] = updated;
            u.warehouse[s] = balance_utility(
                residual.abs(),
                c.warehouse_capacity,
                updated == 0.0,
                updated == c.warehouse_capacity,
            );
            m.underflow_warehouse += (-residual).max(0.0);
            m.overflow_warehouse += (residual - c.warehouse_capacity).max(0.0);
        }

        for n in 0..n_agents {
            u.quality[n] = next.defects[n].precision();
        }
        next.last_delay_utilities = u.delay.clone();
        next.t += 1;

        let nf = n_agents as f64;
        m.precision = u.quality.iter().sum::<f64>() / nf;
        m.processing_time = -u.delay.iter().sum::<f64>() * c.minutes_per_step;
        m.mean_amr_load = next.amr_loads.iter().sum::<f64>() / nf;
        m.mean_warehouse_load = next.warehouse_loads.iter().sum::<f64>() / c.num_sites as f64;

        let r = reward(&u, &c.reward_weights);
        let observations = next.observations(c);
        let done = next.is_terminal(c);
        Ok(StepOutcome { state: next, observations, reward: r, utilities: u, metrics: m, done })
    }
}
