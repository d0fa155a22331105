//! Quantum multi-agent actor-critic for multi-robot coordination in a
//! simulated LCD factory.
//!
//! - [`qsim`]: statevector simulator.
//! - [`vqc`]: encoders, the fixed variational layout, parameter-shift gradients.
//! - [`factory`]: the partially observable factory environment.
//! - [`qmac`]: shared quantum policy, centralized quantum critic, training loop.
//! - [`baselines`]: classical, hybrid and random comparison schemes.
//! - [`experiment`]: configuration, runs, benchmarks and reports.

pub mod baselines;
pub mod experiment;
pub mod factory;
pub mod metrics;
pub mod qmac;
pub mod qsim;
pub mod vqc;

pub use baselines::{build_baseline, BaselineSpec, DenseNet, Models, Scheme};
pub use experiment::{ExperimentConfig, ExperimentError};
pub use factory::{AgentAction, FactoryConfig, FactoryEnv, FactoryState, Observation, Scenario};
pub use metrics::{EpisodeSummary, MetricsRecord, RecordKind};
pub use qmac::{Actor, Critic, PolicyOutput, QuantumActor, QuantumCritic, TrainConfig, Trainer};
pub use qsim::{GateSpec, StateVector};
pub use vqc::{CircuitLayout, ParamVector};
