//! Variational circuits: state encoders, the fixed parameterized template,
//! Pauli-Z observables and parameter-shift differentiation.

mod layout;

pub use layout::{cz_ring, Axis, Block, CircuitLayout, LayoutGate, Role, RotationSlot};

use std::f64::consts::FRAC_PI_2;
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{GateSpec, QsimError, StateVector};


#[derive(Debug, Error, Clone, PartialEq)]
pub enum VqcError {
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("expected {expected} parameters, got {got}")]
    ParamMismatch { expected: usize, got: usize },
    #[error("layout has {layout} qubits but the encoded register has {register}")]
    RegisterMismatch { layout: usize, register: usize },
    #[error("cannot encode {got} values into {capacity} slots")]
    Encoding { got: usize, capacity: usize },
    #[error("expected {expected} cotangent entries, got {got}")]
    CotangentMismatch { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Sim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, VqcError>;

/// Trainable rotation angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-measured-wire `⟨Z⟩`, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableVector(pub Vec<f64>);

impl Deref for ObservableVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn encode_with(
    num_qubits: usize,
    gates: impl IntoIterator<Item = GateSpec>,
    got: usize,
    capacity: usize,
) -> Result<StateVector> {
    if got > capacity {
        return Err(VqcError::Encoding { got, capacity });
    }
    let mut state = StateVector::zero(num_qubits)?;
    for gate in gates {
        state.apply_gate_mut(&gate)?;
    }
    Ok(state)
}

/// Angle encoding: `RY(obs[k])` on wire `k`; remaining wires stay `|0⟩`.
pub fn encode_actor_observation(obs: &[f64], num_qubits: usize) -> Result<StateVector> {
    encode_with(
        num_qubits,
        obs.iter().enumerate().map(|(k, &x)| GateSpec::ry(k, x)),
        obs.len(),
        num_qubits,
    )
}

/// Two-variable dense encoding: wire `k` gets `RX(v[2k])` then `RY(v[2k+1])`.
/// An odd trailing value is applied alone with `RX`.
pub fn encode_critic_state(state_vars: &[f64], num_qubits: usize) -> Result<StateVector> {
    let gates = state_vars.chunks(2).enumerate().flat_map(|(k, pair)| {
        let mut g = vec![GateSpec::rx(k, pair[0])];
        if let Some(&y) = pair.get(1) {
            g.push(GateSpec::ry(k, y));
        }
        g
    });
    encode_with(num_qubits, gates, state_vars.len(), 2 * num_qubits)
}

fn run(layout: &CircuitLayout, params: &[f64], encoded: &StateVector) -> Result<Vec<f64>> {
    let mut state = encoded.clone();
    state.apply_circuit_mut(&layout.gates(params)?)?;
    layout
        .measured_wires()
        .iter()
        .map(|&w| state.expectation_z(w).map_err(VqcError::from))
        .collect()
}

fn check_register(layout: &CircuitLayout, encoded: &StateVector) -> Result<()> {
    if layout.num_qubits() != encoded.num_qubits() {
        return Err(VqcError::RegisterMismatch {
            layout: layout.num_qubits(),
            register: encoded.num_qubits(),
        });
    }
    Ok(())
}

/// Runs the parameterized circuit on an encoded register and reads `⟨Z⟩` on
/// each measured wire in layout order.
pub fn evaluate_observables(
    layout: &CircuitLayout,
    params: &[f64],
    encoded: &StateVector,
) -> Result<ObservableVector> {
    check_register(layout, encoded)?;
    run(layout, params, encoded).map(ObservableVector)
}

/// Vector-Jacobian product of the observables by the parameter-shift rule:
///
/// `grad[i] = Σ_j upstream[j] · ½ (O_j(θ + π/2 e_i) − O_j(θ − π/2 e_i))`
///
/// Exactly `2 · params.len()` shifted evaluations, run in parallel; each
/// resumes from the cached state entering its gate.
pub fn parameter_shift_gradient(
    layout: &CircuitLayout,
    params: &[f64],
    encoded: &StateVector,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    check_register(layout, encoded)?;
    layout.check_params(params)?;
    let measured = layout.measured_wires().len();
    if upstream.len() != measured {
        return Err(VqcError::CotangentMismatch { expected: measured, got: upstream.len() });
    }
    if let Some(&bad) = upstream.iter().find(|u| !u.is_finite()) {
        return Err(VqcError::NonFinite(format!("upstream {bad}")));
    }
    if upstream.iter().all(|&u| u == 0.0) {
        return Ok(vec![0.0; params.len()]);
    }
    let template = layout.template();
    let gates = layout.gates(params)?;
    // State entering each parameterized gate, so a shifted evaluation only
    // replays the suffix of the circuit.
    let mut prefixes: Vec<Option<(usize, StateVector)>> = vec![None; params.len()];
    let mut state = encoded.clone();
    for (pos, (slot, gate)) in template.iter().zip(&gates).enumerate() {
        if let LayoutGate::Rotation { slot: i, .. } = slot {
            prefixes[*i] = Some((pos, state.clone()));
        }
        state.apply_gate_mut(gate)?;
    }
    let measure = |state: &StateVector| -> Result<Vec<f64>> {
        layout
            .measured_wires()
            .iter()
            .map(|&w| state.expectation_z(w).map_err(VqcError::from))
            .collect()
    };
    prefixes
        .into_par_iter()
        .enumerate()
        .map(|(i, prefix)| {
            let (pos, entry) = prefix.expect("every parameter drives one rotation");
            let shifted_run = |delta: f64| -> Result<Vec<f64>> {
                let mut s = entry.clone();
                let mut g = gates[pos];
                g.angle = Some(params[i] + delta);
                s.apply_gate_mut(&g)?;
                s.apply_circuit_mut(&gates[pos + 1..])?;
                measure(&s)
            };
            let plus = shifted_run(FRAC_PI_2)?;
            let minus = shifted_run(-FRAC_PI_2)?;
            Ok(upstream
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(u, (p, m))| u * 0.5 * (p - m))
                .sum())
        })
        .collect()
}
