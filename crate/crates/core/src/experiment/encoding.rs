//! Regression of 4-bit patterns onto `y = Σ_i x_i 2^{1−i}` with equal-budget
//! circuits that differ only in how the bits are loaded.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::qmac::{init_angles, stream_rng, Adam, INIT_STREAM};
use crate::qsim::{GateSpec, StateVector};
use crate::vqc::{evaluate_observables, parameter_shift_gradient, CircuitLayout, VqcError};

use super::{ExperimentError, Result};

/// Maximum target value, `1 + 1/2 + 1/4 + 1/8`.
const Y_MAX: f64 = 1.875;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    /// One bit per qubit, `RY` on 4 wires.
    OneVariable,
    /// Two bits per qubit, `RX` then `RY` on 2 wires.
    TwoVariable,
    /// All four bits on one qubit: `RY(x4) RY(x3) RZ(x2) RZ(x1)`.
    FourVariable,
}

impl EncodingScheme {
    pub const ALL: [EncodingScheme; 3] =
        [EncodingScheme::OneVariable, EncodingScheme::TwoVariable, EncodingScheme::FourVariable];

    pub fn num_qubits(self) -> usize {
        match self {
            EncodingScheme::OneVariable => 4,
            EncodingScheme::TwoVariable => 2,
            EncodingScheme::FourVariable => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EncodingScheme::OneVariable => "1-variable",
            EncodingScheme::TwoVariable => "2-variable",
            EncodingScheme::FourVariable => "4-variable",
        }
    }

    /// Loads `bits = [x1, x2, x3, x4]`, each bit scaled to `bit · angle`.
    pub fn encode(self, bits: [u8; 4], angle: f64) -> Result<StateVector> {
        let a = bits.map(|b| f64::from(b) * angle);
        let gates = match self {
            EncodingScheme::OneVariable => (0..4).map(|k| GateSpec::ry(k, a[k])).collect::<Vec<_>>(),
            EncodingScheme::TwoVariable => vec![
                GateSpec::rx(0, a[0]),
                GateSpec::ry(0, a[1]),
                GateSpec::rx(1, a[2]),
                GateSpec::ry(1, a[3]),
            ],
            EncodingScheme::FourVariable => vec![
                GateSpec::ry(0, a[3]),
                GateSpec::ry(0, a[2]),
                GateSpec::rz(0, a[1]),
                GateSpec::rz(0, a[0]),
            ],
        };
        let state = StateVector::zero(self.num_qubits()).map_err(VqcError::from)?;
        Ok(state.apply_circuit(&gates).map_err(VqcError::from)?)
    }
}

impl fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Σ_i x_i 2^{1−i}` with `x1` the most significant bit.
pub fn regression_target(bits: [u8; 4]) -> f64 {
    bits.iter().enumerate().map(|(i, &b)| f64::from(b) * 2f64.powi(-(i as i32))).sum()
}

/// All 16 patterns, `x1` first.
pub fn all_patterns() -> Vec<[u8; 4]> {
    (0u8..16).map(|v| [(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1]).collect()
}

/// Model output `(1 − ⟨Z_0⟩) · Y_MAX / 2`, covering `[0, Y_MAX]`.
fn readout(z: f64) -> f64 {
    (1.0 - z) * Y_MAX / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingBenchConfig {
    pub budget: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Rotation applied for a set bit, radians.
    pub bit_angle: f64,
    pub init_scale: f64,
    pub seeds: Vec<u64>,
}

impl Default for EncodingBenchConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            iterations: 500,
            learning_rate: 0.05,
            bit_angle: PI / 3.0,
            init_scale: PI / 50.0,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl EncodingBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(ExperimentError::Config("encoding budget must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("encoding benchmark needs at least one seed".into()));
        }
        if !(self.learning_rate > 0.0 && self.bit_angle.is_finite() && self.init_scale.is_finite()) {
            return Err(ExperimentError::Config("encoding learning_rate, bit_angle and init_scale must be finite, rate positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRun {
    pub scheme: EncodingScheme,
    pub seed: u64,
    pub parameters: usize,
    /// MSE before each update, then after the last one.
    pub mse_curve: Vec<f64>,
}

impl EncodingRun {
    pub fn final_mse(&self) -> f64 {
        *self.mse_curve.last().expect("curve holds the initial loss")
    }
}

fn mse_and_gradient(layout: &CircuitLayout, params: &[f64], data: &[(StateVector, f64)]) -> Result<(f64, Vec<f64>)> {
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (state, y) in data {
        let z = evaluate_observables(layout, params, state)?[0];
        let err = readout(z) - y;
        loss += err * err / n;
        // d(err²/n)/dz = 2 err · (−Y_MAX/2) / n
        let upstream = -err * Y_MAX / n;
        let g = parameter_shift_gradient(layout, params, state, &[upstream])?;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

fn mse(layout: &CircuitLayout, params: &[f64], data: &[(StateVector, f64)]) -> Result<f64> {
    let n = data.len() as f64;
    data.iter().try_fold(0.0, |acc, (state, y)| {
        let z = evaluate_observables(layout, params, state)?[0];
        Ok(acc + (readout(z) - y).powi(2) / n)
    })
}

/// Full-batch training of one scheme from one seed.
pub fn train_encoding(scheme: EncodingScheme, seed: u64, cfg: &EncodingBenchConfig) -> Result<EncodingRun> {
    let layout = CircuitLayout::with_budget(scheme.num_qubits(), cfg.budget, vec![0])?;
    let data = all_patterns()
        .into_iter()
        .map(|bits| Ok((scheme.encode(bits, cfg.bit_angle)?, regression_target(bits))))
        .collect::<Result<Vec<_>>>()?;
    let mut params = init_angles(layout.parameter_count(), cfg.init_scale, &mut stream_rng(seed, INIT_STREAM)).0;
    let mut opt = Adam::new(params.len(), cfg.learning_rate, 0.0);
    let mut curve = Vec::with_capacity(cfg.iterations + 1);
    for _ in 0..cfg.iterations {
        let (loss, grad) = mse_and_gradient(&layout, &params, &data)?;
        curve.push(loss);
        opt.step(&mut params, &grad)?;
    }
    curve.push(mse(&layout, &params, &data)?);
    Ok(EncodingRun { scheme, seed, parameters: layout.parameter_count(), mse_curve: curve })
}

/// Every scheme on every seed, scheme-major.
pub fn encoding_benchmark(cfg: &EncodingBenchConfig) -> Result<Vec<EncodingRun>> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for scheme in EncodingScheme::ALL {
        for &seed in &cfg.seeds {
            runs.push(train_encoding(scheme, seed, cfg)?);
        }
    }
    Ok(runs)
}
