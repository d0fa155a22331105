//! Dense statevector simulation for small registers.
//!
//! Wire `w` is bit `w` of the basis index (wire 0 is the least-significant
//! bit). Rotations follow `R_P(δ) = exp(-i δ P / 2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest register this simulator will allocate.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("wire {wire} out of range for a {num_qubits}-qubit register")]
    WireOutOfRange { wire: usize, num_qubits: usize },
    #[error("{0:?} gate requires an angle")]
    MissingAngle(GateKind),
    #[error("{0:?} gate requires a control wire")]
    MissingControl(GateKind),
    #[error("control and target are both wire {0}")]
    ControlIsTarget(usize),
    #[error("angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("gate {index}: {source}")]
    InCircuit {
        index: usize,
        #[source]
        source: Box<QsimError>,
    },
}

pub type Result<T> = std::result::Result<T, QsimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    CZ,
    CNOT,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn is_controlled(self) -> bool {
        matches!(self, GateKind::CZ | GateKind::CNOT)
    }
}

/// One gate application. `control` is required for CZ/CNOT and `angle` for
/// the rotation kinds; [`StateVector::apply_gate`] rejects anything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl GateSpec {
    fn fixed(kind: GateKind, target: usize) -> Self {
        Self { kind, target, control: None, angle: None }
    }

    fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        Self { kind, target, control: None, angle: Some(angle) }
    }

    pub fn x(target: usize) -> Self {
        Self::fixed(GateKind::X, target)
    }
    pub fn y(target: usize) -> Self {
        Self::fixed(GateKind::Y, target)
    }
    pub fn z(target: usize) -> Self {
        Self::fixed(GateKind::Z, target)
    }
    pub fn rx(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RX, target, angle)
    }
    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RY, target, angle)
    }
    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RZ, target, angle)
    }
    pub fn cz(control: usize, target: usize) -> Self {
        Self { kind: GateKind::CZ, target, control: Some(control), angle: None }
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::CNOT, target, control: Some(control), angle: None }
    }

    /// The gate that undoes this one.
    pub fn inverse(&self) -> Self {
        let mut inv = *self;
        if let Some(a) = inv.angle {
            inv.angle = Some(-a);
        }
        inv
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let check = |wire: usize| {
            if wire < num_qubits {
                Ok(())
            } else {
                Err(QsimError::WireOutOfRange { wire, num_qubits })
            }
        };
        check(self.target)?;
        if self.kind.is_rotation() {
            match self.angle {
                None => return Err(QsimError::MissingAngle(self.kind)),
                Some(a) if !a.is_finite() => return Err(QsimError::NonFiniteAngle(a)),
                _ => {}
            }
        }
        if self.kind.is_controlled() {
            let control = self.control.ok_or(QsimError::MissingControl(self.kind))?;
            check(control)?;
            if control == self.target {
                return Err(QsimError::ControlIsTarget(control));
            }
        }
        Ok(())
    }
}

type Matrix2 = [[Complex64; 2]; 2];

fn single_qubit_matrix(kind: GateKind, angle: f64) -> Matrix2 {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let (s, c) = (angle / 2.0).sin_cos();
    match kind {
        GateKind::X => [[zero, one], [one, zero]],
        GateKind::Y => [[zero, -i], [i, zero]],
        GateKind::Z => [[one, zero], [zero, -one]],
        GateKind::RX => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        GateKind::RY => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        GateKind::RZ => [
            [Complex64::new(c, -s), zero],
            [zero, Complex64::new(c, s)],
        ],
        GateKind::CZ | GateKind::CNOT => unreachable!("controlled gates have no 2x2 form"),
    }
}

/// A normalized register of `2^num_qubits` amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` wires.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(QsimError::QubitCount(num_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amplitudes })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for
    /// normalization; the length must be a power of two within range.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(QsimError::QubitCount(0));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(QsimError::QubitCount(num_qubits));
        }
        Ok(Self { num_qubits, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Value-semantics gate application.
    pub fn apply_gate(&self, gate: &GateSpec) -> Result<Self> {
        let mut out = self.clone();
        out.apply_gate_mut(gate)?;
        Ok(out)
    }

    pub fn apply_circuit(&self, gates: &[GateSpec]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_circuit_mut(gates)?;
        Ok(out)
    }

    pub fn apply_circuit_mut(&mut self, gates: &[GateSpec]) -> Result<()> {
        for (index, gate) in gates.iter().enumerate() {
            self.apply_gate_mut(gate).map_err(|e| QsimError::InCircuit {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    pub fn apply_gate_mut(&mut self, gate: &GateSpec) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match gate.kind {
            GateKind::CZ => {
                let mask = (1 << gate.target) | (1 << gate.control.unwrap_or_default());
                for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
                    if idx & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            GateKind::CNOT => {
                let cbit = 1 << gate.control.unwrap_or_default();
                let tbit = 1 << gate.target;
                for idx in 0..self.amplitudes.len() {
                    if idx & cbit != 0 && idx & tbit == 0 {
                        self.amplitudes.swap(idx, idx | tbit);
                    }
                }
            }
            kind => {
                let m = single_qubit_matrix(kind, gate.angle.unwrap_or(0.0));
                self.apply_matrix(gate.target, &m);
            }
        }
        Ok(())
    }

    fn apply_matrix(&mut self, target: usize, m: &Matrix2) {
        let stride = 1usize << target;
        let diagonal = m[0][1] == Complex64::new(0.0, 0.0) && m[1][0] == Complex64::new(0.0, 0.0);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            if diagonal {
                lo.iter_mut().for_each(|a| *a *= m[0][0]);
                hi.iter_mut().for_each(|a| *a *= m[1][1]);
            } else {
                for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x0, x1) = (*a0, *a1);
                    *a0 = m[0][0] * x0 + m[0][1] * x1;
                    *a1 = m[1][0] * x0 + m[1][1] * x1;
                }
            }
        }
    }

    /// `⟨ψ|Z_wire|ψ⟩`.
    pub fn expectation_z(&self, wire: usize) -> Result<f64> {
        if wire >= self.num_qubits {
            return Err(QsimError::WireOutOfRange { wire, num_qubits: self.num_qubits });
        }
        let bit = 1 << wire;
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| if idx & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }
}
