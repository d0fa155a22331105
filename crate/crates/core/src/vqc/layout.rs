use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Result, VqcError};
use crate::qsim::{GateSpec, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn gate(self, wire: usize, angle: f64) -> GateSpec {
        match self {
            Axis::X => GateSpec::rx(wire, angle),
            Axis::Y => GateSpec::ry(wire, angle),
            Axis::Z => GateSpec::rz(wire, angle),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::X => "RX",
            Axis::Y => "RY",
            Axis::Z => "RZ",
        }
    }
}

/// A trainable rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationSlot {
    pub wire: usize,
    pub axis: Axis,
}

/// Rotation layer followed by a CZ ring over all wires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub rotations: Vec<RotationSlot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Actor,
    Critic,
}

/// Gate layout for one element of [`CircuitLayout::gates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayoutGate {
    Rotation { slot: usize, wire: usize, axis: Axis },
    Cz { control: usize, target: usize },
}

/// Static gate template of a parameterized circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitLayout {
    num_qubits: usize,
    blocks: Vec<Block>,
    trailing: Vec<RotationSlot>,
    measured_wires: Vec<usize>,
}

/// Neighbouring CZ pairs `(w, w+1 mod q)`. Two wires get a single pair since
/// the wrap-around pair would cancel it.
pub fn cz_ring(num_qubits: usize) -> Vec<(usize, usize)> {
    match num_qubits {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        q => (0..q).map(|w| (w, (w + 1) % q)).collect(),
    }
}

impl CircuitLayout {
    pub fn new(
        num_qubits: usize,
        blocks: Vec<Block>,
        trailing: Vec<RotationSlot>,
        measured_wires: Vec<usize>,
    ) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(VqcError::Layout(format!("{num_qubits} qubits out of range")));
        }
        let all_slots = blocks.iter().flat_map(|b| b.rotations.iter()).chain(trailing.iter());
        for slot in all_slots {
            if slot.wire >= num_qubits {
                return Err(VqcError::Layout(format!(
                    "rotation on wire {} of a {num_qubits}-qubit layout",
                    slot.wire
                )));
            }
        }
        if measured_wires.is_empty() {
            return Err(VqcError::Layout("no measured wires".into()));
        }
        for (i, &w) in measured_wires.iter().enumerate() {
            if w >= num_qubits {
                return Err(VqcError::Layout(format!("measured wire {w} out of range")));
            }
            if measured_wires[..i].contains(&w) {
                return Err(VqcError::Layout(format!("measured wire {w} listed twice")));
            }
        }
        Ok(Self { num_qubits, blocks, trailing, measured_wires })
    }

    /// Full blocks of RX, RY, RZ layers while the budget allows, then a
    /// partial trailing layer (RY first, then RZ, then RX) for the remainder.
    pub fn with_budget(num_qubits: usize, budget: usize, measured_wires: Vec<usize>) -> Result<Self> {
        if budget == 0 {
            return Err(VqcError::Layout("parameter budget must be positive".into()));
        }
        let per_block = 3 * num_qubits;
        let full_layer = |axis| (0..num_qubits).map(move |wire| RotationSlot { wire, axis });
        let blocks = (0..budget / per_block.max(1))
            .map(|_| Block {
                rotations: full_layer(Axis::X)
                    .chain(full_layer(Axis::Y))
                    .chain(full_layer(Axis::Z))
                    .collect(),
            })
            .collect();
        let order = [Axis::Y, Axis::Z, Axis::X];
        let trailing = (0..budget % per_block.max(1))
            .map(|i| RotationSlot { wire: i % num_qubits, axis: order[i / num_qubits] })
            .collect();
        Self::new(num_qubits, blocks, trailing, measured_wires)
    }

    /// The 8-qubit, 54-rotation template shared by actor and critic: two
    /// blocks of full RX/RY/RZ layers with CZ rings, then RY on wires 0..6.
    /// The actor reads wires 0..5 (one per action), the critic wire 0.
    pub fn default_for(role: Role) -> Self {
        let measured = match role {
            Role::Actor => (0..5).collect(),
            Role::Critic => vec![0],
        };
        Self::with_budget(8, 54, measured).expect("static layout is valid")
    }

    /// One trainable rotation on wire 0 and no entangler.
    pub fn single_rotation(axis: Axis) -> Self {
        Self::new(1, Vec::new(), vec![RotationSlot { wire: 0, axis }], vec![0])
            .expect("static layout is valid")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn measured_wires(&self) -> &[usize] {
        &self.measured_wires
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn trailing(&self) -> &[RotationSlot] {
        &self.trailing
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.rotations.len()).sum::<usize>() + self.trailing.len()
    }

    /// Gate sequence with slot indices, independent of parameter values.
    pub fn template(&self) -> Vec<LayoutGate> {
        let mut out = Vec::new();
        let mut slot = 0;
        let ring = cz_ring(self.num_qubits);
        for block in &self.blocks {
            for r in &block.rotations {
                out.push(LayoutGate::Rotation { slot, wire: r.wire, axis: r.axis });
                slot += 1;
            }
            out.extend(ring.iter().map(|&(control, target)| LayoutGate::Cz { control, target }));
        }
        for r in &self.trailing {
            out.push(LayoutGate::Rotation { slot, wire: r.wire, axis: r.axis });
            slot += 1;
        }
        out
    }

    /// Concrete gates for the given angles.
    pub fn gates(&self, params: &[f64]) -> Result<Vec<GateSpec>> {
        self.check_params(params)?;
        Ok(self
            .template()
            .into_iter()
            .map(|g| match g {
                LayoutGate::Rotation { slot, wire, axis } => axis.gate(wire, params[slot]),
                LayoutGate::Cz { control, target } => GateSpec::cz(control, target),
            })
            .collect())
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(VqcError::ParamMismatch {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        if let Some(&bad) = params.iter().find(|p| !p.is_finite()) {
            return Err(VqcError::NonFinite(format!("parameter {bad}")));
        }
        Ok(())
    }

    /// Plain-text gate listing, one gate per line.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "qubits {} parameters {} measured {:?}\n",
            self.num_qubits,
            self.parameter_count(),
            self.measured_wires
        );
        for gate in self.template() {
            match gate {
                LayoutGate::Rotation { slot, wire, axis } => {
                    let _ = writeln!(out, "{} wire {wire} slot {slot}", axis.name());
                }
                LayoutGate::Cz { control, target } => {
                    let _ = writeln!(out, "CZ control {control} target {target}");
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layouts_have_54_slots() {
        let actor = CircuitLayout::default_for(Role::Actor);
        let critic = CircuitLayout::default_for(Role::Critic);
        assert_eq!(actor.parameter_count(), 54);
        assert_eq!(critic.parameter_count(), 54);
        assert_eq!(actor.parameter_count() + critic.parameter_count(), 108);
        assert_eq!(actor.measured_wires(), &[0, 1, 2, 3, 4]);
        assert_eq!(critic.measured_wires(), &[0]);
    }

    #[test]
    fn default_layout_structure() {
        let layout = CircuitLayout::default_for(Role::Actor);
        assert_eq!(layout.blocks().len(), 2);
        assert!(layout.blocks().iter().all(|b| b.rotations.len() == 24));
        let trailing: Vec<_> = layout.trailing().iter().map(|s| (s.wire, s.axis)).collect();
        assert_eq!(trailing, (0..6).map(|w| (w, Axis::Y)).collect::<Vec<_>>());
        let cz = layout
            .template()
            .iter()
            .filter(|g| matches!(g, LayoutGate::Cz { .. }))
            .count();
        assert_eq!(cz, 16);
    }

    #[test]
    fn budget_layouts() {
        for (q, budget) in [(1, 50), (2, 50), (4, 50), (3, 7)] {
            let l = CircuitLayout::with_budget(q, budget, vec![0]).unwrap();
            assert_eq!(l.parameter_count(), budget, "q={q}");
        }
        assert!(CircuitLayout::with_budget(2, 0, vec![0]).is_err());
    }

    #[test]
    fn ring_shapes() {
        assert!(cz_ring(1).is_empty());
        assert_eq!(cz_ring(2), vec![(0, 1)]);
        assert_eq!(cz_ring(3), vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn invalid_layouts() {
        let slot = |wire| RotationSlot { wire, axis: Axis::X };
        assert!(CircuitLayout::new(2, vec![], vec![slot(2)], vec![0]).is_err());
        assert!(CircuitLayout::new(2, vec![], vec![slot(0)], vec![]).is_err());
        assert!(CircuitLayout::new(2, vec![], vec![slot(0)], vec![1, 1]).is_err());
        assert!(CircuitLayout::new(2, vec![], vec![slot(0)], vec![5]).is_err());
    }

    #[test]
    fn gates_are_reproducible() {
        let layout = CircuitLayout::default_for(Role::Critic);
        let params: Vec<f64> = (0..54).map(|i| i as f64 * 0.01).collect();
        assert_eq!(layout.gates(&params).unwrap(), layout.gates(&params).unwrap());
        assert!(layout.gates(&params[..10]).is_err());
    }

    #[test]
    fn description_lists_every_gate() {
        let layout = CircuitLayout::default_for(Role::Actor);
        let text = layout.describe();
        assert_eq!(text.lines().count(), 1 + 54 + 16);
        assert!(text.contains("RY wire 5 slot 53"));
    }
}
