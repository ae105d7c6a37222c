use serde::{Deserialize, Serialize};

use super::{CircuitBuilder, CircuitIR};
use crate::error::{Error, Result};
use crate::gates::{GateKind, NamedGate};

/// Per-qubit rotation order of the block used by the IQP compiler.
pub const FAN_OUT_TEMPLATE: [GateKind; 7] =
    [GateKind::Rx, GateKind::Rz, GateKind::Rx, GateKind::Rphi, GateKind::Rz, GateKind::Ry, GateKind::Rz];

/// L blocks, each: the template rotations on every qubit, then the entangler CNOTs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpqcSpec {
    pub num_qubits: usize,
    pub num_blocks: usize,
    pub entangler: Vec<(usize, usize)>,
    pub template: Vec<GateKind>,
}

impl MpqcSpec {
    /// Seven-rotation template with CNOT fan-out from qubit 0.
    pub fn fan_out(num_qubits: usize, num_blocks: usize) -> Self {
        Self {
            num_qubits,
            num_blocks,
            entangler: (1..num_qubits).map(|j| (0, j)).collect(),
            template: FAN_OUT_TEMPLATE.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits;
        if n == 0 {
            return Err(Error::Spec("MPQC needs at least one qubit".into()));
        }
        if self.num_blocks == 0 {
            return Err(Error::Spec("MPQC needs at least one block".into()));
        }
        if self.entangler.len() > n {
            return Err(Error::Spec(format!(
                "entangler has {} CNOTs, at most {n} allowed per block",
                self.entangler.len()
            )));
        }
        for &(c, t) in &self.entangler {
            if c >= n || t >= n || c == t {
                return Err(Error::Spec(format!("invalid entangler pair ({c}, {t})")));
            }
        }
        if self.template.is_empty() {
            return Err(Error::Spec("every qubit needs at least one parameterized gate".into()));
        }
        if let Some(k) = self.template.iter().find(|k| !k.is_plain_rotation()) {
            return Err(Error::Spec(format!("template entry {k} is not a single-qubit rotation")));
        }
        Ok(())
    }

    pub fn params_per_block(&self) -> usize {
        self.num_qubits * self.template.len()
    }

    /// Slot of template gate `gate` on `qubit` in `block`.
    pub fn slot(&self, block: usize, qubit: usize, gate: usize) -> usize {
        block * self.params_per_block() + qubit * self.template.len() + gate
    }
}

pub fn build_mpqc(spec: &MpqcSpec) -> Result<CircuitIR> {
    spec.validate()?;
    let mut b = CircuitBuilder::new(spec.num_qubits);
    for _ in 0..spec.num_blocks {
        for q in 0..spec.num_qubits {
            for &kind in &spec.template {
                b.trainable(kind, &[q]);
            }
        }
        for &(c, t) in &spec.entangler {
            b.gate(NamedGate::cnot(), &[c, t]);
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::sequence_unitary;
    use crate::qsim::{operator_fidelity, StateVector};

    #[test]
    fn smallest_instance() {
        let spec = MpqcSpec { num_qubits: 2, num_blocks: 1, entangler: vec![(0, 1)], template: vec![GateKind::Ry] };
        let c = build_mpqc(&spec).unwrap();
        assert_eq!(c.param_count(), 2);
        assert_eq!(c.ops().len(), 3);
        assert_eq!(c.ops()[0].slot(), Some(0));
        assert_eq!(c.ops()[1].slot(), Some(1));
        assert_eq!(c.ops()[1].targets(), &[1]);
        assert_eq!(c.count_kind(GateKind::Cnot), 1);
    }

    #[test]
    fn fan_out_params_per_block() {
        for n in 1..6 {
            let spec = MpqcSpec::fan_out(n, 3);
            assert_eq!(spec.params_per_block(), 7 * n);
            let c = build_mpqc(&spec).unwrap();
            assert_eq!(c.param_count(), 21 * n);
            assert_eq!(c.count_kind(GateKind::Cnot), 3 * (n - 1));
        }
    }

    #[test]
    fn zero_angles_give_fan_out_layer() {
        let n = 4;
        let c = build_mpqc(&MpqcSpec::fan_out(n, 1)).unwrap();
        let zeros = vec![0.0; c.param_count()];
        let seq: Vec<_> = (1..n).map(|j| (NamedGate::cnot(), vec![0, j])).collect();
        let oracle = sequence_unitary(n, &seq).unwrap();
        let dim = 1 << n;
        let mut cols = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            cols.push(c.run(&zeros, Some(StateVector::basis(n, i).unwrap())).unwrap());
        }
        let mut u = vec![Default::default(); dim * dim];
        for (col, s) in cols.iter().enumerate() {
            for row in 0..dim {
                u[row * dim + col] = s.amplitudes()[row];
            }
        }
        assert!(operator_fidelity(&u, &oracle, dim) > 1.0 - 1e-12);
    }

    #[test]
    fn two_zero_blocks_cancel() {
        let n = 3;
        let c = build_mpqc(&MpqcSpec::fan_out(n, 2)).unwrap();
        let zeros = vec![0.0; c.param_count()];
        for i in 0..1 << n {
            let s = StateVector::basis(n, i).unwrap();
            let out = c.run(&zeros, Some(s.clone())).unwrap();
            assert!(out.fidelity_up_to_phase(&s).unwrap() > 1.0 - 1e-10);
        }
    }

    #[test]
    fn spec_errors() {
        let mut spec = MpqcSpec::fan_out(2, 1);
        spec.entangler = vec![(0, 1), (1, 0), (0, 1)];
        assert!(matches!(build_mpqc(&spec), Err(Error::Spec(_))));
        let mut spec = MpqcSpec::fan_out(2, 1);
        spec.template = vec![];
        assert!(build_mpqc(&spec).is_err());
        let mut spec = MpqcSpec::fan_out(2, 1);
        spec.template = vec![GateKind::Cry];
        assert!(build_mpqc(&spec).is_err());
    }
}
