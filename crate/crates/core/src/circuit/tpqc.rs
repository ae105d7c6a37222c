use serde::{Deserialize, Serialize};

use super::{CircuitBuilder, CircuitIR};
use crate::error::{Error, Result};
use crate::gates::{GateKind, NamedGate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TpqcLayout {
    Tree,
    MpsChain,
}

/// Tensor-network layout of two-qubit local blocks.
///
/// A local block on `(a, b)` applies the template rotations to `a` then `b`,
/// then `CNOT(a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpqcSpec {
    pub num_qubits: usize,
    pub layout: TpqcLayout,
    pub template: Vec<GateKind>,
    /// Number of passes over all levels.
    pub repeats: usize,
}

impl TpqcSpec {
    pub fn new(num_qubits: usize, layout: TpqcLayout) -> Self {
        Self { num_qubits, layout, template: vec![GateKind::Ry], repeats: 1 }
    }
}

/// Qubit pairs of the local blocks, grouped by level.
///
/// Tree: level `i` merges subtrees of size `s = 2^(i-1)` through their last
/// qubits, so it has `N / 2^i` blocks. Chain: one block per level sliding
/// right.
pub fn tpqc_levels(spec: &TpqcSpec) -> Result<Vec<Vec<(usize, usize)>>> {
    let n = spec.num_qubits;
    if n < 2 {
        return Err(Error::Spec(format!("TPQC needs at least 2 qubits, got {n}")));
    }
    match spec.layout {
        TpqcLayout::Tree => {
            if !n.is_power_of_two() {
                return Err(Error::Spec(format!("tree layout needs a power-of-two qubit count, got {n}")));
            }
            let mut levels = Vec::new();
            let mut s = 1;
            while s < n {
                levels.push((0..n / (2 * s)).map(|j| (j * 2 * s + s - 1, j * 2 * s + 2 * s - 1)).collect());
                s *= 2;
            }
            Ok(levels)
        }
        TpqcLayout::MpsChain => Ok((0..n - 1).map(|i| vec![(i, i + 1)]).collect()),
    }
}

pub fn build_tpqc(spec: &TpqcSpec) -> Result<CircuitIR> {
    let levels = tpqc_levels(spec)?;
    if spec.template.is_empty() || spec.template.iter().any(|k| !k.is_plain_rotation()) {
        return Err(Error::Spec("local block template must be nonempty single-qubit rotations".into()));
    }
    if spec.repeats == 0 {
        return Err(Error::Spec("TPQC needs at least one pass".into()));
    }
    let mut b = CircuitBuilder::new(spec.num_qubits);
    for _ in 0..spec.repeats {
        for level in &levels {
            for &(a, c) in level {
                for q in [a, c] {
                    for &kind in &spec.template {
                        b.trainable(kind, &[q]);
                    }
                }
                b.gate(NamedGate::cnot(), &[a, c]);
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Op;

    #[test]
    fn tree_of_four() {
        let levels = tpqc_levels(&TpqcSpec::new(4, TpqcLayout::Tree)).unwrap();
        assert_eq!(levels, vec![vec![(0, 1), (2, 3)], vec![(1, 3)]]);
    }

    #[test]
    fn tree_block_counts_halve() {
        let levels = tpqc_levels(&TpqcSpec::new(16, TpqcLayout::Tree)).unwrap();
        let counts: Vec<_> = levels.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![8, 4, 2, 1]);
    }

    #[test]
    fn chain_of_three() {
        let levels = tpqc_levels(&TpqcSpec::new(3, TpqcLayout::MpsChain)).unwrap();
        assert_eq!(levels, vec![vec![(0, 1)], vec![(1, 2)]]);
    }

    #[test]
    fn two_qubit_layouts_agree() {
        let a = build_tpqc(&TpqcSpec::new(2, TpqcLayout::Tree)).unwrap();
        let b = build_tpqc(&TpqcSpec::new(2, TpqcLayout::MpsChain)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cnots_stay_inside_local_blocks() {
        for layout in [TpqcLayout::Tree, TpqcLayout::MpsChain] {
            let spec = TpqcSpec::new(8, layout);
            let pairs: Vec<_> = tpqc_levels(&spec).unwrap().concat();
            let c = build_tpqc(&spec).unwrap();
            for op in c.ops() {
                if let Op::Gate { kind: GateKind::Cnot, targets, .. } = op {
                    assert!(pairs.contains(&(targets[0], targets[1])));
                }
            }
        }
    }

    #[test]
    fn tree_rejects_non_power_of_two() {
        assert!(matches!(build_tpqc(&TpqcSpec::new(6, TpqcLayout::Tree)), Err(Error::Spec(_))));
        assert!(build_tpqc(&TpqcSpec::new(6, TpqcLayout::MpsChain)).is_ok());
    }
}
