//! IQP circuits and their compilation into fan-out MPQC block schedules.
//!
//! Every block applies, per qubit, `RX RZ RX RPHI RZ RY RZ` (slots 0..7 in
//! time order) and then `CNOT(0, j)` for all `j != 0`. A block's parameters are
//! laid out as `7 * qubit + slot`. Fragments rely on the fan-out layer of two
//! consecutive blocks cancelling when nothing in between touches the control.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_mpqc, CircuitBuilder, CircuitIR, MpqcSpec, FAN_OUT_TEMPLATE};
use crate::error::{Error, Result};
use crate::gates::NamedGate;
use crate::qsim::StateVector;

pub const SLOTS_PER_QUBIT: usize = 7;

const RX1: usize = 0;
const RZ1: usize = 1;
const RX2: usize = 2;
const PHI: usize = 3;
const RZ2: usize = 4;
const RY: usize = 5;

/// Fragment sizes in blocks.
pub const H_BLOCKS: usize = 2;
pub const T_BLOCKS: usize = 2;
pub const CNOT_BLOCKS: usize = 4;
pub const REVERSED_CNOT_BLOCKS: usize = 6;
pub const SWAP_BLOCKS: usize = 14;
pub const CZ_FIRST_BLOCKS: usize = 6;
pub const CZ_GENERAL_BLOCKS: usize = 34;

/// One commuting diagonal layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IqpLayer {
    #[serde(default)]
    pub t: Vec<usize>,
    #[serde(default)]
    pub cz: Vec<(usize, usize)>,
}

/// `H^N · (diagonal layers) · H^N` acting on `|0…0⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IqpCircuit {
    pub num_qubits: usize,
    pub layers: Vec<IqpLayer>,
}

impl IqpCircuit {
    pub fn new(num_qubits: usize, layers: Vec<IqpLayer>) -> Result<Self> {
        let c = Self { num_qubits, layers };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_qubits;
        if n == 0 {
            return Err(Error::Validation("IQP circuit needs at least one qubit".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.t.len() + layer.cz.len() > n {
                return Err(Error::Validation(format!("layer {i} has more than {n} gates")));
            }
            for (k, &q) in layer.t.iter().enumerate() {
                if q >= n {
                    return Err(Error::QubitIndex(format!("layer {i}: T target {q} out of range")));
                }
                if layer.t[..k].contains(&q) {
                    return Err(Error::QubitIndex(format!("layer {i}: duplicate T target {q}")));
                }
            }
            for &(a, b) in &layer.cz {
                if a >= n || b >= n || a == b {
                    return Err(Error::QubitIndex(format!("layer {i}: invalid CZ pair ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.t.len() + l.cz.len()).sum()
    }

    pub fn cz_count(&self) -> usize {
        self.layers.iter().map(|l| l.cz.len()).sum()
    }

    pub fn t_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| !l.t.is_empty()).count()
    }

    /// Direct gate-level circuit.
    pub fn circuit(&self) -> Result<CircuitIR> {
        let n = self.num_qubits;
        let mut b = CircuitBuilder::new(n);
        for q in 0..n {
            b.gate(NamedGate::h(), &[q]);
        }
        for layer in &self.layers {
            for &q in &layer.t {
                b.gate(NamedGate::t(), &[q]);
            }
            for &(a, c) in &layer.cz {
                b.gate(NamedGate::cz(), &[a, c]);
            }
        }
        for q in 0..n {
            b.gate(NamedGate::h(), &[q]);
        }
        b.build()
    }

    pub fn state(&self) -> Result<StateVector> {
        self.circuit()?.run(&[], None)
    }

    /// Random circuit with `gates` diagonal gates packed into valid layers.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, gates: usize, rng: &mut R) -> Self {
        let mut layers = vec![IqpLayer::default()];
        for _ in 0..gates {
            if layers.last().map_or(0, |l| l.t.len() + l.cz.len()) >= num_qubits || rng.random_bool(0.3) {
                layers.push(IqpLayer::default());
            }
            let layer = layers.last_mut().expect("nonempty");
            let free: Vec<usize> = (0..num_qubits).filter(|q| !layer.t.contains(q)).collect();
            if num_qubits >= 2 && (free.is_empty() || rng.random_bool(0.5)) {
                let a = rng.random_range(0..num_qubits);
                let mut b = rng.random_range(0..num_qubits - 1);
                if b >= a {
                    b += 1;
                }
                layer.cz.push((a, b));
            } else if !free.is_empty() {
                layer.t.push(free[rng.random_range(0..free.len())]);
            }
        }
        layers.retain(|l| !l.t.is_empty() || !l.cz.is_empty());
        Self { num_qubits, layers }
    }
}

/// Ordered block parameter vectors over the fan-out entangler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub num_qubits: usize,
    pub blocks: Vec<Vec<f64>>,
}

impl BlockSchedule {
    pub fn empty(num_qubits: usize) -> Self {
        Self { num_qubits, blocks: Vec::new() }
    }

    fn zeros(num_qubits: usize, count: usize) -> Self {
        Self { num_qubits, blocks: vec![vec![0.0; SLOTS_PER_QUBIT * num_qubits]; count] }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn extend(&mut self, other: BlockSchedule) {
        self.blocks.extend(other.blocks);
    }

    fn set(&mut self, block: usize, qubit: usize, slot: usize, angle: f64) {
        self.blocks[block][SLOTS_PER_QUBIT * qubit + slot] = angle;
    }

    pub fn mpqc_spec(&self) -> MpqcSpec {
        MpqcSpec::fan_out(self.num_qubits, self.blocks.len())
    }

    pub fn params(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    pub fn circuit(&self) -> Result<CircuitIR> {
        build_mpqc(&self.mpqc_spec())
    }

    pub fn run(&self, initial: Option<StateVector>) -> Result<StateVector> {
        if self.blocks.is_empty() {
            return match initial {
                Some(s) => Ok(s),
                None => StateVector::zero(self.num_qubits),
            };
        }
        self.circuit()?.run(&self.params(), initial)
    }

    /// Human-readable entangler and template description for serialized output.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "template": FAN_OUT_TEMPLATE.iter().map(|k| k.name()).collect::<Vec<_>>(),
            "entangler": (1..self.num_qubits).map(|j| [0, j]).collect::<Vec<_>>(),
        })
    }
}

fn check_qubit(n: usize, q: usize) -> Result<()> {
    if q >= n {
        return Err(Error::QubitIndex(format!("qubit {q} out of range for {n} qubits")));
    }
    Ok(())
}

fn set_h(s: &mut BlockSchedule, block: usize, qubit: usize) {
    for slot in [RX1, RZ1, RX2] {
        s.set(block, qubit, slot, FRAC_PI_2);
    }
}

/// ABC settings realizing `CNOT(0, k)` across blocks `at..at+3`.
fn set_cnot(s: &mut BlockSchedule, at: usize, k: usize) {
    s.set(at, 0, PHI, -FRAC_PI_2);
    s.set(at, k, RZ2, -FRAC_PI_2);
    s.set(at + 1, k, RZ2, FRAC_PI_2);
    s.set(at + 1, k, RY, -FRAC_PI_2);
    s.set(at + 2, k, RY, FRAC_PI_2);
}

/// `H` on every qubit.
pub fn compile_h_layer(num_qubits: usize) -> BlockSchedule {
    let mut s = BlockSchedule::zeros(num_qubits, H_BLOCKS);
    for q in 0..num_qubits {
        set_h(&mut s, 0, q);
    }
    s
}

/// `T` on each of `targets`.
pub fn compile_t_layer(num_qubits: usize, targets: &[usize]) -> Result<BlockSchedule> {
    if targets.is_empty() {
        return Err(Error::Argument("T layer needs at least one target".into()));
    }
    let mut s = BlockSchedule::zeros(num_qubits, T_BLOCKS);
    for &q in targets {
        check_qubit(num_qubits, q)?;
        s.set(0, q, PHI, FRAC_PI_4);
    }
    Ok(s)
}

pub fn compile_cnot_from_first(num_qubits: usize, k: usize) -> Result<BlockSchedule> {
    if k == 0 {
        return Err(Error::Argument("CNOT target must differ from qubit 0".into()));
    }
    check_qubit(num_qubits, k)?;
    let mut s = BlockSchedule::zeros(num_qubits, CNOT_BLOCKS);
    set_cnot(&mut s, 0, k);
    Ok(s)
}

/// `CNOT(j, 0)` as `(H⊗H) CNOT(0, j) (H⊗H)`.
pub fn compile_reversed_cnot(num_qubits: usize, j: usize) -> Result<BlockSchedule> {
    if j == 0 {
        return Err(Error::Argument("reversed CNOT control must differ from qubit 0".into()));
    }
    check_qubit(num_qubits, j)?;
    let mut s = BlockSchedule::zeros(num_qubits, REVERSED_CNOT_BLOCKS);
    set_h(&mut s, 0, 0);
    set_h(&mut s, 0, j);
    set_cnot(&mut s, 0, j);
    set_h(&mut s, 4, 0);
    set_h(&mut s, 4, j);
    Ok(s)
}

pub fn compile_swap_with_first(num_qubits: usize, j: usize) -> Result<BlockSchedule> {
    let mut s = compile_cnot_from_first(num_qubits, j)?;
    s.extend(compile_reversed_cnot(num_qubits, j)?);
    s.extend(compile_cnot_from_first(num_qubits, j)?);
    Ok(s)
}

fn compile_cz_from_first(num_qubits: usize, k: usize) -> Result<BlockSchedule> {
    check_qubit(num_qubits, k)?;
    let mut s = BlockSchedule::zeros(num_qubits, CZ_FIRST_BLOCKS);
    set_h(&mut s, 0, k);
    set_cnot(&mut s, 0, k);
    set_h(&mut s, 4, k);
    Ok(s)
}

/// `CZ(j, k)`; pairs not touching qubit 0 are routed through it with SWAPs.
pub fn compile_cz(num_qubits: usize, j: usize, k: usize) -> Result<BlockSchedule> {
    if j == k {
        return Err(Error::Argument(format!("CZ needs distinct qubits, got ({j}, {k})")));
    }
    check_qubit(num_qubits, j)?;
    check_qubit(num_qubits, k)?;
    match (j, k) {
        (0, t) | (t, 0) => compile_cz_from_first(num_qubits, t),
        _ => {
            let mut s = compile_swap_with_first(num_qubits, j)?;
            s.extend(compile_cz_from_first(num_qubits, k)?);
            s.extend(compile_swap_with_first(num_qubits, j)?);
            Ok(s)
        }
    }
}

/// Exact block count of [`compile_iqp`].
pub fn block_count(circuit: &IqpCircuit) -> usize {
    let cz: usize = circuit
        .layers
        .iter()
        .flat_map(|l| &l.cz)
        .map(|&(a, b)| if a == 0 || b == 0 { CZ_FIRST_BLOCKS } else { CZ_GENERAL_BLOCKS })
        .sum();
    2 * H_BLOCKS + T_BLOCKS * circuit.t_layer_count() + cz
}

/// Upper budget `4 + 2·(T layers) + 34·(CZ gates)`.
pub fn block_budget(circuit: &IqpCircuit) -> usize {
    2 * H_BLOCKS + T_BLOCKS * circuit.t_layer_count() + CZ_GENERAL_BLOCKS * circuit.cz_count()
}

pub fn compile_iqp(circuit: &IqpCircuit) -> Result<BlockSchedule> {
    circuit.validate()?;
    let n = circuit.num_qubits;
    let mut s = compile_h_layer(n);
    for layer in &circuit.layers {
        if !layer.t.is_empty() {
            s.extend(compile_t_layer(n, &layer.t)?);
        }
        for &(a, b) in &layer.cz {
            s.extend(compile_cz(n, a, b)?);
        }
    }
    s.extend(compile_h_layer(n));
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub fidelity: f64,
    pub max_prob_diff: f64,
}

/// Compare the schedule's output state with the IQP circuit's.
pub fn verify_schedule(circuit: &IqpCircuit, schedule: &BlockSchedule) -> Result<ScheduleCheck> {
    if circuit.num_qubits != schedule.num_qubits {
        return Err(Error::SizeMismatch(format!(
            "IQP circuit on {} qubits, schedule on {}",
            circuit.num_qubits, schedule.num_qubits
        )));
    }
    let want = circuit.state()?;
    let got = schedule.run(None)?;
    let max_prob_diff = want
        .probabilities()
        .iter()
        .zip(got.probabilities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ScheduleCheck { fidelity: want.fidelity_up_to_phase(&got)?, max_prob_diff })
}
