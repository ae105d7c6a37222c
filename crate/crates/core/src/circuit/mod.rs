//! Serializable circuit representation and the architecture builders.
//!
//! JSON layout:
//!
//! ```json
//! {"num_qubits": 2,
//!  "ops": [{"kind": "RY", "targets": [0], "slot": 0},
//!          {"kind": "CNOT", "targets": [0, 1]},
//!          {"kind": "RZ", "targets": [1], "angle": 0.5}],
//!  "param_count": 1}
//! ```
//!
//! Targets follow the gate convention of [`crate::gates`]: for controlled
//! kinds the leading targets are controls. Qubit 0 is the most significant bit
//! of every basis index. Angles are written as shortest round-trip decimal
//! doubles, so a JSON round trip is bit-exact.
//!
//! Besides gates, an op may be a `PREP` that loads fixed amplitudes into a
//! register sitting in `|0…0⟩`, optionally only on the branch where some
//! condition qubits read a given value.

mod bqc;
mod mpqc;
mod tpqc;

pub use bqc::{build_bqc, joint_distribution, BqcCircuit, BqcLayout, BqcSpec, PriorPrep, MAX_BQC_ANCILLAS};
pub use mpqc::{build_mpqc, MpqcSpec, FAN_OUT_TEMPLATE};
pub use tpqc::{build_tpqc, tpqc_levels, TpqcLayout, TpqcSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{gate_matrix, GateKind, GateSeq, NamedGate};
use crate::qsim::{StateVector, C64, MAX_QUBITS};

/// Where a gate gets its angle from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle {
    /// Angle-free gate.
    None,
    Fixed(f64),
    /// Trainable parameter slot.
    Slot(usize),
}

/// Branch selector for a conditional preparation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub qubits: Vec<usize>,
    pub value: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOp", into = "RawOp")]
pub enum Op {
    Gate { kind: GateKind, targets: Vec<usize>, angle: Angle },
    Prepare { targets: Vec<usize>, amplitudes: Vec<C64>, condition: Option<Condition> },
}

impl Op {
    pub fn gate(g: NamedGate, targets: Vec<usize>) -> Self {
        let angle = g.angle.map_or(Angle::None, Angle::Fixed);
        Op::Gate { kind: g.kind, targets, angle }
    }

    pub fn param(kind: GateKind, targets: Vec<usize>, slot: usize) -> Self {
        Op::Gate { kind, targets, angle: Angle::Slot(slot) }
    }

    pub fn targets(&self) -> &[usize] {
        match self {
            Op::Gate { targets, .. } | Op::Prepare { targets, .. } => targets,
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match self {
            Op::Gate { angle: Angle::Slot(s), .. } => Some(*s),
            _ => None,
        }
    }

    /// Concrete gate for this op under `params`; `None` for preparations.
    pub fn resolve(&self, params: &[f64]) -> Option<NamedGate> {
        match self {
            Op::Gate { kind, angle, .. } => Some(NamedGate {
                kind: *kind,
                angle: match angle {
                    Angle::None => None,
                    Angle::Fixed(a) => Some(*a),
                    Angle::Slot(s) => Some(params[*s]),
                },
            }),
            Op::Prepare { .. } => None,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Op::Gate { kind, .. } => kind.name(),
            Op::Prepare { .. } => "PREP",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawOp {
    kind: String,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<Condition>,
}

impl From<Op> for RawOp {
    fn from(op: Op) -> Self {
        let kind = op.label().to_string();
        match op {
            Op::Gate { targets, angle, .. } => {
                let (angle, slot) = match angle {
                    Angle::None => (None, None),
                    Angle::Fixed(a) => (Some(a), None),
                    Angle::Slot(s) => (None, Some(s)),
                };
                RawOp { kind, targets, angle, slot, amplitudes: None, condition: None }
            }
            Op::Prepare { targets, amplitudes, condition } => RawOp {
                kind,
                targets,
                angle: None,
                slot: None,
                amplitudes: Some(amplitudes.iter().map(|a| [a.re, a.im]).collect()),
                condition,
            },
        }
    }
}

impl TryFrom<RawOp> for Op {
    type Error = Error;

    fn try_from(raw: RawOp) -> Result<Self> {
        if raw.kind.eq_ignore_ascii_case("PREP") {
            let amplitudes = raw
                .amplitudes
                .ok_or_else(|| Error::Argument("PREP op needs amplitudes".into()))?
                .iter()
                .map(|p| C64::new(p[0], p[1]))
                .collect();
            return Ok(Op::Prepare { targets: raw.targets, amplitudes, condition: raw.condition });
        }
        let kind = GateKind::from_name(&raw.kind)
            .ok_or_else(|| Error::Argument(format!("unknown gate kind {:?}", raw.kind)))?;
        let angle = match (raw.angle, raw.slot) {
            (Some(_), Some(_)) => {
                return Err(Error::Argument(format!("{kind} op has both angle and slot")))
            }
            (Some(a), None) => Angle::Fixed(a),
            (None, Some(s)) => Angle::Slot(s),
            (None, None) => Angle::None,
        };
        Ok(Op::Gate { kind, targets: raw.targets, angle })
    }
}

/// Ordered gate list over a fixed register with trainable parameter slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit")]
pub struct CircuitIR {
    num_qubits: usize,
    ops: Vec<Op>,
    param_count: usize,
}

#[derive(Deserialize)]
struct RawCircuit {
    num_qubits: usize,
    ops: Vec<Op>,
    param_count: usize,
}

impl TryFrom<RawCircuit> for CircuitIR {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        CircuitIR::new(raw.num_qubits, raw.ops, raw.param_count)
    }
}

impl CircuitIR {
    pub fn new(num_qubits: usize, ops: Vec<Op>, param_count: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::QubitCount { count: num_qubits, max: MAX_QUBITS });
        }
        let mut used = vec![false; param_count];
        for (i, op) in ops.iter().enumerate() {
            check_targets(op.targets(), num_qubits).map_err(|e| Error::Spec(format!("op {i}: {e}")))?;
            match op {
                Op::Gate { kind, targets, angle } => {
                    if targets.len() != kind.arity() {
                        return Err(Error::Spec(format!(
                            "op {i}: {kind} needs {} targets, got {}",
                            kind.arity(),
                            targets.len()
                        )));
                    }
                    match (kind.is_rotation(), angle) {
                        (true, Angle::Fixed(a)) if a.is_finite() => {}
                        (true, Angle::Slot(s)) if *s < param_count => used[*s] = true,
                        (true, Angle::Slot(s)) => {
                            return Err(Error::Spec(format!("op {i}: slot {s} >= param_count {param_count}")))
                        }
                        (true, _) => return Err(Error::Spec(format!("op {i}: {kind} needs a finite angle or slot"))),
                        (false, Angle::None) => {}
                        (false, _) => return Err(Error::Spec(format!("op {i}: {kind} takes no angle"))),
                    }
                }
                Op::Prepare { targets, amplitudes, condition } => {
                    if amplitudes.len() != 1 << targets.len() {
                        return Err(Error::Spec(format!("op {i}: PREP amplitude count mismatch")));
                    }
                    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                    if (norm - 1.0).abs() > 1e-10 {
                        return Err(Error::Spec(format!("op {i}: PREP amplitudes not normalized")));
                    }
                    if let Some(cond) = condition {
                        check_targets(&cond.qubits, num_qubits)
                            .map_err(|e| Error::Spec(format!("op {i}: condition {e}")))?;
                        if cond.qubits.iter().any(|q| targets.contains(q)) {
                            return Err(Error::Spec(format!("op {i}: condition overlaps targets")));
                        }
                        if cond.value >= 1 << cond.qubits.len() {
                            return Err(Error::Spec(format!("op {i}: condition value too wide")));
                        }
                    }
                }
            }
        }
        if let Some(s) = used.iter().position(|u| !u) {
            return Err(Error::Spec(format!("parameter slot {s} is never used")));
        }
        Ok(Self { num_qubits, ops, param_count })
    }

    /// Parameter-free circuit from a gate sequence.
    pub fn from_sequence(num_qubits: usize, seq: &GateSeq) -> Result<Self> {
        let ops = seq.iter().map(|(g, t)| Op::gate(*g, t.clone())).collect();
        Self::new(num_qubits, ops, 0)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, Op::Gate { kind: k, .. } if *k == kind))
            .count()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                self.param_count,
                params.len()
            )));
        }
        if let Some(p) = params.iter().find(|p| !p.is_finite()) {
            return Err(Error::Argument(format!("non-finite parameter {p}")));
        }
        Ok(())
    }

    /// Apply `ops[range]` to `state`.
    pub fn apply_range(&self, state: &mut StateVector, params: &[f64], range: std::ops::Range<usize>) -> Result<()> {
        self.check_params(params)?;
        if state.num_qubits() != self.num_qubits {
            return Err(Error::SizeMismatch(format!(
                "circuit on {} qubits, state on {}",
                self.num_qubits,
                state.num_qubits()
            )));
        }
        for op in &self.ops[range] {
            match op {
                Op::Gate { targets, .. } => {
                    let g = op.resolve(params).expect("gate op");
                    state.apply(&gate_matrix(&g)?, targets)?;
                }
                Op::Prepare { targets, amplitudes, condition } => {
                    let cond = condition.as_ref().map(|c| (c.qubits.as_slice(), c.value));
                    state.prepare_register(targets, amplitudes, cond)?;
                }
            }
        }
        Ok(())
    }

    /// Run from `initial` (default `|0…0⟩`).
    pub fn run(&self, params: &[f64], initial: Option<StateVector>) -> Result<StateVector> {
        let mut state = match initial {
            Some(s) => s,
            None => StateVector::zero(self.num_qubits)?,
        };
        self.apply_range(&mut state, params, 0..self.ops.len())?;
        Ok(state)
    }

    /// Freeze the slots with `Some(value)` into fixed angles and renumber the rest.
    ///
    /// Returns the new circuit and, for each of its slots, the old slot id.
    pub fn bind(&self, values: &[Option<f64>]) -> Result<(CircuitIR, Vec<usize>)> {
        if values.len() != self.param_count {
            return Err(Error::Argument(format!(
                "bind expects {} entries, got {}",
                self.param_count,
                values.len()
            )));
        }
        let mut remap = vec![usize::MAX; self.param_count];
        let mut kept = Vec::new();
        for (s, v) in values.iter().enumerate() {
            if v.is_none() {
                remap[s] = kept.len();
                kept.push(s);
            }
        }
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                Op::Gate { kind, targets, angle: Angle::Slot(s) } => Op::Gate {
                    kind: *kind,
                    targets: targets.clone(),
                    angle: match values[*s] {
                        Some(v) => Angle::Fixed(v),
                        None => Angle::Slot(remap[*s]),
                    },
                },
                other => other.clone(),
            })
            .collect();
        Ok((CircuitIR::new(self.num_qubits, ops, kept.len())?, kept))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_targets(targets: &[usize], num_qubits: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(Error::QubitIndex(format!("target {t} out of range for {num_qubits} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::QubitIndex(format!("duplicate target {t}")));
        }
    }
    Ok(())
}

/// Incremental construction with automatic slot allocation.
#[derive(Clone, Debug)]
pub struct CircuitBuilder {
    num_qubits: usize,
    ops: Vec<Op>,
    param_count: usize,
}

impl CircuitBuilder {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, ops: Vec::new(), param_count: 0 }
    }

    pub fn new_slot(&mut self) -> usize {
        self.param_count += 1;
        self.param_count - 1
    }

    pub fn gate(&mut self, g: NamedGate, targets: &[usize]) -> &mut Self {
        self.ops.push(Op::gate(g, targets.to_vec()));
        self
    }

    /// Rotation bound to a fresh slot; returns the slot id.
    pub fn trainable(&mut self, kind: GateKind, targets: &[usize]) -> usize {
        let s = self.new_slot();
        self.ops.push(Op::param(kind, targets.to_vec(), s));
        s
    }

    /// Rotation bound to an existing slot (tied parameters).
    pub fn tied(&mut self, kind: GateKind, targets: &[usize], slot: usize) -> &mut Self {
        self.ops.push(Op::param(kind, targets.to_vec(), slot));
        self
    }

    pub fn prepare(&mut self, targets: &[usize], amplitudes: Vec<C64>, condition: Option<Condition>) -> &mut Self {
        self.ops.push(Op::Prepare { targets: targets.to_vec(), amplitudes, condition });
        self
    }

    pub fn sequence(&mut self, seq: &GateSeq) -> &mut Self {
        for (g, t) in seq {
            self.gate(*g, t);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn build(self) -> Result<CircuitIR> {
        CircuitIR::new(self.num_qubits, self.ops, self.param_count)
    }
}

/// `X` on qubit 0 then `CNOT(0, N-1)`: prepares `|1 0…0 1⟩`.
pub fn build_toy_thm3(num_qubits: usize) -> Result<CircuitIR> {
    if num_qubits < 2 {
        return Err(Error::Spec(format!("toy circuit needs at least 2 qubits, got {num_qubits}")));
    }
    let mut b = CircuitBuilder::new(num_qubits);
    b.gate(NamedGate::x(), &[0]).gate(NamedGate::cnot(), &[0, num_qubits - 1]);
    b.build()
}
