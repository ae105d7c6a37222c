use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{CircuitBuilder, CircuitIR};
use crate::error::{Error, Result};
use crate::gates::{GateKind, GateSeq, NamedGate};
use crate::qsim::{StateVector, C64, MAX_QUBITS};

/// Largest ancilla register the flag gadget supports.
pub const MAX_BQC_ANCILLAS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorPrep {
    /// Probabilities over the `2^M` ancilla basis states, loaded as real amplitudes.
    Fixed(Vec<f64>),
    /// `blocks` layers of one trainable RY per ancilla plus a CNOT chain.
    Trainable { blocks: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BqcSpec {
    pub data_qubits: usize,
    pub ancilla_qubits: usize,
    /// Ancilla basis values that get their own conditional blocks.
    pub active: Vec<usize>,
    pub prior: PriorPrep,
    /// Conditional blocks per active value.
    pub blocks: usize,
    /// Flag-controlled rotation kinds applied to every data qubit per block.
    pub rotations: Vec<GateKind>,
    /// Append the ring of flag-controlled Toffolis `d_j -> d_{j+1}` to each block.
    pub entangle: bool,
}

impl BqcSpec {
    /// Uniform fixed prior over `active`, one CRY per data qubit per block.
    pub fn uniform(data_qubits: usize, ancilla_qubits: usize, active: Vec<usize>, blocks: usize) -> Self {
        let mut prior = vec![0.0; 1 << ancilla_qubits];
        for &v in &active {
            if v < prior.len() {
                prior[v] = 1.0 / active.len() as f64;
            }
        }
        Self {
            data_qubits,
            ancilla_qubits,
            active,
            prior: PriorPrep::Fixed(prior),
            blocks,
            rotations: vec![GateKind::Cry],
            entangle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.data_qubits, self.ancilla_qubits);
        if n == 0 {
            return Err(Error::Spec("BQC needs at least one data qubit".into()));
        }
        if m > MAX_BQC_ANCILLAS {
            return Err(Error::Spec(format!("flag activation supports at most {MAX_BQC_ANCILLAS} ancilla qubits, got {m}")));
        }
        let total = self.layout().num_qubits;
        if total > MAX_QUBITS {
            return Err(Error::QubitCount { count: total, max: MAX_QUBITS });
        }
        if self.active.is_empty() {
            return Err(Error::Spec("active ancilla value list is empty".into()));
        }
        if self.active.len() > 1 << m {
            return Err(Error::Spec(format!("{} active values exceed 2^{m}", self.active.len())));
        }
        for (i, &v) in self.active.iter().enumerate() {
            if v >= 1 << m {
                return Err(Error::Spec(format!("active value {v} does not fit {m} ancilla qubits")));
            }
            if self.active[..i].contains(&v) {
                return Err(Error::Spec(format!("duplicate active value {v}")));
            }
        }
        if self.blocks == 0 {
            return Err(Error::Spec("BQC needs at least one conditional block".into()));
        }
        if self.rotations.is_empty() || self.rotations.iter().any(|k| !k.is_controlled_rotation()) {
            return Err(Error::Spec("conditional rotations must be controlled rotation kinds".into()));
        }
        match &self.prior {
            PriorPrep::Fixed(p) => {
                if p.len() != 1 << m {
                    return Err(Error::Spec(format!("prior has {} entries, expected {}", p.len(), 1 << m)));
                }
                if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Spec("prior must be a probability vector".into()));
                }
            }
            PriorPrep::Trainable { blocks } => {
                if m == 0 || *blocks == 0 {
                    return Err(Error::Spec("trainable prior needs ancilla qubits and at least one block".into()));
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> BqcLayout {
        let (n, m) = (self.data_qubits, self.ancilla_qubits);
        BqcLayout {
            data: 0..n,
            ancilla: n..n + m,
            flag: (m > 0).then_some(n + m),
            borrowed: (m >= 3).then_some(0),
            num_qubits: if m > 0 { n + m + 1 } else { n },
        }
    }

    pub fn prior_param_count(&self) -> usize {
        match self.prior {
            PriorPrep::Fixed(_) => 0,
            PriorPrep::Trainable { blocks } => blocks * self.ancilla_qubits,
        }
    }

    pub fn params_per_class(&self) -> usize {
        self.blocks * self.data_qubits * self.rotations.len()
    }

    pub fn conditional_param_count(&self) -> usize {
        self.active.len() * self.params_per_class()
    }
}

/// Register layout: data qubits first, then ancillas, then the flag.
///
/// For three or more ancillas the multi-controlled flag activation borrows
/// data qubit `borrowed` as a dirty helper; it is restored before any data
/// gate runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BqcLayout {
    pub data: Range<usize>,
    pub ancilla: Range<usize>,
    pub flag: Option<usize>,
    pub borrowed: Option<usize>,
    pub num_qubits: usize,
}

#[derive(Clone, Debug)]
pub struct BqcCircuit {
    pub spec: BqcSpec,
    pub layout: BqcLayout,
    pub circuit: CircuitIR,
    pub prior_slots: Range<usize>,
    /// Slot range of each active value, in `spec.active` order.
    pub class_slots: Vec<Range<usize>>,
    /// Op range of each active value's conditional section.
    pub sections: Vec<Range<usize>>,
}

impl BqcCircuit {
    pub fn param_count(&self) -> usize {
        self.circuit.param_count()
    }

    /// Slot of rotation `rot` on data qubit `qubit` in `block` of class `class`.
    pub fn slot(&self, class: usize, block: usize, qubit: usize, rot: usize) -> usize {
        let r = self.spec.rotations.len();
        self.class_slots[class].start + (block * self.spec.data_qubits + qubit) * r + rot
    }

    /// The data-register circuit seen on the branch of active value `class`.
    ///
    /// Flag-controlled rotations become plain rotations and flag Toffolis
    /// become CNOTs; slot `s` here is global slot `class_slots[class].start + s`.
    pub fn branch(&self, class: usize) -> Result<CircuitIR> {
        if class >= self.class_slots.len() {
            return Err(Error::Argument(format!("class {class} out of range")));
        }
        branch_circuit(&self.spec)
    }

    /// Ancilla-register circuit producing the prior; slots are the prior slots.
    pub fn prior_circuit(&self) -> Result<Option<CircuitIR>> {
        let m = self.spec.ancilla_qubits;
        if m == 0 {
            return Ok(None);
        }
        let mut b = CircuitBuilder::new(m);
        let anc: Vec<usize> = (0..m).collect();
        add_prior(&mut b, &self.spec.prior, &anc);
        Ok(Some(b.build()?))
    }

    /// Prior probabilities over all `2^M` ancilla basis states.
    pub fn prior_probabilities(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.circuit.check_params(params)?;
        match self.prior_circuit()? {
            None => Ok(vec![1.0]),
            Some(c) => Ok(c.run(&params[self.prior_slots.clone()], None)?.probabilities()),
        }
    }

    /// Joint `q(x, λ)` over data values (rows) and all ancilla values (columns).
    pub fn joint(&self, params: &[f64]) -> Result<Vec<Vec<f64>>> {
        let data: Vec<usize> = self.layout.data.clone().collect();
        let anc: Vec<usize> = self.layout.ancilla.clone().collect();
        joint_distribution(&self.circuit, params, &data, &anc)
    }
}

/// `q(x, λ)` with `x` over `data_qubits` and `λ` over `ancilla_qubits`.
pub fn joint_distribution(
    circuit: &CircuitIR,
    params: &[f64],
    data_qubits: &[usize],
    ancilla_qubits: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let state = circuit.run(params, None)?;
    let qubits: Vec<usize> = data_qubits.iter().chain(ancilla_qubits).copied().collect();
    let marginal = state.marginal(&qubits)?;
    let cols = 1 << ancilla_qubits.len();
    Ok(marginal.chunks(cols).map(<[f64]>::to_vec).collect())
}

pub fn build_bqc(spec: &BqcSpec) -> Result<BqcCircuit> {
    spec.validate()?;
    let layout = spec.layout();
    let (n, m) = (spec.data_qubits, spec.ancilla_qubits);
    let per_class = spec.params_per_class();

    if m == 0 {
        let circuit = branch_circuit(spec)?;
        return Ok(BqcCircuit {
            spec: spec.clone(),
            layout,
            sections: vec![0..circuit.ops().len()],
            circuit,
            prior_slots: 0..0,
            class_slots: vec![0..per_class],
        });
    }

    let flag = layout.flag.expect("flag allocated when ancillas exist");
    let anc: Vec<usize> = layout.ancilla.clone().collect();
    let activation = flag_activation(&anc, flag, layout.borrowed)?;

    let mut b = CircuitBuilder::new(layout.num_qubits);
    add_prior(&mut b, &spec.prior, &anc);
    let prior_slots = 0..spec.prior_param_count();

    let mut class_slots = Vec::with_capacity(spec.active.len());
    let mut sections = Vec::with_capacity(spec.active.len());
    for &value in &spec.active {
        let start = b.len();
        let flips: Vec<usize> = (0..m).filter(|i| value >> (m - 1 - i) & 1 == 0).map(|i| anc[i]).collect();
        for &q in &flips {
            b.gate(NamedGate::x(), &[q]);
        }
        b.sequence(&activation);
        let first = prior_slots.end + class_slots.len() * per_class;
        for _ in 0..spec.blocks {
            for q in 0..n {
                for &kind in &spec.rotations {
                    b.trainable(kind, &[flag, q]);
                }
            }
            if spec.entangle && n >= 2 {
                for j in 0..n {
                    b.gate(NamedGate::toffoli(), &[flag, j, (j + 1) % n]);
                }
            }
        }
        b.sequence(&activation);
        for &q in &flips {
            b.gate(NamedGate::x(), &[q]);
        }
        class_slots.push(first..first + per_class);
        sections.push(start..b.len());
    }

    Ok(BqcCircuit { spec: spec.clone(), layout, circuit: b.build()?, prior_slots, class_slots, sections })
}

fn add_prior(b: &mut CircuitBuilder, prior: &PriorPrep, anc: &[usize]) {
    match prior {
        PriorPrep::Fixed(p) => {
            let amps: Vec<C64> = p.iter().map(|x| C64::new(x.sqrt(), 0.0)).collect();
            b.prepare(anc, amps, None);
        }
        PriorPrep::Trainable { blocks } => {
            for _ in 0..*blocks {
                for &a in anc {
                    b.trainable(GateKind::Ry, &[a]);
                }
                for w in anc.windows(2) {
                    b.gate(NamedGate::cnot(), &[w[0], w[1]]);
                }
            }
        }
    }
}

fn branch_circuit(spec: &BqcSpec) -> Result<CircuitIR> {
    let n = spec.data_qubits;
    let mut b = CircuitBuilder::new(n);
    for _ in 0..spec.blocks {
        for q in 0..n {
            for &kind in &spec.rotations {
                let base = kind.base_rotation().unwrap_or(kind);
                b.trainable(base, &[q]);
            }
        }
        if spec.entangle && n >= 2 {
            for j in 0..n {
                b.gate(NamedGate::cnot(), &[j, (j + 1) % n]);
            }
        }
    }
    b.build()
}

/// Toffoli network computing `flag ^= AND(anc)`.
///
/// Three and four controls use the dirty helper `borrowed`; the network is a
/// self-inverse permutation, so running it twice uncomputes the flag.
fn flag_activation(anc: &[usize], flag: usize, borrowed: Option<usize>) -> Result<GateSeq> {
    let t = |a: usize, b: usize, c: usize| (NamedGate::toffoli(), vec![a, b, c]);
    let seq = match *anc {
        [a0] => vec![(NamedGate::cnot(), vec![a0, flag])],
        [a0, a1] => vec![t(a0, a1, flag)],
        [a0, a1, a2] => {
            let d = borrowed.ok_or_else(|| Error::Invariant("no helper qubit for 3 ancillas".into()))?;
            vec![t(a2, d, flag), t(a0, a1, d), t(a2, d, flag), t(a0, a1, d)]
        }
        [a0, a1, a2, a3] => {
            let d = borrowed.ok_or_else(|| Error::Invariant("no helper qubit for 4 ancillas".into()))?;
            // flag ^= a2·a3·d with a0 as dirty helper
            let c3x = [t(d, a0, flag), t(a2, a3, a0), t(d, a0, flag), t(a2, a3, a0)];
            let mut seq = c3x.to_vec();
            seq.push(t(a0, a1, d));
            seq.extend(c3x);
            seq.push(t(a0, a1, d));
            seq
        }
        _ => return Err(Error::Spec(format!("flag activation for {} ancillas", anc.len()))),
    };
    check_activation(&seq, anc, flag)?;
    Ok(seq)
}

/// Classical truth-table check of the activation network on its support.
fn check_activation(seq: &GateSeq, anc: &[usize], flag: usize) -> Result<()> {
    let mut wires: Vec<usize> = seq.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    wires.sort_unstable();
    wires.dedup();
    let pos = |q: usize| wires.iter().position(|&w| w == q).expect("wire present");
    for input in 0u32..1 << wires.len() {
        let mut bits = input;
        for (g, t) in seq {
            let controls = &t[..t.len() - 1];
            if controls.iter().all(|&c| bits >> pos(c) & 1 == 1) {
                bits ^= 1 << pos(t[t.len() - 1]);
            }
            debug_assert!(matches!(g.kind, GateKind::Cnot | GateKind::Toffoli));
        }
        let all_on = anc.iter().all(|&a| input >> pos(a) & 1 == 1);
        let expected = if all_on { input ^ 1 << pos(flag) } else { input };
        if bits != expected {
            return Err(Error::Invariant(format!("flag activation network wrong on input {input:b}")));
        }
    }
    Ok(())
}

impl BqcCircuit {
    /// Reduced probability that the flag reads `|1⟩` after running `ops[..end]`.
    pub fn flag_excitation_after(&self, params: &[f64], end: usize) -> Result<f64> {
        let Some(flag) = self.layout.flag else { return Ok(0.0) };
        let mut state = StateVector::zero(self.layout.num_qubits)?;
        self.circuit.apply_range(&mut state, params, 0..end)?;
        state.excitation(flag)
    }
}
