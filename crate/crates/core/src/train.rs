//! Generative models over circuits, parameter-shift gradients and SGD.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::circuit::{BqcCircuit, CircuitIR, Op};
use crate::error::{Error, Result};
use crate::gates::{gate_matrix, GateKind, NamedGate};
use crate::losses::{KernelConfig, Loss};
use crate::qsim::{sample_counts, GateMatrix, Shots, StateVector, C64};

/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
enum Source {
    Fixed,
    Slot { slot: usize, scale: f64 },
}

#[derive(Clone, Debug)]
enum Step {
    Gate { kind: GateKind, targets: Vec<usize>, source: Source, matrix: Option<GateMatrix> },
    Prepare { targets: Vec<usize>, amplitudes: Vec<C64>, condition: Option<(Vec<usize>, usize)> },
}

/// A circuit whose slotted controlled rotations are rewritten as half-angle
/// plain rotations around CNOT (CZ for CRX), so that every slotted gate obeys
/// the two-term shift rule.
#[derive(Clone, Debug)]
pub struct Program {
    num_qubits: usize,
    steps: Vec<Step>,
}

impl Program {
    pub fn expand(circuit: &CircuitIR) -> Result<Self> {
        let mut steps = Vec::new();
        for op in circuit.ops() {
            match op {
                Op::Prepare { targets, amplitudes, condition } => steps.push(Step::Prepare {
                    targets: targets.clone(),
                    amplitudes: amplitudes.clone(),
                    condition: condition.as_ref().map(|c| (c.qubits.clone(), c.value)),
                }),
                Op::Gate { kind, targets, .. } => match op.slot() {
                    None => {
                        let g = op.resolve(&[]).expect("gate op");
                        steps.push(Step::Gate {
                            kind: *kind,
                            targets: targets.clone(),
                            source: Source::Fixed,
                            matrix: Some(gate_matrix(&g)?),
                        });
                    }
                    Some(slot) => expand_slotted(&mut steps, *kind, targets, slot)?,
                },
            }
        }
        Ok(Self { num_qubits: circuit.num_qubits(), steps })
    }

    /// `(step, slot, scale)` of every slotted gate.
    fn shift_sites(&self) -> Vec<(usize, usize, f64)> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Step::Gate { source: Source::Slot { slot, scale }, .. } => Some((i, *slot, *scale)),
                _ => None,
            })
            .collect()
    }

    /// Run with the angle of `shift.0` offset by `shift.1`.
    pub fn run(&self, params: &[f64], shift: Option<(usize, f64)>) -> Result<StateVector> {
        let mut state = StateVector::zero(self.num_qubits)?;
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Gate { targets, matrix: Some(m), .. } => state.apply(m, targets)?,
                Step::Gate { kind, targets, source: Source::Slot { slot, scale }, .. } => {
                    let delta = shift.filter(|s| s.0 == i).map_or(0.0, |s| s.1);
                    let g = NamedGate::new(*kind, Some(scale * params[*slot] + delta))?;
                    state.apply(&gate_matrix(&g)?, targets)?;
                }
                Step::Gate { .. } => unreachable!("fixed gates carry their matrix"),
                Step::Prepare { targets, amplitudes, condition } => {
                    let cond = condition.as_ref().map(|(q, v)| (q.as_slice(), *v));
                    state.prepare_register(targets, amplitudes, cond)?;
                }
            }
        }
        Ok(state)
    }
}

fn expand_slotted(steps: &mut Vec<Step>, kind: GateKind, targets: &[usize], slot: usize) -> Result<()> {
    let gate = |kind: GateKind, targets: Vec<usize>, scale: f64| Step::Gate {
        kind,
        targets,
        source: Source::Slot { slot, scale },
        matrix: None,
    };
    let fixed = |g: NamedGate, targets: Vec<usize>| -> Result<Step> {
        Ok(Step::Gate { kind: g.kind, targets, source: Source::Fixed, matrix: Some(g.matrix()?) })
    };
    if kind.is_plain_rotation() {
        steps.push(gate(kind, targets.to_vec(), 1.0));
        return Ok(());
    }
    let (c, t) = match targets {
        [c, t] => (*c, *t),
        _ => return Err(Error::UnsupportedGradient(format!("{kind} on {targets:?}"))),
    };
    let (base, flip) = match kind {
        GateKind::Crx => (GateKind::Rx, NamedGate::cz()),
        GateKind::Cry => (GateKind::Ry, NamedGate::cnot()),
        GateKind::Crz => (GateKind::Rz, NamedGate::cnot()),
        GateKind::Crphi => (GateKind::Rphi, NamedGate::cnot()),
        _ => return Err(Error::UnsupportedGradient(format!("no shift rule for slotted {kind}"))),
    };
    steps.push(gate(base, vec![t], 0.5));
    steps.push(fixed(flip, vec![c, t])?);
    steps.push(gate(base, vec![t], -0.5));
    steps.push(fixed(flip, vec![c, t])?);
    if kind == GateKind::Crphi {
        steps.push(gate(GateKind::Rphi, vec![c], 0.5));
    }
    Ok(())
}

/// `∂q/∂θ_slot += coeff · (plus − minus) / 2`.
#[derive(Clone, Debug)]
pub struct ShiftTerm {
    pub slot: usize,
    pub coeff: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

pub trait GenerativeModel: Sync {
    fn num_params(&self) -> usize;
    fn num_outcomes(&self) -> usize;
    fn distribution(&self, params: &[f64]) -> Result<Vec<f64>>;
    /// Distributions at `±π/2` for every elementary occurrence of every slot.
    fn shift_terms(&self, params: &[f64]) -> Result<Vec<ShiftTerm>>;
}

/// Outcome distribution of a circuit marginalized onto `outcome_qubits`.
#[derive(Clone, Debug)]
pub struct CircuitModel {
    circuit: CircuitIR,
    program: Program,
    outcome_qubits: Vec<usize>,
}

impl CircuitModel {
    pub fn new(circuit: CircuitIR, outcome_qubits: Vec<usize>) -> Result<Self> {
        let program = Program::expand(&circuit)?;
        StateVector::zero(circuit.num_qubits())?.marginal(&outcome_qubits)?;
        Ok(Self { circuit, program, outcome_qubits })
    }

    pub fn all_qubits(circuit: CircuitIR) -> Result<Self> {
        let q = (0..circuit.num_qubits()).collect();
        Self::new(circuit, q)
    }

    pub fn circuit(&self) -> &CircuitIR {
        &self.circuit
    }

    pub fn program(&self) -> &Program {
        &self.program
    }
}

impl GenerativeModel for CircuitModel {
    fn num_params(&self) -> usize {
        self.circuit.param_count()
    }

    fn num_outcomes(&self) -> usize {
        1 << self.outcome_qubits.len()
    }

    fn distribution(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.circuit.run(params, None)?.marginal(&self.outcome_qubits)
    }

    fn shift_terms(&self, params: &[f64]) -> Result<Vec<ShiftTerm>> {
        self.circuit.check_params(params)?;
        self.program
            .shift_sites()
            .into_par_iter()
            .map(|(step, slot, coeff)| {
                let plus = self.program.run(params, Some((step, FRAC_PI_2)))?.marginal(&self.outcome_qubits)?;
                let minus = self.program.run(params, Some((step, -FRAC_PI_2)))?.marginal(&self.outcome_qubits)?;
                Ok(ShiftTerm { slot, coeff, plus, minus })
            })
            .collect()
    }
}

/// BQC data marginal `q(x) = Σ_λ q(λ) q(x | λ)` evaluated branch by branch.
///
/// Equivalent to the full flag-gadget circuit; each branch is a data-only
/// circuit and the prior is a separate ancilla-only circuit.
#[derive(Clone, Debug)]
pub struct BqcBranchModel {
    bqc: BqcCircuit,
    branch: CircuitModel,
    prior: Option<CircuitModel>,
}

impl BqcBranchModel {
    pub fn new(bqc: BqcCircuit) -> Result<Self> {
        let branch = CircuitModel::all_qubits(bqc.branch(0)?)?;
        let prior = match bqc.prior_circuit()? {
            Some(c) if c.param_count() > 0 => Some(CircuitModel::all_qubits(c)?),
            _ => None,
        };
        Ok(Self { bqc, branch, prior })
    }

    pub fn bqc(&self) -> &BqcCircuit {
        &self.bqc
    }

    fn parts(&self, params: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let prior = self.bqc.prior_probabilities(params)?;
        let branches = self
            .bqc
            .class_slots
            .par_iter()
            .map(|r| self.branch.distribution(&params[r.clone()]))
            .collect::<Result<Vec<_>>>()?;
        Ok((prior, branches))
    }

    /// `q(x, λ)` over data values (rows) and all ancilla values (columns).
    pub fn joint(&self, params: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (prior, branches) = self.parts(params)?;
        let mut joint = vec![vec![0.0; prior.len()]; self.num_outcomes()];
        for (lam, &w) in prior.iter().enumerate() {
            match self.bqc.spec.active.iter().position(|&a| a == lam) {
                Some(k) => joint.iter_mut().zip(&branches[k]).for_each(|(row, b)| row[lam] = w * b),
                None => joint[0][lam] = w,
            }
        }
        Ok(joint)
    }

    /// Data distribution of ancilla value `lam` (inactive values leave `|0…0⟩`).
    fn combine(&self, prior: &[f64], branches: &[Vec<f64>]) -> Vec<f64> {
        let n = self.num_outcomes();
        let mut q = vec![0.0; n];
        for (lam, &w) in prior.iter().enumerate() {
            match self.bqc.spec.active.iter().position(|&a| a == lam) {
                Some(k) => q.iter_mut().zip(&branches[k]).for_each(|(a, b)| *a += w * b),
                None => q[0] += w,
            }
        }
        q
    }
}

impl GenerativeModel for BqcBranchModel {
    fn num_params(&self) -> usize {
        self.bqc.param_count()
    }

    fn num_outcomes(&self) -> usize {
        1 << self.bqc.spec.data_qubits
    }

    fn distribution(&self, params: &[f64]) -> Result<Vec<f64>> {
        let (prior, branches) = self.parts(params)?;
        Ok(self.combine(&prior, &branches))
    }

    fn shift_terms(&self, params: &[f64]) -> Result<Vec<ShiftTerm>> {
        let (prior, branches) = self.parts(params)?;
        let base = self.combine(&prior, &branches);
        let mut terms = Vec::new();
        for (k, range) in self.bqc.class_slots.iter().enumerate() {
            let w = prior[self.bqc.spec.active[k]];
            if w == 0.0 {
                continue;
            }
            let shifted = |b: &[f64]| -> Vec<f64> {
                base.iter().zip(b).zip(&branches[k]).map(|((q, new), old)| q + w * (new - old)).collect()
            };
            for t in self.branch.shift_terms(&params[range.clone()])? {
                terms.push(ShiftTerm {
                    slot: range.start + t.slot,
                    coeff: t.coeff,
                    plus: shifted(&t.plus),
                    minus: shifted(&t.minus),
                });
            }
        }
        if let Some(prior_model) = &self.prior {
            let slots = self.bqc.prior_slots.clone();
            for t in prior_model.shift_terms(&params[slots.clone()])? {
                terms.push(ShiftTerm {
                    slot: slots.start + t.slot,
                    coeff: t.coeff,
                    plus: self.combine(&t.plus, &branches),
                    minus: self.combine(&t.minus, &branches),
                });
            }
        }
        Ok(terms)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GradientMode {
    #[default]
    Shift,
    FiniteDiff,
}

#[derive(Clone, Debug)]
pub struct GradientEval {
    /// Loss at the (possibly sampled) base distribution.
    pub loss: f64,
    pub grad: Vec<f64>,
    pub q: Vec<f64>,
}

fn rng_for(seed: u64, iteration: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration << 32 | index);
    rng
}

fn estimate(q: &[f64], shots: Shots, seed: u64, iteration: u64, index: u64) -> Vec<f64> {
    match shots {
        Shots::Exact => q.to_vec(),
        Shots::Finite(n) => {
            let mut rng = rng_for(seed, iteration, index);
            sample_counts(q, n, &mut rng).into_iter().map(|c| c as f64 / n as f64).collect()
        }
    }
}

/// Loss gradient at `params`.
///
/// With finite shots every distribution (base and each shifted one) is
/// estimated from its own sample stream derived from `(seed, iteration, index)`,
/// which keeps the MMD gradient estimate unbiased.
pub fn gradient(
    model: &dyn GenerativeModel,
    params: &[f64],
    loss: &Loss,
    mode: GradientMode,
    shots: Shots,
    seed: u64,
    iteration: u64,
) -> Result<GradientEval> {
    if params.len() != model.num_params() {
        return Err(Error::Argument(format!("expected {} parameters, got {}", model.num_params(), params.len())));
    }
    if loss.num_outcomes() != model.num_outcomes() {
        return Err(Error::Argument(format!(
            "loss over {} outcomes, model over {}",
            loss.num_outcomes(),
            model.num_outcomes()
        )));
    }
    let exact = model.distribution(params)?;
    let q = estimate(&exact, shots, seed, iteration, 0);
    let value = loss.value(&q);
    let grad = match mode {
        GradientMode::Shift => {
            let dl = loss.grad_q(&q);
            let mut grad = vec![0.0; params.len()];
            for (i, t) in model.shift_terms(params)?.iter().enumerate() {
                let plus = estimate(&t.plus, shots, seed, iteration, 1 + 2 * i as u64);
                let minus = estimate(&t.minus, shots, seed, iteration, 2 + 2 * i as u64);
                let dq: f64 = dl.iter().zip(plus.iter().zip(&minus)).map(|(g, (p, m))| g * (p - m) / 2.0).sum();
                grad[t.slot] += t.coeff * dq;
            }
            grad
        }
        GradientMode::FiniteDiff => (0..params.len())
            .into_par_iter()
            .map(|j| {
                let mut a = params.to_vec();
                let mut b = params.to_vec();
                a[j] += FD_STEP;
                b[j] -= FD_STEP;
                Ok((loss.value(&model.distribution(&a)?) - loss.value(&model.distribution(&b)?)) / (2.0 * FD_STEP))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(GradientEval { loss: value, grad, q })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub shots: Shots,
    pub seed: u64,
    pub gradient: GradientMode,
    /// Step size at iteration `t` is `learning_rate / (1 + lr_decay·t)`.
    #[serde(default)]
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, iterations: 100, shots: Shots::Exact, seed: 0, gradient: GradientMode::Shift, lr_decay: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.iterations == 0 {
            return Err(Error::Argument("iterations must be at least 1".into()));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(Error::Argument(format!("lr_decay must be nonnegative, got {}", self.lr_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    /// Loss before each update.
    pub loss: Vec<f64>,
    pub initial_params: Vec<f64>,
    pub params: Vec<f64>,
    /// Exact model distribution at the final parameters.
    pub q: Vec<f64>,
    /// Exact loss at the final parameters.
    pub final_loss: f64,
    /// Wall time; left empty unless requested so that outputs stay reproducible.
    pub seconds: Option<f64>,
}

impl TrainRun {
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.loss.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

/// Vanilla SGD on `loss` from `init`.
pub fn train(model: &dyn GenerativeModel, init: &[f64], loss: &Loss, config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let mut params = init.to_vec();
    let mut trace = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let eval = gradient(model, &params, loss, config.gradient, config.shots, config.seed, it as u64)?;
        if !eval.loss.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
            let q = model.distribution(&params).unwrap_or_default();
            let partial = TrainRun {
                config: config.clone(),
                loss: trace,
                initial_params: init.to_vec(),
                params,
                final_loss: f64::NAN,
                q,
                seconds: None,
            };
            return Err(Error::Diverged { iteration: it, partial: Box::new(partial) });
        }
        trace.push(eval.loss);
        let lr = config.learning_rate / (1.0 + config.lr_decay * it as f64);
        params.iter_mut().zip(&eval.grad).for_each(|(p, g)| *p -= lr * g);
    }
    let q = model.distribution(&params)?;
    Ok(TrainRun {
        config: config.clone(),
        loss: trace,
        initial_params: init.to_vec(),
        final_loss: loss.value(&q),
        params,
        q,
        seconds: None,
    })
}

/// MMD training of a circuit on all its qubits with the default kernel.
pub fn train_circuit(circuit: &CircuitIR, init: &[f64], target: &[f64], config: &TrainConfig) -> Result<TrainRun> {
    let model = CircuitModel::all_qubits(circuit.clone())?;
    let loss = Loss::mmd(target.to_vec(), &KernelConfig::default())?;
    train(&model, init, &loss, config)
}
