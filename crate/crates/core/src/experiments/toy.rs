use serde::{Deserialize, Serialize};

use crate::circuit::{build_toy_thm3, build_tpqc, TpqcLayout, TpqcSpec};
use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::losses::{KernelConfig, Loss};
use crate::qsim::bitstring;
use crate::train::{train, CircuitModel, GenerativeModel, TrainConfig};

use super::bas::initial_params;

/// Outcome of fitting the toy target with a nearest-neighbour chain circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainFit {
    pub params: usize,
    pub iterations: usize,
    /// Probability of the target outcome at the final parameters.
    pub probability: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub num_qubits: usize,
    pub target: String,
    /// Probability of the target under the two-gate circuit.
    pub probability: f64,
    /// Outcomes with nonzero probability.
    pub support: usize,
    pub x_gates: usize,
    pub cnot_gates: usize,
    pub chain_fit: ChainFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub num_qubits: usize,
    pub init_scale: f64,
    /// Budget for the chain fit.
    pub train: TrainConfig,
}

impl ToyConfig {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, init_scale: 0.5, train: TrainConfig { learning_rate: 0.5, iterations: 40, ..TrainConfig::default() } }
    }
}

/// Basis index of `1 0…0 1`.
pub fn toy_target(num_qubits: usize) -> usize {
    (1 << (num_qubits - 1)) | 1
}

/// Prepare `1 0…0 1` with one X and one CNOT, then fit the same target with an MPS-chain circuit.
pub fn run_thm3_toy(config: &ToyConfig) -> Result<ToyReport> {
    let n = config.num_qubits;
    let circuit = build_toy_thm3(n)?;
    let q = circuit.run(&[], None)?.probabilities();
    let target = toy_target(n);
    if q[target] != 1.0 {
        return Err(Error::Invariant(format!("toy circuit gives p = {} on the target", q[target])));
    }
    let chain = build_tpqc(&TpqcSpec { template: vec![GateKind::Ry], ..TpqcSpec::new(n, TpqcLayout::MpsChain) })?;
    let model = CircuitModel::all_qubits(chain)?;
    let mut p = vec![0.0; 1 << n];
    p[target] = 1.0;
    let loss = Loss::mmd(p, &KernelConfig::default())?;
    let init = initial_params(model.num_params(), config.init_scale, config.train.seed);
    let run = train(&model, &init, &loss, &config.train)?;
    Ok(ToyReport {
        num_qubits: n,
        target: bitstring(target, n),
        probability: q[target],
        support: q.iter().filter(|&&v| v != 0.0).count(),
        x_gates: circuit.count_kind(GateKind::X),
        cnot_gates: circuit.count_kind(GateKind::Cnot),
        chain_fit: ChainFit {
            params: model.num_params(),
            iterations: config.train.iterations,
            probability: run.q[target],
            final_loss: run.final_loss,
        },
    })
}
