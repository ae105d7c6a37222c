use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_bqc, BqcSpec, CircuitBuilder, CircuitIR, Condition, PriorPrep};
use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::losses::{KernelConfig, Loss};
use crate::qsim::{C64, MAX_QUBITS};
use crate::train::{train, CircuitModel, TrainConfig, TrainRun};

use super::bas::initial_params;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionalMode {
    /// Load `√N_λ` directly on the data register, conditioned on the ancilla.
    #[default]
    AmplitudeEncode,
    /// Fit flag-controlled blocks to each conditional first, then freeze them.
    FittedBlocks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorExperimentSpec {
    pub data_qubits: usize,
    pub means: [f64; 2],
    /// Standard deviations.
    pub sigmas: [f64; 2],
    /// Target `(p(λ₁), p(λ₂))`.
    pub target: [f64; 2],
    pub mode: ConditionalMode,
}

impl Default for PriorExperimentSpec {
    fn default() -> Self {
        Self {
            data_qubits: 7,
            means: [16.0, 64.0],
            sigmas: [2.0, 4.0],
            target: [0.7, 0.3],
            mode: ConditionalMode::AmplitudeEncode,
        }
    }
}

/// `exp(−(x−μ)²/2σ²)` on `0..n`, normalized.
pub fn discretized_gaussian(mean: f64, sigma: f64, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|x| (-(x as f64 - mean).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

impl PriorExperimentSpec {
    pub fn with_target(p1: f64) -> Self {
        Self { target: [p1, 1.0 - p1], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_qubits == 0 || self.data_qubits + 2 > MAX_QUBITS {
            return Err(Error::Argument(format!("data qubits must be in 1..={}, got {}", MAX_QUBITS - 2, self.data_qubits)));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Argument("Gaussian means must be finite and sigmas positive".into()));
        }
        if self.target.iter().any(|p| !(0.0..=1.0).contains(p)) || (self.target[0] + self.target[1] - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("target priors {:?} must be a distribution", self.target)));
        }
        Ok(())
    }

    pub fn num_outcomes(&self) -> usize {
        1 << self.data_qubits
    }

    pub fn conditionals(&self) -> [Vec<f64>; 2] {
        let n = self.num_outcomes();
        [discretized_gaussian(self.means[0], self.sigmas[0], n), discretized_gaussian(self.means[1], self.sigmas[1], n)]
    }

    /// `Σ_λ p(λ) N_λ(x)`.
    pub fn target_distribution(&self) -> Vec<f64> {
        let [a, b] = self.conditionals();
        a.iter().zip(&b).map(|(x, y)| self.target[0] * x + self.target[1] * y).collect()
    }
}

/// Preliminary per-class fit used by [`ConditionalMode::FittedBlocks`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub blocks: usize,
    pub init_scale: f64,
    pub train: TrainConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { blocks: 7, init_scale: 0.1, train: TrainConfig { learning_rate: 2.0, iterations: 400, ..TrainConfig::default() } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub spec: PriorExperimentSpec,
    pub train: TrainConfig,
    pub restarts: usize,
    /// Initial ancilla angle range.
    pub init_range: [f64; 2],
    pub kernel: KernelConfig,
    pub fit: FitConfig,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            spec: PriorExperimentSpec::default(),
            train: TrainConfig { learning_rate: 2.0, iterations: 400, lr_decay: 0.05, ..TrainConfig::default() },
            restarts: 3,
            init_range: [PI / 6.0, 5.0 * PI / 6.0],
            kernel: KernelConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.train.validate()?;
        self.kernel.validate()?;
        if self.restarts == 0 {
            return Err(Error::Argument("restarts must be at least 1".into()));
        }
        let [lo, hi] = self.init_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Argument(format!("bad init range {:?}", self.init_range)));
        }
        if self.spec.mode == ConditionalMode::FittedBlocks {
            if self.fit.blocks == 0 {
                return Err(Error::Argument("fit blocks must be at least 1".into()));
            }
            self.fit.train.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorRestart {
    pub init_alpha: f64,
    pub alpha: f64,
    pub learned: [f64; 2],
    pub run: TrainRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorResult {
    pub restarts: Vec<PriorRestart>,
    /// Mean learned `(p(λ₁), p(λ₂))`.
    pub mean: [f64; 2],
    /// Sample variance of the learned `p(λ₁)` across restarts.
    pub variance: f64,
    /// Final MMD of each class fit, when the blocks were fitted.
    pub fit_loss: Option<[f64; 2]>,
}

fn priors(alpha: f64) -> [f64; 2] {
    let c = (alpha / 2.0).cos().powi(2);
    [c, 1.0 - c]
}

fn amplitude_encode_circuit(spec: &PriorExperimentSpec) -> Result<CircuitIR> {
    let n = spec.data_qubits;
    let anc = n;
    let data: Vec<usize> = (0..n).collect();
    let mut b = CircuitBuilder::new(n + 1);
    b.trainable(GateKind::Ry, &[anc]);
    for (value, cond) in spec.conditionals().iter().enumerate() {
        let amps = cond.iter().map(|p| C64::new(p.sqrt(), 0.0)).collect();
        b.prepare(&data, amps, Some(Condition { qubits: vec![anc], value }));
    }
    b.build()
}

/// BQC with one trainable ancilla angle and blocks fitted to each conditional, frozen.
fn fitted_circuit(spec: &PriorExperimentSpec, kernel: &KernelConfig, fit: &FitConfig) -> Result<(CircuitIR, [f64; 2])> {
    let bqc = build_bqc(&BqcSpec {
        data_qubits: spec.data_qubits,
        ancilla_qubits: 1,
        active: vec![0, 1],
        prior: PriorPrep::Trainable { blocks: 1 },
        blocks: fit.blocks,
        rotations: vec![GateKind::Cry],
        entangle: true,
    })?;
    let branch = CircuitModel::all_qubits(bqc.branch(0)?)?;
    let fits = spec
        .conditionals()
        .into_par_iter()
        .enumerate()
        .map(|(k, cond)| {
            let loss = Loss::mmd(cond, kernel)?;
            let mut cfg = fit.train.clone();
            cfg.seed = fit.train.seed.wrapping_add(k as u64);
            let init = initial_params(branch.circuit().param_count(), fit.init_scale, cfg.seed);
            train(&branch, &init, &loss, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![None; bqc.param_count()];
    for (k, run) in fits.iter().enumerate() {
        for (i, &v) in run.params.iter().enumerate() {
            values[bqc.class_slots[k].start + i] = Some(v);
        }
    }
    let (frozen, kept) = bqc.circuit.bind(&values)?;
    if kept != [0] {
        return Err(Error::Invariant(format!("expected only the ancilla slot to stay free, kept {kept:?}")));
    }
    Ok((frozen, [fits[0].final_loss, fits[1].final_loss]))
}

/// Learn the class prior of a two-class mixture through one ancilla `R_Y(α)`.
pub fn run_prior_experiment(config: &PriorConfig) -> Result<PriorResult> {
    config.validate()?;
    let spec = &config.spec;
    let (circuit, fit_loss) = match spec.mode {
        ConditionalMode::AmplitudeEncode => (amplitude_encode_circuit(spec)?, None),
        ConditionalMode::FittedBlocks => {
            let (c, l) = fitted_circuit(spec, &config.kernel, &config.fit)?;
            (c, Some(l))
        }
    };
    let model = CircuitModel::new(circuit, (0..spec.data_qubits).collect())?;
    let loss = Loss::mmd(spec.target_distribution(), &config.kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    rng.set_stream(u64::MAX);
    let [lo, hi] = config.init_range;
    let inits: Vec<f64> = (0..config.restarts).map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo }).collect();
    let restarts = inits
        .into_par_iter()
        .enumerate()
        .map(|(r, alpha0)| {
            let mut cfg = config.train.clone();
            cfg.seed = config.train.seed.wrapping_add(r as u64);
            let run = train(&model, &[alpha0], &loss, &cfg)?;
            let alpha = run.params[0];
            Ok(PriorRestart { init_alpha: alpha0, alpha, learned: priors(alpha), run })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = restarts.len() as f64;
    let m1 = restarts.iter().map(|r| r.learned[0]).sum::<f64>() / n;
    let variance = if restarts.len() > 1 {
        restarts.iter().map(|r| (r.learned[0] - m1).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PriorResult { restarts, mean: [m1, 1.0 - m1], variance, fit_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::GenerativeModel;

    #[test]
    fn conditionals_are_normalized() {
        let spec = PriorExperimentSpec::default();
        for c in spec.conditionals() {
            assert_eq!(c.len(), 128);
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let [a, b] = spec.conditionals();
        assert_eq!(a.iter().cloned().fold(0.0, f64::max), a[16]);
        assert_eq!(b.iter().cloned().fold(0.0, f64::max), b[64]);
        assert!((a[18] / a[16] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((b[68] / b[64] - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn amplitude_encoding_gives_mixture() {
        let spec = PriorExperimentSpec::default();
        let model = CircuitModel::new(amplitude_encode_circuit(&spec).unwrap(), (0..7).collect()).unwrap();
        let alpha = 1.1;
        let q = model.distribution(&[alpha]).unwrap();
        let w = priors(alpha);
        let [a, b] = spec.conditionals();
        for x in 0..128 {
            assert!((q[x] - (w[0] * a[x] + w[1] * b[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        let mut spec = PriorExperimentSpec::with_target(0.6);
        assert!(spec.validate().is_ok());
        spec.target = [0.6, 0.6];
        assert!(spec.validate().is_err());
        let config = PriorConfig { restarts: 0, ..PriorConfig::default() };
        assert!(run_prior_experiment(&config).is_err());
    }

    #[test]
    fn learns_target_exactly() {
        let config = PriorConfig::default();
        let result = run_prior_experiment(&config).unwrap();
        assert_eq!(result.restarts.len(), 3);
        for r in &result.restarts {
            assert!((r.learned[0] - 0.7).abs() < 0.01, "{:?}", r.learned);
        }
        assert!(result.variance <= 1e-6);
    }

    #[test]
    fn boundary_target_converges() {
        let mut config = PriorConfig { spec: PriorExperimentSpec::with_target(1.0), ..PriorConfig::default() };
        config.train.iterations = 1000;
        config.train.lr_decay = 0.0;
        let result = run_prior_experiment(&config).unwrap();
        assert!(result.mean[0] >= 0.999, "{:?}", result.mean);
    }
}
