use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to this before taking logs.
pub const NLL_CLAMP: f64 = 1e-12;

/// Mixture of Gaussian kernels over integer-encoded outcomes, equal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidths: Vec<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { bandwidths: vec![0.25, 1.0, 4.0] }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() || self.bandwidths.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Argument("kernel bandwidths must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: usize, y: usize) -> f64 {
        let d2 = (x as f64 - y as f64).powi(2);
        self.bandwidths.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum::<f64>() / self.bandwidths.len() as f64
    }

    /// Dense kernel over outcomes `0..n`.
    pub fn matrix(&self, n: usize) -> Result<KernelMatrix> {
        self.validate()?;
        // Stationary kernel: one row of distances covers the whole matrix.
        let profile: Vec<f64> = (0..n).map(|d| self.eval(0, d)).collect();
        let k = (0..n * n).map(|i| profile[(i / n).abs_diff(i % n)]).collect();
        Ok(KernelMatrix { n, k })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    k: Vec<f64>,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.k[x * self.n + y]
    }

    /// `K · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.k.chunks(self.n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `(q−p)ᵀ K (q−p)`.
    pub fn mmd(&self, q: &[f64], p: &[f64]) -> f64 {
        let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        let kd = self.apply(&d);
        let v: f64 = d.iter().zip(&kd).map(|(a, b)| a * b).sum();
        // Clamp rounding noise without hiding NaN.
        if v < 0.0 {
            0.0
        } else {
            v
        }
    }
}

fn check_distribution(name: &str, d: &[f64]) -> Result<()> {
    let s: f64 = d.iter().sum();
    if (s - 1.0).abs() > 1e-8 || d.iter().any(|x| !x.is_finite() || *x < -1e-12) {
        return Err(Error::Argument(format!("{name} is not a probability distribution (sum {s})")));
    }
    Ok(())
}

/// Squared MMD between `q` and `p`.
pub fn mmd_loss(q: &[f64], p: &[f64], kernel: &KernelConfig) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Argument(format!("outcome spaces differ: {} vs {}", q.len(), p.len())));
    }
    check_distribution("q", q)?;
    check_distribution("p", p)?;
    Ok(kernel.matrix(q.len())?.mmd(q, p))
}

/// Mean of `−ln q(x)` over `dataset`.
pub fn nll_loss(q: &[f64], dataset: &[usize]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    if let Some(x) = dataset.iter().find(|&&x| x >= q.len()) {
        return Err(Error::Argument(format!("dataset outcome {x} outside {} outcomes", q.len())));
    }
    Ok(dataset.iter().map(|&x| -q[x].max(NLL_CLAMP).ln()).sum::<f64>() / dataset.len() as f64)
}

/// Loss over the model distribution with its derivative in `q`.
#[derive(Clone, Debug)]
pub enum Loss {
    Mmd { target: Vec<f64>, kernel: KernelMatrix },
    Nll { counts: Vec<f64>, size: f64 },
}

impl Loss {
    pub fn mmd(target: Vec<f64>, kernel: &KernelConfig) -> Result<Self> {
        check_distribution("target", &target)?;
        let kernel = kernel.matrix(target.len())?;
        Ok(Loss::Mmd { target, kernel })
    }

    pub fn nll(dataset: &[usize], num_outcomes: usize) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Argument("dataset is empty".into()));
        }
        let mut counts = vec![0.0; num_outcomes];
        for &x in dataset {
            *counts
                .get_mut(x)
                .ok_or_else(|| Error::Argument(format!("dataset outcome {x} outside {num_outcomes} outcomes")))? += 1.0;
        }
        Ok(Loss::Nll { counts, size: dataset.len() as f64 })
    }

    pub fn num_outcomes(&self) -> usize {
        match self {
            Loss::Mmd { target, .. } => target.len(),
            Loss::Nll { counts, .. } => counts.len(),
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        match self {
            Loss::Mmd { target, kernel } => kernel.mmd(q, target),
            Loss::Nll { counts, size } => {
                counts.iter().zip(q).filter(|(c, _)| **c > 0.0).map(|(c, x)| -c * x.max(NLL_CLAMP).ln()).sum::<f64>() / size
            }
        }
    }

    /// `∂L/∂q`.
    pub fn grad_q(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Loss::Mmd { target, kernel } => {
                let d: Vec<f64> = q.iter().zip(target).map(|(a, b)| a - b).collect();
                kernel.apply(&d).into_iter().map(|v| 2.0 * v).collect()
            }
            Loss::Nll { counts, size } => {
                counts.iter().zip(q).map(|(c, x)| if *c > 0.0 { -c / (size * x.max(NLL_CLAMP)) } else { 0.0 }).collect()
            }
        }
    }
}
