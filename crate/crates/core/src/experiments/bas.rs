use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_bqc, BqcSpec};
use crate::error::{Error, Result};
use crate::losses::{KernelConfig, Loss};
use crate::qsim::{bitstring, sample_counts, Shots};
use crate::train::{train, BqcBranchModel, GenerativeModel, TrainConfig, TrainRun};

/// Bars-and-stripes images on an `rows × cols` grid.
///
/// Pixel `(r, c)` is qubit `r·cols + c`; qubit 0 is the most significant bit
/// of the basis index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasDataset {
    pub rows: usize,
    pub cols: usize,
    /// Basis indices of the valid images, ascending.
    pub images: Vec<usize>,
}

fn pixel_bit(rows: usize, cols: usize, r: usize, c: usize) -> usize {
    rows * cols - 1 - (r * cols + c)
}

/// All row-constant and column-constant images, each listed once.
pub fn generate_bas(rows: usize, cols: usize) -> Result<BasDataset> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    if rows * cols > 30 {
        return Err(Error::Argument(format!("{rows}x{cols} grid too large")));
    }
    let mut set = BTreeSet::new();
    for pattern in 0..1usize << rows {
        let mut x = 0;
        for r in (0..rows).filter(|r| pattern >> r & 1 == 1) {
            for c in 0..cols {
                x |= 1 << pixel_bit(rows, cols, r, c);
            }
        }
        set.insert(x);
    }
    for pattern in 0..1usize << cols {
        let mut x = 0;
        for c in (0..cols).filter(|c| pattern >> c & 1 == 1) {
            for r in 0..rows {
                x |= 1 << pixel_bit(rows, cols, r, c);
            }
        }
        set.insert(x);
    }
    Ok(BasDataset { rows, cols, images: set.into_iter().collect() })
}

impl BasDataset {
    pub fn count(&self) -> usize {
        self.images.len()
    }

    pub fn num_pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, x: usize) -> bool {
        self.images.binary_search(&x).is_ok()
    }

    /// Uniform over the images, zero elsewhere.
    pub fn target_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.num_pixels()];
        let w = 1.0 / self.count() as f64;
        for &x in &self.images {
            p[x] = w;
        }
        p
    }

    /// Text rendering, one line per row, `#` for a set pixel.
    pub fn render(&self, x: usize) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if x >> pixel_bit(self.rows, self.cols, r, c) & 1 == 1 { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageProbability {
    pub index: usize,
    pub bits: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Probability mass on valid images.
    pub accuracy: f64,
    pub images: Vec<ImageProbability>,
    pub shots: Shots,
}

/// Accuracy of `q` on `data`: exact mass, or the fraction of `shots` samples that are valid images.
pub fn accuracy_report(data: &BasDataset, q: &[f64], shots: Shots, seed: u64) -> Result<AccuracyReport> {
    if q.len() != 1 << data.num_pixels() {
        return Err(Error::SizeMismatch(format!("expected {} probabilities, got {}", 1usize << data.num_pixels(), q.len())));
    }
    let freq: Vec<f64> = match shots {
        Shots::Exact => q.to_vec(),
        Shots::Finite(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - 1);
            sample_counts(q, n, &mut rng).into_iter().map(|c| c as f64 / n as f64).collect()
        }
    };
    let images: Vec<ImageProbability> = data
        .images
        .iter()
        .map(|&x| ImageProbability { index: x, bits: bitstring(x, data.num_pixels()), probability: freq[x] })
        .collect();
    Ok(AccuracyReport { accuracy: images.iter().map(|i| i.probability).sum(), images, shots })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasConfig {
    pub rows: usize,
    pub cols: usize,
    /// Conditional blocks per class.
    pub blocks: usize,
    /// Initial angles are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub kernel: KernelConfig,
    pub train: TrainConfig,
}

impl BasConfig {
    /// Tuned defaults for a `rows × cols` grid.
    pub fn new(rows: usize, cols: usize) -> Self {
        // Each class sees the loss through a 1/N_BAS prior weight, so the step grows with the image count.
        let (learning_rate, iterations, init_scale) =
            if rows * cols <= 4 { (50.0, 1000, 1.0) } else { (600.0, 1000, std::f64::consts::PI) };
        let train = TrainConfig { learning_rate, iterations, ..TrainConfig::default() };
        Self { rows, cols, blocks: 2, init_scale, kernel: KernelConfig::default(), train }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::Argument("blocks must be at least 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Argument(format!("init_scale must be nonnegative, got {}", self.init_scale)));
        }
        self.kernel.validate()?;
        self.train.validate()
    }
}

/// Smallest `M` with `2^M ≥ count`.
pub fn ancillas_for(count: usize) -> usize {
    count.next_power_of_two().trailing_zeros() as usize
}

/// BQC spec for a dataset: one active ancilla value per image, uniform fixed prior.
pub fn bas_spec(data: &BasDataset, blocks: usize) -> BqcSpec {
    BqcSpec::uniform(data.num_pixels(), ancillas_for(data.count()), (0..data.count()).collect(), blocks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasResult {
    pub dataset: BasDataset,
    pub spec: BqcSpec,
    pub run: TrainRun,
    pub report: AccuracyReport,
    /// Exact `q(x, λ)` at the final parameters; rows are the dataset images, columns all ancilla values.
    pub joint: Vec<Vec<f64>>,
}

impl BasResult {
    /// Ancilla value carrying the most joint mass for each image.
    pub fn assignment(&self) -> Vec<usize> {
        self.joint
            .iter()
            .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
            .collect()
    }

    /// Whether every image is claimed by a different ancilla value.
    pub fn is_one_to_one(&self) -> bool {
        let a = self.assignment();
        a.iter().collect::<BTreeSet<_>>().len() == a.len()
    }
}

/// Seeded uniform initial angles.
pub fn initial_params(count: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (0..count).map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 }).collect()
}

/// Train a BQC with a uniform prior over one class per image and report its accuracy.
pub fn run_bas_experiment(config: &BasConfig) -> Result<BasResult> {
    config.validate()?;
    let dataset = generate_bas(config.rows, config.cols)?;
    let spec = bas_spec(&dataset, config.blocks);
    let model = BqcBranchModel::new(build_bqc(&spec)?)?;
    let loss = Loss::mmd(dataset.target_distribution(), &config.kernel)?;
    let init = initial_params(model.num_params(), config.init_scale, config.train.seed);
    let run = train(&model, &init, &loss, &config.train)?;
    let report = accuracy_report(&dataset, &run.q, config.train.shots, config.train.seed)?;
    let full = model.joint(&run.params)?;
    let joint = dataset.images.iter().map(|&x| full[x].clone()).collect();
    Ok(BasResult { dataset, spec, run, report, joint })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(rows: usize, cols: usize) -> Vec<usize> {
        let bit = |x: usize, r: usize, c: usize| x >> pixel_bit(rows, cols, r, c) & 1;
        (0..1usize << (rows * cols))
            .filter(|&x| {
                let rows_const = (0..rows).all(|r| (0..cols).all(|c| bit(x, r, c) == bit(x, r, 0)));
                let cols_const = (0..cols).all(|c| (0..rows).all(|r| bit(x, r, c) == bit(x, 0, c)));
                rows_const || cols_const
            })
            .collect()
    }

    #[test]
    fn counts_and_members() {
        assert_eq!(generate_bas(2, 2).unwrap().count(), 6);
        assert_eq!(generate_bas(3, 3).unwrap().count(), 14);
        for n in 1..=4 {
            for m in 1..=4 {
                let d = generate_bas(n, m).unwrap();
                assert_eq!(d.images, brute_force(n, m), "{n}x{m}");
                if n > 1 || m > 1 {
                    assert_eq!(d.count(), (1 << n) + (1 << m) - 2);
                }
            }
        }
        assert!(generate_bas(0, 2).is_err());
    }

    #[test]
    fn pixel_order_is_row_major() {
        let d = generate_bas(2, 2).unwrap();
        assert_eq!(d.images, vec![0b0000, 0b0011, 0b0101, 0b1010, 0b1100, 0b1111]);
        assert_eq!(d.render(0b1100), "##\n..\n");
        assert_eq!(d.render(0b1010), "#.\n#.\n");
        let p = d.target_distribution();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[0b0110], 0.0);
    }

    #[test]
    fn ancilla_sizes() {
        assert_eq!(ancillas_for(6), 3);
        assert_eq!(ancillas_for(14), 4);
        assert_eq!(ancillas_for(8), 3);
        let spec = bas_spec(&generate_bas(2, 2).unwrap(), 2);
        assert_eq!(build_bqc(&spec).unwrap().param_count(), 48);
    }

    #[test]
    fn zero_angle_baseline() {
        let data = generate_bas(2, 2).unwrap();
        let model = BqcBranchModel::new(build_bqc(&bas_spec(&data, 2)).unwrap()).unwrap();
        let q = model.distribution(&vec![0.0; model.num_params()]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-12);
        let report = accuracy_report(&data, &q, Shots::Exact, 0).unwrap();
        assert!((report.accuracy - 1.0).abs() < 1e-12);
        let mmd = crate::losses::mmd_loss(&q, &data.target_distribution(), &KernelConfig::default()).unwrap();
        assert!(mmd > 0.1, "{mmd}");
    }

    #[test]
    fn exact_accuracy_is_valid_mass() {
        let data = generate_bas(2, 2).unwrap();
        let q: Vec<f64> = (0..16).map(|i| (i + 1) as f64 / 136.0).collect();
        let want: f64 = data.images.iter().map(|&x| q[x]).sum();
        let report = accuracy_report(&data, &q, Shots::Exact, 0).unwrap();
        assert!((report.accuracy - want).abs() < 1e-12);
        let sampled = accuracy_report(&data, &q, Shots::Finite(10_000), 3).unwrap();
        assert!((sampled.accuracy - want).abs() < 0.03);
    }
}
