//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis index, so with two qubits
//! `|10⟩` lives at index 2. The same ordering is used by every serialized
//! format in this crate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest register the dense simulator accepts (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

const UNITARY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

/// Square unitary acting on 1, 2 or 3 qubits, stored row-major.
///
/// Row/column index bit `k-1-p` corresponds to the `p`-th target passed to
/// [`StateVector::apply`], i.e. the first target is the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix {
    arity: usize,
    entries: Vec<C64>,
}

impl GateMatrix {
    /// Build a gate from row-major entries, rejecting non-unitary input.
    pub fn new(arity: usize, entries: Vec<C64>) -> Result<Self> {
        let gate = Self::from_entries(arity, entries)?;
        let err = gate.unitarity_error();
        if !(err <= UNITARY_TOL) {
            return Err(Error::Validation(format!(
                "gate is not unitary (max |G†G - I| = {err:.3e})"
            )));
        }
        Ok(gate)
    }

    fn from_entries(arity: usize, entries: Vec<C64>) -> Result<Self> {
        if !(1..=3).contains(&arity) {
            return Err(Error::Validation(format!("gate arity {arity} not in 1..=3")));
        }
        let dim = 1usize << arity;
        if entries.len() != dim * dim {
            return Err(Error::Validation(format!(
                "expected {} entries for arity {arity}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { arity, entries })
    }

    /// Entries produced by closed-form gate definitions; unitarity holds by construction.
    pub(crate) fn trusted(arity: usize, entries: Vec<C64>) -> Self {
        debug_assert_eq!(entries.len(), 1 << (2 * arity));
        Self { arity, entries }
    }

    pub fn identity(arity: usize) -> Self {
        let dim = 1usize << arity;
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self::trusted(arity, entries)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim() + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                out[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Self::trusted(self.arity, out)
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.arity, rhs.arity, "arity mismatch in matmul");
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    out[r * d + c] += a * rhs.entries[k * d + c];
                }
            }
        }
        Self::trusted(self.arity, out)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::trusted(self.arity, self.entries.iter().map(|e| e * factor).collect())
    }

    /// Largest elementwise deviation of `G†G` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += self.entries[k * d + r].conj() * self.entries[k * d + c];
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    /// Largest elementwise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Phase-insensitive operator fidelity `|Tr(U†V)| / d` between equal-sized unitaries.
pub fn operator_fidelity(u: &[C64], v: &[C64], dim: usize) -> f64 {
    assert_eq!(u.len(), dim * dim);
    assert_eq!(v.len(), dim * dim);
    let tr: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    (tr.norm() / dim as f64).min(1.0)
}

/// Number of measurement repetitions, or the exact (infinite-shot) regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Exact,
}

impl Shots {
    pub fn is_exact(&self) -> bool {
        matches!(self, Shots::Exact)
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Exact => f.write_str("inf"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Shots::Exact);
        }
        let n: u64 = t
            .parse()
            .map_err(|_| Error::Argument(format!("shots must be a positive integer or \"inf\", got {s:?}")))?;
        if n == 0 {
            return Err(Error::Argument("shots must be at least 1".into()));
        }
        Ok(Shots::Finite(n))
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => s.serialize_u64(*n),
            Shots::Exact => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(0) => Err(serde::de::Error::custom("shots must be at least 1")),
            Raw::Num(n) => Ok(Shots::Finite(n)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Outcome of [`StateVector::sample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Bitstring (qubit 0 first) to count. Empty in exact mode.
    pub counts: BTreeMap<String, u64>,
    pub shots: Shots,
    /// Exact probabilities in exact mode, empirical frequencies otherwise.
    pub probabilities: Vec<f64>,
}

/// Render basis index `index` of a `width`-bit register, most significant bit first.
pub fn bitstring(index: usize, width: usize) -> String {
    (0..width)
        .map(|p| if (index >> (width - 1 - p)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Draw `shots` i.i.d. outcomes from `probs`, returning per-outcome counts.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; probs.len()];
    if probs.is_empty() || total <= 0.0 {
        return counts;
    }
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// Dense register of `2^num_qubits` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(num_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::QubitIndex(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        s.amps[0] = C64::new(0.0, 0.0);
        s.amps[index] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Wrap explicit amplitudes; the length must be a power of two and the norm 1.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::SizeMismatch(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubit_count(num_qubits)?;
        let s = Self { num_qubits, amps };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!("state norm {norm} differs from 1")));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.num_qubits {
                return Err(Error::QubitIndex(format!(
                    "target {t} out of range for {} qubits",
                    self.num_qubits
                )));
            }
            if targets[..i].contains(&t) {
                return Err(Error::QubitIndex(format!("duplicate target {t}")));
            }
        }
        Ok(())
    }

    /// Apply `gate` to `targets` (first target = most significant gate index bit).
    pub fn apply(&mut self, gate: &GateMatrix, targets: &[usize]) -> Result<()> {
        if targets.len() != gate.arity() {
            return Err(Error::QubitIndex(format!(
                "gate of arity {} given {} targets",
                gate.arity(),
                targets.len()
            )));
        }
        self.check_targets(targets)?;
        if gate.arity() == 1 {
            self.apply_single(gate, targets[0]);
        } else {
            self.apply_multi(gate, targets);
        }
        Ok(())
    }

    fn apply_single(&mut self, gate: &GateMatrix, target: usize) {
        let bit = self.bit(target);
        let [g00, g01, g10, g11] = [gate.entries[0], gate.entries[1], gate.entries[2], gate.entries[3]];
        // Blocks of 2*bit amplitudes: first half has the target bit clear.
        for chunk in self.amps.chunks_mut(bit << 1) {
            let (lo, hi) = chunk.split_at_mut(bit);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = g00 * x0 + g01 * x1;
                *a1 = g10 * x0 + g11 * x1;
            }
        }
    }

    fn apply_multi(&mut self, gate: &GateMatrix, targets: &[usize]) {
        let k = targets.len();
        let d = 1usize << k;
        let bits: Vec<usize> = targets.iter().map(|&t| self.bit(t)).collect();
        let offsets: Vec<usize> = (0..d)
            .map(|j| {
                (0..k)
                    .filter(|&p| (j >> (k - 1 - p)) & 1 == 1)
                    .map(|p| bits[p])
                    .sum()
            })
            .collect();
        let mask: usize = bits.iter().sum();
        let mut buf = vec![C64::new(0.0, 0.0); d];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for j in 0..d {
                buf[j] = self.amps[base + offsets[j]];
            }
            for r in 0..d {
                let row = &gate.entries[r * d..(r + 1) * d];
                let acc: C64 = row.iter().zip(&buf).map(|(g, x)| g * x).sum();
                self.amps[base + offsets[r]] = acc;
            }
        }
    }

    /// Load `amplitudes` into the register `targets`, which must currently be
    /// `|0…0⟩` on every branch selected by `condition`.
    ///
    /// `condition = Some((qubits, value))` restricts the preparation to basis
    /// states whose `qubits` read `value` (first qubit most significant); other
    /// branches are untouched. The map is an isometry on the selected subspace.
    pub fn prepare_register(
        &mut self,
        targets: &[usize],
        amplitudes: &[C64],
        condition: Option<(&[usize], usize)>,
    ) -> Result<()> {
        self.check_targets(targets)?;
        if amplitudes.len() != 1 << targets.len() {
            return Err(Error::SizeMismatch(format!(
                "{} amplitudes for a {}-qubit register",
                amplitudes.len(),
                targets.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!("prepared amplitudes have norm {norm}")));
        }
        let (cond_mask, cond_value) = match condition {
            Some((qubits, value)) => {
                self.check_targets(qubits)?;
                if qubits.iter().any(|q| targets.contains(q)) {
                    return Err(Error::QubitIndex("condition overlaps prepared register".into()));
                }
                if value >= 1 << qubits.len() {
                    return Err(Error::Argument(format!("condition value {value} too wide")));
                }
                let mut mask = 0;
                let mut want = 0;
                for (p, &q) in qubits.iter().enumerate() {
                    mask |= self.bit(q);
                    if (value >> (qubits.len() - 1 - p)) & 1 == 1 {
                        want |= self.bit(q);
                    }
                }
                (mask, want)
            }
            None => (0, 0),
        };
        let k = targets.len();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|j| {
                (0..k)
                    .filter(|&p| (j >> (k - 1 - p)) & 1 == 1)
                    .map(|p| self.bit(targets[p]))
                    .sum()
            })
            .collect();
        let mask: usize = targets.iter().map(|&t| self.bit(t)).sum();
        for base in 0..self.amps.len() {
            if base & mask != 0 || base & cond_mask != cond_value {
                continue;
            }
            if offsets[1..].iter().any(|&o| self.amps[base + o].norm() > 1e-12) {
                return Err(Error::Validation(
                    "prepared register is not in |0…0⟩ on a selected branch".into(),
                ));
            }
            let a = self.amps[base];
            for (j, &o) in offsets.iter().enumerate() {
                self.amps[base + o] = a * amplitudes[j];
            }
        }
        Ok(())
    }

    /// `|amplitude_i|²` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Marginal distribution of `qubits`, indexed with the first listed qubit most significant.
    pub fn marginal(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.check_targets(qubits)?;
        let k = qubits.len();
        let bits: Vec<usize> = qubits.iter().map(|&q| self.bit(q)).collect();
        let mut out = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let mut idx = 0;
            for &b in &bits {
                idx = (idx << 1) | usize::from(i & b != 0);
            }
            out[idx] += a.norm_sqr();
        }
        Ok(out)
    }

    /// Probability that `qubit` reads 1.
    pub fn excitation(&self, qubit: usize) -> Result<f64> {
        Ok(self.marginal(&[qubit])?[1])
    }

    /// Measure every qubit in the computational basis.
    ///
    /// Finite shots are drawn i.i.d. from [`Self::probabilities`] with a
    /// ChaCha8 stream seeded by `seed`; exact mode returns the probabilities.
    pub fn sample(&self, shots: Shots, seed: u64) -> Result<MeasurementRecord> {
        let probs = self.probabilities();
        match shots {
            Shots::Exact => Ok(MeasurementRecord { counts: BTreeMap::new(), shots, probabilities: probs }),
            Shots::Finite(0) => Err(Error::Argument("shots must be at least 1".into())),
            Shots::Finite(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let counts = sample_counts(&probs, n, &mut rng);
                let probabilities = counts.iter().map(|&c| c as f64 / n as f64).collect();
                let counts = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(i, &c)| (bitstring(i, self.num_qubits), c))
                    .collect();
                Ok(MeasurementRecord { counts, shots, probabilities })
            }
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::SizeMismatch(format!(
                "{} vs {} qubits",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|`, equal to 1 iff the states agree up to a global phase.
    pub fn fidelity_up_to_phase(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm().min(1.0))
    }

    /// Copy of `other` rotated by the global phase that aligns it with `self`
    /// at `self`'s largest-magnitude amplitude.
    pub fn align_phase(&self, other: &Self) -> Result<Self> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::SizeMismatch(format!(
                "{} vs {} qubits",
                self.num_qubits, other.num_qubits
            )));
        }
        let (idx, _) = self
            .amps
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, a)| if a.norm() > best.1 { (i, a.norm()) } else { best });
        let mut out = other.clone();
        let ratio = self.amps[idx] * other.amps[idx].conj();
        if ratio.norm() > 0.0 {
            let phase = ratio / ratio.norm();
            out.amps.iter_mut().for_each(|a| *a *= phase);
        }
        Ok(out)
    }

    /// Amplitudes as `[re, im]` pairs in basis-index order (debug dump format).
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amps.iter().map(|a| [a.re, a.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        Self::from_amplitudes(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())
    }
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount { count: n, max: MAX_QUBITS });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hadamard() -> GateMatrix {
        let h = FRAC_1_SQRT_2;
        GateMatrix::new(1, vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]).unwrap()
    }

    fn cnot() -> GateMatrix {
        let o = c(1., 0.);
        let z = c(0., 0.);
        GateMatrix::new(2, vec![o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z]).unwrap()
    }

    #[test]
    fn zero_state_examples() {
        assert_eq!(StateVector::zero(1).unwrap().amplitudes(), &[c(1., 0.), c(0., 0.)]);
        assert_eq!(StateVector::zero(2).unwrap().probabilities(), vec![1., 0., 0., 0.]);
        assert!((StateVector::zero(13).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::zero(16).is_ok());
    }

    #[test]
    fn zero_state_rejects_bad_sizes() {
        assert!(matches!(StateVector::zero(0), Err(Error::QubitCount { .. })));
        assert!(matches!(StateVector::zero(MAX_QUBITS + 1), Err(Error::QubitCount { .. })));
    }

    #[test]
    fn hadamard_and_cnot() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&hadamard(), &[0]).unwrap();
        for a in s.amplitudes() {
            assert!((a - c(FRAC_1_SQRT_2, 0.)).norm() < 1e-15);
        }

        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply(&cnot(), &[0, 1]).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());

        // Reversed targets: qubit 1 controls qubit 0.
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply(&cnot(), &[1, 0]).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());
    }

    #[test]
    fn target_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply(&cnot(), &[0, 0]), Err(Error::QubitIndex(_))));
        assert!(matches!(s.apply(&cnot(), &[0, 2]), Err(Error::QubitIndex(_))));
        assert!(matches!(s.apply(&hadamard(), &[0, 1]), Err(Error::QubitIndex(_))));
    }

    #[test]
    fn non_unitary_gate_rejected() {
        let err = GateMatrix::new(1, vec![c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn uniform_probabilities() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&hadamard(), &[0]).unwrap();
        s.apply(&hadamard(), &[1]).unwrap();
        for p in s.probabilities() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_examples() {
        let s = StateVector::zero(1).unwrap();
        let rec = s.sample(Shots::Finite(100), 3).unwrap();
        assert_eq!(rec.counts.get("0"), Some(&100));
        assert_eq!(rec.counts.len(), 1);

        let mut h = StateVector::zero(1).unwrap();
        h.apply(&hadamard(), &[0]).unwrap();
        let rec = h.sample(Shots::Exact, 0).unwrap();
        assert!((rec.probabilities[0] - 0.5).abs() < 1e-15);
        assert_eq!(rec.shots, Shots::Exact);

        let rec = h.sample(Shots::Finite(1_000_000), 7).unwrap();
        let f0 = rec.counts["0"] as f64 / 1e6;
        assert!((0.497..=0.503).contains(&f0), "{f0}");
        assert_eq!(rec.counts.values().sum::<u64>(), 1_000_000);

        assert!(matches!(h.sample(Shots::Finite(0), 1), Err(Error::Argument(_))));
    }

    #[test]
    fn shots_parse_and_serde() {
        assert_eq!("inf".parse::<Shots>().unwrap(), Shots::Exact);
        assert_eq!("100".parse::<Shots>().unwrap(), Shots::Finite(100));
        assert!("0".parse::<Shots>().is_err());
        assert_eq!(serde_json::to_string(&Shots::Exact).unwrap(), "\"inf\"");
        assert_eq!(serde_json::from_str::<Shots>("1000").unwrap(), Shots::Finite(1000));
        assert!(serde_json::from_str::<Shots>("0").is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::zero(1).unwrap();
        let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_3);
        let rotated = StateVector::from_amplitudes(vec![phase, c(0., 0.)]).unwrap();
        assert!((zero.fidelity_up_to_phase(&rotated).unwrap() - 1.0).abs() < 1e-15);

        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(zero.fidelity_up_to_phase(&one).unwrap(), 0.0);

        let mut h = zero.clone();
        h.apply(&hadamard(), &[0]).unwrap();
        assert!((h.fidelity_up_to_phase(&zero).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);

        assert!(matches!(
            zero.fidelity_up_to_phase(&StateVector::zero(2).unwrap()),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn align_phase_recovers_state() {
        let a = StateVector::from_amplitudes(vec![c(0.6, 0.), c(0., 0.8)]).unwrap();
        let phase = C64::from_polar(1.0, 1.234);
        let b = StateVector::from_amplitudes(a.amplitudes().iter().map(|x| x * phase).collect()).unwrap();
        let aligned = a.align_phase(&b).unwrap();
        for (x, y) in a.amplitudes().iter().zip(aligned.amplitudes()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn conditional_prepare() {
        // Ancilla qubit 0 in |+⟩, prepare qubit 1 in |1⟩ only on the ancilla=1 branch.
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&hadamard(), &[0]).unwrap();
        s.prepare_register(&[1], &[c(0., 0.), c(1., 0.)], Some((&[0], 1))).unwrap();
        let p = s.probabilities();
        assert!((p[0b00] - 0.5).abs() < 1e-15);
        assert!((p[0b11] - 0.5).abs() < 1e-15);
        // Register no longer clean on that branch.
        assert!(s.prepare_register(&[1], &[c(1., 0.), c(0., 0.)], Some((&[0], 1))).is_err());
    }

    #[test]
    fn marginal_orders_by_listed_qubits() {
        let s = StateVector::basis(3, 0b100).unwrap();
        assert_eq!(s.marginal(&[0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(s.marginal(&[2, 0]).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn pair_dump_round_trip() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&hadamard(), &[1]).unwrap();
        let back = StateVector::from_pairs(&s.to_pairs()).unwrap();
        assert_eq!(s, back);
    }
}
