//! Matrix product state execution of circuits.
//!
//! Site `i` holds `A^0, A^1`, each `D_{i-1} × D_i`; qubit 0 is the leftmost
//! site and the most significant bit of dense indices. The state is kept in
//! mixed canonical form around `center`: sites left of it are left-isometric,
//! sites right of it right-isometric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitIR, Op};
use crate::error::{Error, Result};
use crate::gates::{GateKind, NamedGate};
use crate::qsim::{GateMatrix, StateVector, C64};

/// Singular values below this are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-13;
/// Schmidt values below this are dropped from entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Two rank-3 tensors whose contraction over `b` is the CNOT tensor.
///
/// `w1[b][σ'][σ]` acts on the control, `w2[b][τ'][τ]` on the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnotTensorPair {
    pub w1: [[[i8; 2]; 2]; 2],
    pub w2: [[[i8; 2]; 2]; 2],
}

pub fn cnot_tensor_pair() -> CnotTensorPair {
    CnotTensorPair {
        w1: [[[1, 0], [0, 0]], [[1, 0], [0, 1]]],
        w2: [[[1, -1], [-1, 1]], [[0, 1], [1, 0]]],
    }
}

impl CnotTensorPair {
    /// `O[σ'][τ'][σ][τ] = Σ_b w1[b][σ'][σ]·w2[b][τ'][τ]`.
    pub fn recombine(&self) -> [[[[i32; 2]; 2]; 2]; 2] {
        let mut o = [[[[0; 2]; 2]; 2]; 2];
        for b in 0..2 {
            for sp in 0..2 {
                for tp in 0..2 {
                    for s in 0..2 {
                        for t in 0..2 {
                            o[sp][tp][s][t] += self.w1[b][sp][s] as i32 * self.w2[b][tp][t] as i32;
                        }
                    }
                }
            }
        }
        o
    }

    /// Four-index tensor of the CNOT matrix.
    pub fn cnot_tensor() -> [[[[i32; 2]; 2]; 2]; 2] {
        let mut o = [[[[0; 2]; 2]; 2]; 2];
        for s in 0..2 {
            for t in 0..2 {
                o[s][t ^ s][s][t] = 1;
            }
        }
        o
    }
}

#[derive(Clone, Debug)]
pub struct MpsState {
    sites: Vec<[DMatrix<C64>; 2]>,
    max_bond: Option<usize>,
    center: usize,
    discarded: f64,
}

impl MpsState {
    pub fn from_zero(num_qubits: usize, max_bond: Option<usize>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::QubitCount { count: 0, max: usize::MAX });
        }
        if max_bond == Some(0) {
            return Err(Error::Argument("max_bond must be at least 1".into()));
        }
        let site = [DMatrix::from_element(1, 1, c(1.0)), DMatrix::zeros(1, 1)];
        Ok(Self { sites: vec![site; num_qubits], max_bond, center: 0, discarded: 0.0 })
    }

    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn max_bond(&self) -> Option<usize> {
        self.max_bond
    }

    /// Bond dimension at every cut `c` (between sites `c` and `c+1`).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|s| s[0].ncols()).collect()
    }

    pub fn site_shape(&self, i: usize) -> (usize, usize) {
        self.sites[i][0].shape()
    }

    /// Total weight discarded by truncation so far.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    pub fn norm(&self) -> f64 {
        let s = &self.sites[self.center];
        (s[0].norm_squared() + s[1].norm_squared()).sqrt()
    }

    pub fn apply_single(&mut self, gate: &GateMatrix, site: usize) -> Result<()> {
        self.check_site(site)?;
        if gate.arity() != 1 {
            return Err(Error::Argument("expected a one-qubit gate".into()));
        }
        let [a0, a1] = &self.sites[site];
        let n0 = a0 * gate.get(0, 0) + a1 * gate.get(0, 1);
        let n1 = a0 * gate.get(1, 0) + a1 * gate.get(1, 1);
        self.sites[site] = [n0, n1];
        Ok(())
    }

    /// Apply a two-qubit gate on adjacent sites; returns the weight discarded.
    ///
    /// `targets[0]` is the more significant index of `gate`.
    pub fn apply_two(&mut self, gate: &GateMatrix, targets: [usize; 2]) -> Result<f64> {
        let [a, b] = targets;
        self.check_site(a)?;
        self.check_site(b)?;
        if gate.arity() != 2 {
            return Err(Error::Argument("expected a two-qubit gate".into()));
        }
        if a.abs_diff(b) != 1 {
            return Err(Error::NonAdjacent(a, b));
        }
        let left = a.min(b);
        let g = |r: usize, col: usize| {
            if a < b {
                gate.get(r, col)
            } else {
                let sw = |i: usize| (i & 1) << 1 | i >> 1;
                gate.get(sw(r), sw(col))
            }
        };
        self.move_center(left);
        let theta = self.merge(left);
        let dl = self.sites[left][0].nrows();
        let dr = self.sites[left + 1][0].ncols();
        let mut out = DMatrix::zeros(2 * dl, 2 * dr);
        for l in 0..dl {
            for r in 0..dr {
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        let mut acc = c(0.0);
                        for t1 in 0..2 {
                            for t2 in 0..2 {
                                acc += g(s1 * 2 + s2, t1 * 2 + t2) * theta[(l * 2 + t1, t2 * dr + r)];
                            }
                        }
                        out[(l * 2 + s1, s2 * dr + r)] = acc;
                    }
                }
            }
        }
        self.split(left, out)
    }

    /// CNOT on adjacent sites through the two-tensor MPO, then SVD recompression.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<f64> {
        self.check_site(control)?;
        self.check_site(target)?;
        if control.abs_diff(target) != 1 {
            return Err(Error::NonAdjacent(control, target));
        }
        let pair = cnot_tensor_pair();
        let left = control.min(target);
        self.move_center(left);
        let (lw, rw) = if control < target { (pair.w1, pair.w2) } else { (pair.w2, pair.w1) };
        // Site tensors with the MPO bond b fused into the shared bond as (m, b).
        let grow = |site: &[DMatrix<C64>; 2], w: &[[[i8; 2]; 2]; 2], on_right: bool| -> [DMatrix<C64>; 2] {
            let (rows, cols) = site[0].shape();
            std::array::from_fn(|sp| {
                let mut m = if on_right { DMatrix::zeros(rows * 2, cols) } else { DMatrix::zeros(rows, cols * 2) };
                for b in 0..2 {
                    for s in 0..2 {
                        let wv = w[b][sp][s];
                        if wv == 0 {
                            continue;
                        }
                        for i in 0..rows {
                            for j in 0..cols {
                                let v = site[s][(i, j)] * c(wv as f64);
                                if on_right {
                                    m[(i * 2 + b, j)] += v;
                                } else {
                                    m[(i, j * 2 + b)] += v;
                                }
                            }
                        }
                    }
                }
                m
            })
        };
        let l = grow(&self.sites[left], &lw, false);
        let r = grow(&self.sites[left + 1], &rw, true);
        self.sites[left] = l;
        self.sites[left + 1] = r;
        let theta = self.merge(left);
        self.split(left, theta)
    }

    /// Schmidt coefficients at `cut`, largest first.
    pub fn schmidt_values(&mut self, cut: usize) -> Result<Vec<f64>> {
        if cut + 1 >= self.num_qubits() {
            return Err(Error::Argument(format!("cut {cut} out of range for {} sites", self.num_qubits())));
        }
        self.move_center(cut);
        let m = self.left_matrix(cut);
        let (_, mut s, _) = thin_svd(&m)?;
        s.retain(|v| *v > SVD_CUTOFF);
        Ok(s)
    }

    /// Von Neumann entropy in nats across `cut`.
    pub fn entanglement_entropy(&self, cut: usize) -> Result<f64> {
        let norm = self.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Validation(format!("state norm {norm} is not 1")));
        }
        Ok(entropy_of(&self.clone().schmidt_values(cut)?))
    }

    /// Dense amplitudes, qubit 0 most significant.
    pub fn to_dense(&self) -> Result<StateVector> {
        let mut psi = DMatrix::from_element(1, 1, c(1.0));
        for site in &self.sites {
            let rows = psi.nrows();
            let cols = site[0].ncols();
            let mut next = DMatrix::zeros(rows * 2, cols);
            for s in 0..2 {
                let part = &psi * &site[s];
                for p in 0..rows {
                    next.row_mut(p * 2 + s).copy_from(&part.row(p));
                }
            }
            psi = next;
        }
        StateVector::from_amplitudes(psi.column(0).iter().copied().collect())
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.num_qubits() {
            return Err(Error::QubitIndex(format!("site {i} out of range for {} sites", self.num_qubits())));
        }
        Ok(())
    }

    /// Rows `(l, s)`, columns `r`.
    fn left_matrix(&self, i: usize) -> DMatrix<C64> {
        let [a0, a1] = &self.sites[i];
        let (dl, dr) = a0.shape();
        DMatrix::from_fn(dl * 2, dr, |row, col| if row % 2 == 0 { a0[(row / 2, col)] } else { a1[(row / 2, col)] })
    }

    /// Rows `l`, columns `(s, r)`.
    fn right_matrix(&self, i: usize) -> DMatrix<C64> {
        let [a0, a1] = &self.sites[i];
        let (dl, dr) = a0.shape();
        DMatrix::from_fn(dl, 2 * dr, |row, col| if col < dr { a0[(row, col)] } else { a1[(row, col - dr)] })
    }

    fn move_center(&mut self, to: usize) {
        while self.center < to {
            let i = self.center;
            let qr = self.left_matrix(i).qr();
            let (q, r) = (qr.q(), qr.r());
            self.sites[i] = std::array::from_fn(|s| DMatrix::from_fn(q.nrows() / 2, q.ncols(), |l, k| q[(l * 2 + s, k)]));
            self.sites[i + 1] = std::array::from_fn(|s| &r * &self.sites[i + 1][s]);
            self.center += 1;
        }
        while self.center > to {
            let i = self.center;
            let dr = self.sites[i][0].ncols();
            let qr = self.right_matrix(i).adjoint().qr();
            let (q, r) = (qr.q().adjoint(), qr.r().adjoint());
            self.sites[i] = std::array::from_fn(|s| DMatrix::from_fn(q.nrows(), dr, |k, col| q[(k, s * dr + col)]));
            self.sites[i - 1] = std::array::from_fn(|s| &self.sites[i - 1][s] * &r);
            self.center -= 1;
        }
    }

    /// `Θ[(l, s1), (s2, r)]` of sites `i, i+1`.
    fn merge(&self, i: usize) -> DMatrix<C64> {
        let dl = self.sites[i][0].nrows();
        let dr = self.sites[i + 1][0].ncols();
        let mut theta = DMatrix::zeros(2 * dl, 2 * dr);
        for s1 in 0..2 {
            for s2 in 0..2 {
                let block = &self.sites[i][s1] * &self.sites[i + 1][s2];
                for l in 0..dl {
                    for r in 0..dr {
                        theta[(l * 2 + s1, s2 * dr + r)] = block[(l, r)];
                    }
                }
            }
        }
        theta
    }

    /// SVD-split `theta` back into sites `i, i+1`, truncating; center moves to `i+1`.
    fn split(&mut self, i: usize, theta: DMatrix<C64>) -> Result<f64> {
        let dl = theta.nrows() / 2;
        let dr = theta.ncols() / 2;
        let (u, sv, vt) = thin_svd(&theta)?;
        let total: f64 = sv.iter().map(|s| s * s).sum();
        let mut keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > SVD_CUTOFF).collect();
        if keep.is_empty() {
            keep.push(0);
        }
        if let Some(cap) = self.max_bond {
            keep.truncate(cap);
        }
        let kept: f64 = keep.iter().map(|&k| sv[k].powi(2)).sum();
        let discarded = ((total - kept) / total).max(0.0);
        let scale = 1.0 / kept.sqrt() * total.sqrt();
        let d = keep.len();
        self.sites[i] = std::array::from_fn(|s| DMatrix::from_fn(dl, d, |l, k| u[(l * 2 + s, keep[k])]));
        self.sites[i + 1] = std::array::from_fn(|s| {
            DMatrix::from_fn(d, dr, |k, r| vt[(keep[k], s * dr + r)] * c(sv[keep[k]] * scale))
        });
        self.center = i + 1;
        self.discarded += discarded;
        Ok(discarded)
    }
}

/// Thin SVD `m = U·diag(s)·Vᴴ` with `s` nonincreasing; returns `(U, s, Vᴴ)`.
fn thin_svd(m: &DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let a = faer::Mat::<C64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = a.thin_svd().map_err(|e| Error::Invariant(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector().iter().map(|x| x.re).collect();
    let u = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]);
    let vt = DMatrix::from_fn(v.ncols(), v.nrows(), |i, j| v[(j, i)].conj());
    Ok((u, s, vt))
}

/// `−Σ p ln p` over `p = s²`, dropping `s < 1e-12`.
pub fn entropy_of(schmidt: &[f64]) -> f64 {
    schmidt
        .iter()
        .filter(|s| **s >= ENTROPY_CUTOFF)
        .map(|s| {
            let p = s * s;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
        + 0.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MpsOptions {
    /// Truncation cap; `None` keeps every nonzero singular value.
    pub max_bond: Option<usize>,
    /// Abort with a resource error once any bond exceeds this.
    pub hard_cap: Option<usize>,
}

/// State after one logical two-qubit op, at one cut it crosses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub gate: String,
    pub cut: usize,
    pub bond_dim: usize,
    pub entropy: f64,
    pub discarded_weight: f64,
    /// Two-qubit gates crossing this cut so far (SWAP counts twice).
    pub crossings: usize,
    pub max_bond_dim: usize,
    pub half_chain_entropy: f64,
}

pub const TRACE_CSV_HEADER: &str = "step,gate,cut,bond_dim,entropy,discarded_weight";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.gate, r.cut, r.bond_dim, r.entropy, r.discarded_weight
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct MpsRun {
    pub state: MpsState,
    pub trace: Vec<TraceRow>,
    /// Final count of two-qubit gates crossing each cut.
    pub crossings: Vec<usize>,
}

impl MpsRun {
    /// Entropy at each cut within `ln 2 · min(crossings, smaller side)`.
    pub fn entropy_bound_violations(&self, tol: f64) -> Vec<usize> {
        let n = self.state.num_qubits();
        (0..n.saturating_sub(1))
            .filter(|&cut| {
                let side = (cut + 1).min(n - cut - 1);
                let bound = std::f64::consts::LN_2 * self.crossings[cut].min(side) as f64;
                self.state.entanglement_entropy(cut).map_or(true, |s| s > bound + tol)
            })
            .collect()
    }
}

fn crossing_weight(kind: GateKind) -> usize {
    if kind == GateKind::Swap {
        2
    } else {
        1
    }
}

/// Execute `circuit`, routing long-range two-qubit gates with SWAPs.
pub fn run_circuit_mps(circuit: &CircuitIR, params: &[f64], options: MpsOptions) -> Result<MpsRun> {
    circuit.check_params(params)?;
    let n = circuit.num_qubits();
    let mut state = MpsState::from_zero(n, options.max_bond)?;
    let mut trace = Vec::new();
    let mut crossings = vec![0usize; n.saturating_sub(1)];
    let swap = NamedGate::swap().matrix()?;
    for (step, op) in circuit.ops().iter().enumerate() {
        let gate = match op {
            Op::Prepare { .. } => return Err(Error::Unsupported("PREP ops have no MPS execution".into())),
            Op::Gate { .. } => op.resolve(params).expect("gate op"),
        };
        let targets = op.targets();
        match targets.len() {
            1 => state.apply_single(&gate.matrix()?, targets[0])?,
            2 => {
                let (a, b) = (targets[0], targets[1]);
                let mut discarded = 0.0;
                // Walk `a` next to `b`, apply, walk back.
                let path: Vec<usize> = if a < b { (a..b - 1).collect() } else { (b + 2..=a).rev().collect() };
                for &p in &path {
                    let pair = if a < b { [p, p + 1] } else { [p - 1, p] };
                    discarded += state.apply_two(&swap, pair)?;
                }
                let moved = if a < b { b - 1 } else { b + 1 };
                discarded += if gate.kind == GateKind::Cnot {
                    state.apply_cnot(moved, b)?
                } else {
                    state.apply_two(&gate.matrix()?, [moved, b])?
                };
                for &p in path.iter().rev() {
                    let pair = if a < b { [p, p + 1] } else { [p - 1, p] };
                    discarded += state.apply_two(&swap, pair)?;
                }
                let bonds = state.bond_dims();
                let max_bond_dim = bonds.iter().copied().max().unwrap_or(1);
                if let Some(cap) = options.hard_cap {
                    if max_bond_dim > cap {
                        return Err(Error::BondOverflow { step, bond: max_bond_dim, cap });
                    }
                }
                let half_chain_entropy = if n >= 2 { entropy_of(&state.schmidt_values(n / 2 - 1)?) } else { 0.0 };
                for cut in a.min(b)..a.max(b) {
                    crossings[cut] += crossing_weight(gate.kind);
                    let entropy = entropy_of(&state.schmidt_values(cut)?);
                    trace.push(TraceRow {
                        step,
                        gate: gate.kind.name().to_string(),
                        cut,
                        bond_dim: bonds[cut],
                        entropy,
                        discarded_weight: discarded,
                        crossings: crossings[cut],
                        max_bond_dim,
                        half_chain_entropy,
                    });
                }
            }
            k => return Err(Error::Unsupported(format!("{k}-qubit gate {} in MPS execution", gate.kind))),
        }
    }
    Ok(MpsRun { state, trace, crossings })
}
