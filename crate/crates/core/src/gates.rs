//! Named gates and the decomposition identities built on them.
//!
//! Rotation conventions (note the signs, which differ from the usual
//! `e^{-iθP/2}` form for X, Y and Z):
//!
//! ```text
//! R_φ(φ) = diag(1, e^{iφ})
//! R_X(γ) = [[cos γ/2,  i sin γ/2], [i sin γ/2, cos γ/2]]
//! R_Y(α) = [[cos α/2,    sin α/2], [-sin α/2,  cos α/2]]
//! R_Z(θ) = diag(e^{iθ/2}, e^{-iθ/2})
//! ```
//!
//! Because of these signs most "gate X equals product Y" statements only hold
//! up to a global phase, so every identity check here is phase-insensitive.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitIR;
use crate::error::{Error, Result};
use crate::qsim::{operator_fidelity, GateMatrix, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rphi,
    Rx,
    Ry,
    Rz,
    H,
    T,
    Z,
    X,
    Cnot,
    Cz,
    Swap,
    Toffoli,
    Crx,
    Cry,
    Crz,
    Crphi,
}

impl GateKind {
    pub const ALL: [GateKind; 16] = [
        GateKind::Rphi,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::H,
        GateKind::T,
        GateKind::Z,
        GateKind::X,
        GateKind::Cnot,
        GateKind::Cz,
        GateKind::Swap,
        GateKind::Toffoli,
        GateKind::Crx,
        GateKind::Cry,
        GateKind::Crz,
        GateKind::Crphi,
    ];

    pub fn arity(self) -> usize {
        use GateKind::*;
        match self {
            Rphi | Rx | Ry | Rz | H | T | Z | X => 1,
            Cnot | Cz | Swap | Crx | Cry | Crz | Crphi => 2,
            Toffoli => 3,
        }
    }

    /// Kinds that carry an angle.
    pub fn is_rotation(self) -> bool {
        self.is_plain_rotation() || self.is_controlled_rotation()
    }

    pub fn is_plain_rotation(self) -> bool {
        matches!(self, GateKind::Rphi | GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn is_controlled_rotation(self) -> bool {
        matches!(self, GateKind::Crphi | GateKind::Crx | GateKind::Cry | GateKind::Crz)
    }

    /// `CRY → RY` and so on.
    pub fn base_rotation(self) -> Option<GateKind> {
        match self {
            GateKind::Crphi => Some(GateKind::Rphi),
            GateKind::Crx => Some(GateKind::Rx),
            GateKind::Cry => Some(GateKind::Ry),
            GateKind::Crz => Some(GateKind::Rz),
            _ => None,
        }
    }

    /// `RY → CRY` and so on.
    pub fn controlled(self) -> Option<GateKind> {
        match self {
            GateKind::Rphi => Some(GateKind::Crphi),
            GateKind::Rx => Some(GateKind::Crx),
            GateKind::Ry => Some(GateKind::Cry),
            GateKind::Rz => Some(GateKind::Crz),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        use GateKind::*;
        match self {
            Rphi => "RPHI",
            Rx => "RX",
            Ry => "RY",
            Rz => "RZ",
            H => "H",
            T => "T",
            Z => "Z",
            X => "X",
            Cnot => "CNOT",
            Cz => "CZ",
            Swap => "SWAP",
            Toffoli => "TOFFOLI",
            Crx => "CRX",
            Cry => "CRY",
            Crz => "CRZ",
            Crphi => "CRPHI",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate kind together with its angle (rotations only).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedGate {
    pub kind: GateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl NamedGate {
    pub fn new(kind: GateKind, angle: Option<f64>) -> Result<Self> {
        match (kind.is_rotation(), angle) {
            (true, None) => Err(Error::Argument(format!("{kind} requires an angle"))),
            (false, Some(_)) => Err(Error::Argument(format!("{kind} takes no angle"))),
            (true, Some(a)) if !a.is_finite() => {
                Err(Error::Argument(format!("{kind} angle must be finite, got {a}")))
            }
            _ => Ok(Self { kind, angle }),
        }
    }

    /// A rotation gate; the angle is checked when the matrix is built.
    pub fn rotation(kind: GateKind, angle: f64) -> Self {
        debug_assert!(kind.is_rotation());
        Self { kind, angle: Some(angle) }
    }

    /// A fixed (angle-free) gate.
    pub fn fixed(kind: GateKind) -> Self {
        debug_assert!(!kind.is_rotation());
        Self { kind, angle: None }
    }

    pub fn rx(a: f64) -> Self {
        Self::rotation(GateKind::Rx, a)
    }
    pub fn ry(a: f64) -> Self {
        Self::rotation(GateKind::Ry, a)
    }
    pub fn rz(a: f64) -> Self {
        Self::rotation(GateKind::Rz, a)
    }
    pub fn rphi(a: f64) -> Self {
        Self::rotation(GateKind::Rphi, a)
    }
    pub fn h() -> Self {
        Self::fixed(GateKind::H)
    }
    pub fn t() -> Self {
        Self::fixed(GateKind::T)
    }
    pub fn x() -> Self {
        Self::fixed(GateKind::X)
    }
    pub fn z() -> Self {
        Self::fixed(GateKind::Z)
    }
    pub fn cnot() -> Self {
        Self::fixed(GateKind::Cnot)
    }
    pub fn cz() -> Self {
        Self::fixed(GateKind::Cz)
    }
    pub fn swap() -> Self {
        Self::fixed(GateKind::Swap)
    }
    pub fn toffoli() -> Self {
        Self::fixed(GateKind::Toffoli)
    }

    pub fn matrix(&self) -> Result<GateMatrix> {
        gate_matrix(self)
    }
}

impl fmt::Display for NamedGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.angle {
            Some(a) => write!(f, "{}({a})", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn rotation_2x2(kind: GateKind, a: f64) -> [C64; 4] {
    let (s, co) = (a / 2.0).sin_cos();
    match kind {
        GateKind::Rphi => [c(1., 0.), c(0., 0.), c(0., 0.), C64::from_polar(1.0, a)],
        GateKind::Rx => [c(co, 0.), c(0., s), c(0., s), c(co, 0.)],
        GateKind::Ry => [c(co, 0.), c(s, 0.), c(-s, 0.), c(co, 0.)],
        GateKind::Rz => [C64::from_polar(1.0, a / 2.0), c(0., 0.), c(0., 0.), C64::from_polar(1.0, -a / 2.0)],
        _ => unreachable!("{kind} is not a single-qubit rotation"),
    }
}

fn controlled_4x4(u: [C64; 4]) -> Vec<C64> {
    let mut m = vec![c(0., 0.); 16];
    m[0] = c(1., 0.);
    m[5] = c(1., 0.);
    m[2 * 4 + 2] = u[0];
    m[2 * 4 + 3] = u[1];
    m[3 * 4 + 2] = u[2];
    m[3 * 4 + 3] = u[3];
    m
}

fn permutation(dim: usize, map: impl Fn(usize) -> usize) -> Vec<C64> {
    let mut m = vec![c(0., 0.); dim * dim];
    for col in 0..dim {
        m[map(col) * dim + col] = c(1., 0.);
    }
    m
}

/// Exact matrix of `g`. Controlled kinds use the first target as control.
pub fn gate_matrix(g: &NamedGate) -> Result<GateMatrix> {
    use GateKind::*;
    let angle = || -> Result<f64> {
        match g.angle {
            Some(a) if a.is_finite() => Ok(a),
            Some(a) => Err(Error::Argument(format!("{} angle must be finite, got {a}", g.kind))),
            None => Err(Error::Argument(format!("{} requires an angle", g.kind))),
        }
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = match g.kind {
        Rphi | Rx | Ry | Rz => GateMatrix::trusted(1, rotation_2x2(g.kind, angle()?).to_vec()),
        Crphi | Crx | Cry | Crz => {
            let base = g.kind.base_rotation().expect("controlled rotation");
            GateMatrix::trusted(2, controlled_4x4(rotation_2x2(base, angle()?)))
        }
        H => GateMatrix::trusted(1, vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)]),
        T => GateMatrix::trusted(1, vec![c(1., 0.), c(0., 0.), c(0., 0.), C64::from_polar(1.0, FRAC_PI_4)]),
        Z => GateMatrix::trusted(1, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
        X => GateMatrix::trusted(1, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        Cnot => GateMatrix::trusted(2, permutation(4, |i| if i >= 2 { i ^ 1 } else { i })),
        Cz => {
            let mut m = permutation(4, |i| i);
            m[15] = c(-1., 0.);
            GateMatrix::trusted(2, m)
        }
        Swap => GateMatrix::trusted(2, permutation(4, |i| ((i & 1) << 1) | (i >> 1))),
        Toffoli => GateMatrix::trusted(3, permutation(8, |i| if i >= 6 { i ^ 1 } else { i })),
    };
    if g.kind.is_rotation() != g.angle.is_some() {
        return Err(Error::Argument(format!("{} takes no angle", g.kind)));
    }
    Ok(m)
}

/// A gate list in time order: `(gate, targets)`.
pub type GateSeq = Vec<(NamedGate, Vec<usize>)>;

/// Dense `2^n × 2^n` unitary (row-major) of a gate sequence, built column by column.
pub fn sequence_unitary(num_qubits: usize, seq: &[(NamedGate, Vec<usize>)]) -> Result<Vec<C64>> {
    let dim = 1usize << num_qubits;
    let gates: Vec<GateMatrix> = seq.iter().map(|(g, _)| g.matrix()).collect::<Result<_>>()?;
    let mut out = vec![c(0., 0.); dim * dim];
    for col in 0..dim {
        let mut s = StateVector::basis(num_qubits, col)?;
        for (m, (_, t)) in gates.iter().zip(seq) {
            s.apply(m, t)?;
        }
        for (row, a) in s.amplitudes().iter().enumerate() {
            out[row * dim + col] = *a;
        }
    }
    Ok(out)
}

fn matrix_fidelity(a: &GateMatrix, b: &GateMatrix) -> f64 {
    operator_fidelity(a.entries(), b.entries(), a.dim())
}

/// Fidelity between `H` and `R_X(π/2) R_Z(θ) R_X(π/2)`; equals 1 at θ = π/2.
pub fn verify_h_identity_with(rz_angle: f64) -> f64 {
    let rx = gate_matrix(&NamedGate::rx(FRAC_PI_2)).expect("finite");
    let rz = gate_matrix(&NamedGate::rz(rz_angle)).expect("finite rz angle");
    let product = rx.matmul(&rz).matmul(&rx);
    matrix_fidelity(&gate_matrix(&NamedGate::h()).expect("fixed"), &product)
}

/// `H = R_X(π/2) R_Z(π/2) R_X(π/2)` up to phase (the product is exactly `i·H`).
pub fn verify_h_identity() -> f64 {
    verify_h_identity_with(FRAC_PI_2)
}

/// `CZ = (I⊗H) CNOT (I⊗H)`.
pub fn verify_cz_identity() -> f64 {
    let seq = vec![
        (NamedGate::h(), vec![1]),
        (NamedGate::cnot(), vec![0, 1]),
        (NamedGate::h(), vec![1]),
    ];
    let u = sequence_unitary(2, &seq).expect("valid sequence");
    let cz = gate_matrix(&NamedGate::cz()).expect("fixed");
    operator_fidelity(cz.entries(), &u, 4)
}

/// `Z = R_Z(π)` up to the global phase `i`.
pub fn verify_z_identity() -> f64 {
    matrix_fidelity(
        &gate_matrix(&NamedGate::z()).expect("fixed"),
        &gate_matrix(&NamedGate::rz(PI)).expect("finite"),
    )
}

/// `T = R_φ(π/4)` exactly.
pub fn verify_t_identity() -> f64 {
    matrix_fidelity(
        &gate_matrix(&NamedGate::t()).expect("fixed"),
        &gate_matrix(&NamedGate::rphi(FRAC_PI_4)).expect("finite"),
    )
}

/// Which of A or C is applied first when assembling the controlled circuit
/// `A · CNOT · B · CNOT · C` (read as gates in time).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbcOrder {
    /// Time order `C, CNOT, B, CNOT, A`, i.e. the matrix product `A X B X C`.
    CFirst,
    /// Time order `A, CNOT, B, CNOT, C`.
    AFirst,
}

/// The order that reproduces controlled-W under this crate's rotation
/// conventions. Pinned by `abc_order_is_unique` in the tests.
pub const ABC_ORDER: AbcOrder = AbcOrder::CFirst;

/// Controlled-W network for `W = e^{iδ} R_Z(θ) R_Y(α) R_Z(β)`.
///
/// `A = R_Z(θ) R_Y(α/2)`, `B = R_Y(-α/2) R_Z(-(θ+β)/2)`, `C = R_Z((β-θ)/2)`,
/// with `ABC = I` and `A X B X C = R_Z(θ) R_Y(α) R_Z(β)`. A nonzero `δ` is
/// realized as `R_φ(δ)` on the control.
#[derive(Clone, Debug, PartialEq)]
pub struct AbcDecomposition {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phase: f64,
    /// Gate lists in time order.
    pub a: Vec<NamedGate>,
    pub b: Vec<NamedGate>,
    pub c: Vec<NamedGate>,
    /// Phase-insensitive fidelity of the assembled circuit against controlled-W.
    pub fidelity: f64,
}

impl AbcDecomposition {
    fn assemble(phase: f64, theta: f64, alpha: f64, beta: f64) -> Self {
        Self {
            theta,
            alpha,
            beta,
            phase,
            a: vec![NamedGate::ry(alpha / 2.0), NamedGate::rz(theta)],
            b: vec![NamedGate::rz(-(theta + beta) / 2.0), NamedGate::ry(-alpha / 2.0)],
            c: vec![NamedGate::rz((beta - theta) / 2.0)],
            fidelity: f64::NAN,
        }
    }

    /// The single-qubit target `W`.
    pub fn target(&self) -> GateMatrix {
        let rz = |a| gate_matrix(&NamedGate::rz(a)).expect("finite");
        let ry = gate_matrix(&NamedGate::ry(self.alpha)).expect("finite");
        rz(self.theta)
            .matmul(&ry)
            .matmul(&rz(self.beta))
            .scale(C64::from_polar(1.0, self.phase))
    }

    /// Two-qubit network (control 0, target 1) in the given order.
    pub fn controlled_circuit(&self, order: AbcOrder) -> GateSeq {
        let (first, last) = match order {
            AbcOrder::CFirst => (&self.c, &self.a),
            AbcOrder::AFirst => (&self.a, &self.c),
        };
        let on_target = |gs: &[NamedGate]| gs.iter().map(|g| (*g, vec![1])).collect::<GateSeq>();
        let mut seq = on_target(first);
        seq.push((NamedGate::cnot(), vec![0, 1]));
        seq.extend(on_target(&self.b));
        seq.push((NamedGate::cnot(), vec![0, 1]));
        seq.extend(on_target(last));
        if self.phase != 0.0 {
            seq.push((NamedGate::rphi(self.phase), vec![0]));
        }
        seq
    }

    /// Fidelity of [`Self::controlled_circuit`] against controlled-W.
    pub fn controlled_fidelity(&self, order: AbcOrder) -> f64 {
        let w = self.target();
        let mut cw = vec![c(0., 0.); 16];
        cw[0] = c(1., 0.);
        cw[5] = c(1., 0.);
        for r in 0..2 {
            for col in 0..2 {
                cw[(2 + r) * 4 + 2 + col] = w.get(r, col);
            }
        }
        let u = sequence_unitary(2, &self.controlled_circuit(order)).expect("valid sequence");
        operator_fidelity(&cw, &u, 4)
    }
}

/// Decompose controlled-`R_Z(θ) R_Y(α) R_Z(β)` and verify the result.
pub fn abc_decompose(theta: f64, alpha: f64, beta: f64) -> Result<AbcDecomposition> {
    abc_decompose_with_phase(0.0, theta, alpha, beta)
}

/// Decompose controlled-`e^{iδ} R_Z(θ) R_Y(α) R_Z(β)` and verify the result.
pub fn abc_decompose_with_phase(phase: f64, theta: f64, alpha: f64, beta: f64) -> Result<AbcDecomposition> {
    if ![phase, theta, alpha, beta].iter().all(|a| a.is_finite()) {
        return Err(Error::Argument("decomposition angles must be finite".into()));
    }
    let mut d = AbcDecomposition::assemble(phase, theta, alpha, beta);
    d.fidelity = d.controlled_fidelity(ABC_ORDER);
    if d.fidelity < 1.0 - 1e-9 {
        return Err(Error::Construction { fidelity: d.fidelity });
    }
    Ok(d)
}

/// Controlled-X as an ABC network: `X = e^{-iπ/2} R_Z(0) R_Y(π) R_Z(-π)`, so
/// `A = R_Y(π/2)`, `B = R_Y(-π/2) R_Z(π/2)`, `C = R_Z(-π/2)` and a control
/// phase `R_φ(-π/2)`.
pub fn not_gate_abc() -> AbcDecomposition {
    abc_decompose_with_phase(-FRAC_PI_2, 0.0, PI, -PI).expect("controlled-X decomposition")
}

/// Toffoli (controls 0, 1; target 2) from H, T, T† and six CNOTs.
pub fn toffoli_sequence() -> GateSeq {
    let tdg = NamedGate::rphi(-FRAC_PI_4);
    let t = NamedGate::t();
    vec![
        (NamedGate::h(), vec![2]),
        (NamedGate::cnot(), vec![1, 2]),
        (tdg, vec![2]),
        (NamedGate::cnot(), vec![0, 2]),
        (t, vec![2]),
        (NamedGate::cnot(), vec![1, 2]),
        (tdg, vec![2]),
        (NamedGate::cnot(), vec![0, 2]),
        (t, vec![1]),
        (t, vec![2]),
        (NamedGate::h(), vec![2]),
        (NamedGate::cnot(), vec![0, 1]),
        (t, vec![0]),
        (tdg, vec![1]),
        (NamedGate::cnot(), vec![0, 1]),
    ]
}

/// [`toffoli_sequence`] as a three-qubit circuit.
pub fn toffoli_circuit() -> CircuitIR {
    CircuitIR::from_sequence(3, &toffoli_sequence()).expect("valid toffoli network")
}
