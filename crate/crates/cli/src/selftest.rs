use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqc_core::gates::{
    abc_decompose, gate_matrix, not_gate_abc, sequence_unitary, toffoli_sequence, verify_cz_identity,
    verify_h_identity, verify_t_identity, verify_z_identity, NamedGate, ABC_ORDER,
};
use pqc_core::iqp::{self, compile_iqp, verify_schedule, IqpCircuit};
use pqc_core::mps::{cnot_tensor_pair, CnotTensorPair};
use pqc_core::qsim::operator_fidelity;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed value (a fidelity, or 1/0 for exact checks).
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value >= self.threshold
    }
}

fn exact(name: &'static str, ok: bool) -> Check {
    Check { name, value: if ok { 1.0 } else { 0.0 }, threshold: 1.0 }
}

/// Gate identities, decompositions and IQP compiler invariants.
pub fn run_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut checks = vec![
        Check { name: "H = RX(pi/2) RZ(pi/2) RX(pi/2)", value: verify_h_identity(), threshold: 1.0 - 1e-12 },
        Check { name: "CZ = (I x H) CNOT (I x H)", value: verify_cz_identity(), threshold: 1.0 - 1e-12 },
        Check { name: "Z = RZ(pi)", value: verify_z_identity(), threshold: 1.0 - 1e-12 },
        Check { name: "T = RPHI(pi/4)", value: verify_t_identity(), threshold: 1.0 - 1e-12 },
        Check { name: "controlled-X from ABC", value: not_gate_abc().controlled_fidelity(ABC_ORDER), threshold: 1.0 - 1e-9 },
    ];
    let worst_abc = (0..100)
        .map(|_| {
            let [t, a, b] = [0; 3].map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            abc_decompose(t, a, b).map_or(0.0, |d| d.controlled_fidelity(ABC_ORDER))
        })
        .fold(1.0, f64::min);
    checks.push(Check { name: "controlled-W from ABC, 100 random", value: worst_abc, threshold: 1.0 - 1e-9 });
    let toffoli = gate_matrix(&NamedGate::toffoli()).expect("fixed gate");
    let net = sequence_unitary(3, &toffoli_sequence()).expect("valid sequence");
    checks.push(Check {
        name: "Toffoli from H, T, CNOT",
        value: operator_fidelity(toffoli.entries(), &net, 8),
        threshold: 1.0 - 1e-12,
    });
    checks.push(exact("CNOT tensor split recombines", cnot_tensor_pair().recombine() == CnotTensorPair::cnot_tensor()));
    let counts = [
        iqp::compile_h_layer(3).len() == 2,
        iqp::compile_t_layer(3, &[1]).is_ok_and(|s| s.len() == 2),
        iqp::compile_cnot_from_first(3, 1).is_ok_and(|s| s.len() == 4),
        iqp::compile_swap_with_first(3, 2).is_ok_and(|s| s.len() == 14),
        iqp::compile_cz(3, 0, 1).is_ok_and(|s| s.len() == 6),
        iqp::compile_cz(3, 1, 2).is_ok_and(|s| s.len() == 34),
    ];
    checks.push(exact("IQP fragment block counts", counts.iter().all(|&ok| ok)));
    let worst_iqp = (0..20)
        .map(|_| {
            let n = rng.random_range(2..=5);
            let gates = rng.random_range(0..=8);
            let circuit = IqpCircuit::random(n, gates, &mut rng);
            compile_iqp(&circuit).and_then(|s| verify_schedule(&circuit, &s)).map_or(0.0, |c| c.fidelity)
        })
        .fold(1.0, f64::min);
    checks.push(Check { name: "IQP compile, 20 random circuits", value: worst_iqp, threshold: 1.0 - 1e-9 });
    checks
}

pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:<width$}  {:.15}  (>= {:.15})\n", c.name, c.value, c.threshold));
    }
    out
}
