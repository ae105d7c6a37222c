use pqc_core::iqp::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_iqp_circuits_compile_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.random_range(2..=6);
        let gates = rng.random_range(0..=10);
        let iqp = IqpCircuit::random(n, gates, &mut rng);
        let schedule = compile_iqp(&iqp).unwrap();
        assert_eq!(schedule.len(), block_count(&iqp), "case {case}");
        assert!(schedule.len() <= block_budget(&iqp));
        let check = verify_schedule(&iqp, &schedule).unwrap();
        assert!(check.fidelity >= 1.0 - 1e-9, "case {case}: fidelity {}", check.fidelity);
        assert!(check.max_prob_diff <= 1e-10, "case {case}: {}", check.max_prob_diff);
    }
}

#[test]
fn fragment_sizes() {
    assert_eq!(compile_h_layer(3).len(), H_BLOCKS);
    assert_eq!(compile_t_layer(3, &[0, 2]).unwrap().len(), T_BLOCKS);
    assert_eq!(compile_cnot_from_first(3, 2).unwrap().len(), CNOT_BLOCKS);
    assert_eq!(compile_swap_with_first(3, 1).unwrap().len(), SWAP_BLOCKS);
    assert_eq!(compile_cz(3, 0, 2).unwrap().len(), CZ_FIRST_BLOCKS);
    assert_eq!(compile_cz(3, 1, 2).unwrap().len(), CZ_GENERAL_BLOCKS);
    assert_eq!((H_BLOCKS, T_BLOCKS, CNOT_BLOCKS, SWAP_BLOCKS, CZ_FIRST_BLOCKS, CZ_GENERAL_BLOCKS), (2, 2, 4, 14, 6, 34));
}

#[test]
fn single_cz_on_two_qubits() {
    let iqp = IqpCircuit::new(2, vec![IqpLayer { t: vec![], cz: vec![(0, 1)] }]).unwrap();
    let schedule = compile_iqp(&iqp).unwrap();
    assert_eq!(schedule.len(), 10);
    assert!(verify_schedule(&iqp, &schedule).unwrap().fidelity >= 1.0 - 1e-9);
}
