use lpdo_core::gates;
use lpdo_core::measures::{fidelity_p, purity, trace};
use lpdo_core::oracle::{lpdo_to_dense, random_program, DenseRho};
use lpdo_core::tensor::TruncationPolicy;
use lpdo_core::{KrausChannel, LpdoChain, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_programs_match_dense_evolution() {
    let gate_policy = TruncationPolicy::l2(1e-14).unwrap();
    let kraus_policy = TruncationPolicy::l1(1e-14).unwrap();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let mut chain = LpdoChain::random_pure(n, 4, seed).unwrap();
        let mut rho = lpdo_to_dense(&chain).unwrap();
        for op in random_program(n, 20, &mut rng) {
            op.apply_to_chain(&mut chain, &gate_policy, &kraus_policy).unwrap();
            rho.apply(&op).unwrap();
        }
        let dense = lpdo_to_dense(&chain).unwrap();
        let diff = dense.max_abs_diff(&rho);
        assert!(diff < 1e-9, "seed {seed}: max deviation {diff}");
        assert!((trace(&chain).unwrap() - 1.0).abs() < 1e-10);
        assert!((purity(&chain).unwrap() - rho.purity()).abs() < 1e-10);
        assert!(dense.min_eigenvalue() > -1e-10);
    }
}

#[test]
fn depolarized_random_state_is_maximally_mixed() {
    for seed in 1..=3u64 {
        let mut chain = LpdoChain::random_pure(6, 8, seed).unwrap();
        let bonds = chain.bond_dims();
        chain.depolarize_to_lpmm().unwrap();
        assert_eq!(chain.bond_dims(), bonds);
        let rho = lpdo_to_dense(&chain).unwrap();
        assert!(rho.max_abs_diff(&DenseRho::maximally_mixed(6).unwrap()) < 1e-12);
        assert!((purity(&chain).unwrap() - 1.0 / 64.0).abs() < 1e-12);
        let f = fidelity_p(&chain, &LpdoChain::optimal_lpmm(6).unwrap()).unwrap();
        assert!((f.fidelity - 1.0).abs() < 1e-10);
    }
}

#[test]
fn canonicalization_is_a_gauge_move() {
    let mut chain = LpdoChain::random_pure(5, 4, 11).unwrap();
    chain.depolarize(0.3, 0.2, 1e-12).unwrap();
    let before = lpdo_to_dense(&chain).unwrap();
    for target in [0, 3, 1, 4, 2] {
        chain.canonicalize(target).unwrap();
        assert!(lpdo_to_dense(&chain).unwrap().max_abs_diff(&before) < 1e-12);
    }
    chain.recanonicalize(0).unwrap();
    assert!(lpdo_to_dense(&chain).unwrap().max_abs_diff(&before) < 1e-12);
}

#[test]
fn measures_agree_with_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut a = LpdoChain::random_pure(5, 4, 5).unwrap();
    a.depolarize(0.4, 0.1, 1e-12).unwrap();
    let mut b = LpdoChain::random_pure(5, 4, 6).unwrap();
    b.apply_channel(2, &KrausChannel::random(2, 3, &mut rng).unwrap(), &TruncationPolicy::l1(0.0).unwrap())
        .unwrap();
    let (da, db) = (lpdo_to_dense(&a).unwrap(), lpdo_to_dense(&b).unwrap());
    let f = fidelity_p(&a, &b).unwrap();
    let g = da.fidelity_p(&db);
    assert!((f.overlap - g.overlap).abs() < 1e-12);
    assert!((f.purity_f - g.purity_f).abs() < 1e-12);
    assert!((f.purity_i - g.purity_i).abs() < 1e-12);
    assert!((f.fidelity - g.fidelity).abs() < 1e-10);
}

#[test]
fn weak_symmetry_of_the_maximally_mixed_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reference = LpdoChain::optimal_lpmm(4).unwrap();
    let mut chain = reference.clone();
    let policy = TruncationPolicy::l2(1e-14).unwrap();
    for i in 0..3 {
        chain.apply_unitary(&[i, i + 1], &gates::random_unitary(4, &mut rng), &policy).unwrap();
    }
    assert!(chain.chi_max() > 1);
    let f = fidelity_p(&chain, &reference).unwrap();
    assert!((f.fidelity - 1.0).abs() < 1e-10);
}

#[test]
fn kraus_gauge_freedom_leaves_rho_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut chain = LpdoChain::random_pure(4, 4, 2).unwrap();
    chain.depolarize(0.3, 0.3, 1e-12).unwrap();
    let before = lpdo_to_dense(&chain).unwrap();
    let original = chain.clone();
    for i in 0..4 {
        let k = chain.kraus_dims()[i];
        chain.apply_kraus_isometry(i, &gates::random_unitary(k, &mut rng)).unwrap();
    }
    assert!(lpdo_to_dense(&chain).unwrap().max_abs_diff(&before) < 1e-12);
    assert!((trace(&chain).unwrap() - 1.0).abs() < 1e-10);
    assert!((purity(&chain).unwrap() - purity(&original).unwrap()).abs() < 1e-10);
    assert!((fidelity_p(&chain, &original).unwrap().fidelity - 1.0).abs() < 1e-10);
}

#[test]
fn single_site_updates() {
    let zero = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let plus = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
    let mut chain = LpdoChain::product_state(&[zero, plus]).unwrap();
    let policy = TruncationPolicy::l2(0.0).unwrap();
    chain.apply_unitary(&[0], &gates::pauli_x(), &policy).unwrap();
    let marginal = lpdo_to_dense(&chain).unwrap().partial_trace(&[0]).unwrap();
    assert!((marginal.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);

    let kraus = TruncationPolicy::l1(1e-12).unwrap();
    chain.apply_channel(1, &KrausChannel::dephasing(0.5).unwrap(), &kraus).unwrap();
    let marginal = lpdo_to_dense(&chain).unwrap().partial_trace(&[1]).unwrap();
    assert!(marginal.max_abs_diff(&DenseRho::maximally_mixed(1).unwrap()) < 1e-15);

    chain.apply_channel(0, &KrausChannel::bitflip(0.5).unwrap(), &kraus).unwrap();
    let marginal = lpdo_to_dense(&chain).unwrap().partial_trace(&[0]).unwrap();
    assert!(marginal.max_abs_diff(&DenseRho::maximally_mixed(1).unwrap()) < 1e-15);
}
