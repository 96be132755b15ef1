use lpdo_core::gates;
use lpdo_core::injectivity::{apply_kappa_isometry, check_weak_injectivity, prune_via_injectivity};
use lpdo_core::measures::fidelity_p;
use lpdo_core::oracle::{lpdo_to_dense, DenseRho};
use lpdo_core::stiefel::{
    objective_s_sr, objective_s_vn, optimize_isometry, BlockMatrix, BlockObjective, EntropyKind, OptimizerConfig,
    StiefelPoint,
};
use lpdo_core::tensor::TruncationPolicy;
use lpdo_core::LpdoChain;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn cnot_round_trip() {
    let chain = LpdoChain::optimal_lpmm(4).unwrap();
    let run = prune_via_injectivity(&chain, &[1, 2], &gates::cnot(), 1e-8).unwrap();
    assert_eq!(run.bonds_before, vec![1, 1, 1]);
    assert_eq!(run.bonds_after_unitary, vec![1, 2, 1]);
    assert_eq!(run.bonds_after, vec![1, 1, 1]);
    assert!((run.fidelity - 1.0).abs() < 1e-10);
    assert!(run.witness.residual <= 1e-10);
    let dense = lpdo_to_dense(&run.chain).unwrap();
    assert!(dense.max_abs_diff(&DenseRho::maximally_mixed(4).unwrap()) < 1e-14);
}

#[test]
fn random_unitaries_round_trip() {
    let chain = LpdoChain::optimal_lpmm(4).unwrap();
    let mixed = DenseRho::maximally_mixed(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let u = gates::random_unitary(4, &mut rng);
        let run = prune_via_injectivity(&chain, &[0, 1], &u, 1e-8).unwrap();
        assert!(run.bonds_after_unitary[0] > 1 && run.bonds_after_unitary[0] <= 4);
        assert_eq!(run.bonds_after, vec![1, 1, 1]);
        assert!((run.fidelity - 1.0).abs() < 1e-10);
        assert!(lpdo_to_dense(&run.chain).unwrap().max_abs_diff(&mixed) < 1e-13);
        let mut c = run.chain.clone();
        c.canonicalize(0).unwrap();
        let block = c.two_site_block(0).unwrap();
        let id = DMatrix::identity(4, 4);
        assert!(objective_s_sr(&block, 0, &id).unwrap().value <= 1e-9);
        assert!(objective_s_vn(&block, 0, &id).unwrap().value <= 1e-9);
    }
}

#[test]
fn identity_is_a_no_op() {
    let chain = LpdoChain::optimal_lpmm(3).unwrap();
    let run = prune_via_injectivity(&chain, &[1, 2], &gates::identity(4), 1e-8).unwrap();
    assert_eq!(run.bonds_after_unitary, vec![1, 1]);
    assert_eq!(run.bonds_after, vec![1, 1]);
    assert!(lpdo_to_dense(&run.chain).unwrap().max_abs_diff(&lpdo_to_dense(&chain).unwrap()) < 1e-15);
}

#[test]
fn undoing_with_the_wrong_isometry_leaves_the_bond_grown() {
    let mut chain = LpdoChain::optimal_lpmm(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = gates::random_unitary(4, &mut rng);
    let policy = TruncationPolicy::l2(1e-8).unwrap();
    chain.apply_unitary(&[1, 2], &u, &policy).unwrap();
    apply_kappa_isometry(&mut chain, &[1, 2], &u, &policy).unwrap();
    assert!(chain.bond_dim(1) > 1);
}

#[test]
fn random_gauge_keeps_the_state() {
    let chain = LpdoChain::optimal_lpmm(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = TruncationPolicy::l2(0.0).unwrap();
    for _ in 0..5 {
        let v = StiefelPoint::random(4, 4, &mut rng).unwrap().into_matrix();
        let mut c = chain.clone();
        apply_kappa_isometry(&mut c, &[2, 3], &v, &policy).unwrap();
        assert!((fidelity_p(&c, &chain).unwrap().fidelity - 1.0).abs() < 1e-10);
        let mut c = chain.clone();
        apply_kappa_isometry(&mut c, &[0], &gates::random_unitary(2, &mut rng), &policy).unwrap();
        assert!((fidelity_p(&c, &chain).unwrap().fidelity - 1.0).abs() < 1e-10);
    }
    let mut c = chain.clone();
    apply_kappa_isometry(&mut c, &[1, 2], &gates::identity(4), &policy).unwrap();
    assert!(lpdo_to_dense(&c).unwrap().max_abs_diff(&lpdo_to_dense(&chain).unwrap()) < 1e-15);
    assert!(apply_kappa_isometry(&mut c, &[1, 2], &gates::identity(2), &policy).is_err());
    assert!(apply_kappa_isometry(&mut c, &[0, 2], &gates::identity(4), &policy).is_err());
}

#[test]
fn witness_for_random_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for dim in [2, 4, 8] {
        let w = check_weak_injectivity(&gates::random_unitary(dim, &mut rng)).unwrap();
        assert!(w.residual <= 1e-12);
    }
}

#[test]
fn requires_the_optimal_chain() {
    let mut chain = LpdoChain::random_pure(4, 2, 1).unwrap();
    chain.depolarize_to_lpmm().unwrap();
    assert!(prune_via_injectivity(&chain, &[0, 1], &gates::cnot(), 1e-8).is_err());
    let optimal = LpdoChain::optimal_lpmm(4).unwrap();
    assert!(prune_via_injectivity(&optimal, &[0], &gates::cnot(), 1e-8).is_err());
}

#[test]
fn optimizer_finds_the_analytic_minimum() {
    let mut chain = LpdoChain::optimal_lpmm(4).unwrap();
    chain.apply_unitary(&[1, 2], &gates::cnot(), &TruncationPolicy::l2(1e-8).unwrap()).unwrap();
    let bm = BlockMatrix::from_block(&chain.two_site_block(1).unwrap(), 1).unwrap();
    for kind in [EntropyKind::SecondRenyi, EntropyKind::VonNeumann] {
        let f = BlockObjective::new(&bm, kind);
        let config = OptimizerConfig {
            n_iter: 500,
            f_tol: 0.0,
            grad_tol: 1e-10,
            random_init: Some(1),
            ..OptimizerConfig::with_objective(kind)
        };
        let res = optimize_isometry(&f, 4, &config).unwrap();
        eprintln!("{kind:?}: start {:.3e} end {:.3e} iters {} grad {:.1e}", res.trace[0], res.value(), res.iterations, res.grad_norm);
        assert!(res.value() <= 1e-6);
        assert!(res.iterations <= 500);
    }
}
