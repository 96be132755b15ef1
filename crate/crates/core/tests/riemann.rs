use lpdo_core::oracle::{lpdo_to_dense, DenseRho};
use lpdo_core::prune::{run_truncation_schedule, FidelityTracking, SweepOptions};
use lpdo_core::stiefel::{
    fd_gradient, optimize_bond, riemann_sweep, BlockMatrix, BlockObjective, EntropyKind, GradientMode,
    OptimizerConfig, StiefelPoint,
};
use lpdo_core::LpdoChain;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stalled(n: usize, chi_max: usize, seed: u64) -> LpdoChain {
    let mut chain = LpdoChain::random_pure(n, chi_max, seed).unwrap();
    chain.depolarize_to_lpmm().unwrap();
    let mut options = SweepOptions::new(1e-8);
    options.fidelity = FidelityTracking::Never;
    run_truncation_schedule(chain, 5, &options).unwrap().chain
}

#[test]
fn closed_form_gradient_matches_finite_differences() {
    let mut chain = stalled(6, 4, 3);
    chain.recanonicalize(2).unwrap();
    let bm = BlockMatrix::from_block(&chain.two_site_block(2).unwrap(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in [EntropyKind::SecondRenyi, EntropyKind::VonNeumann] {
        let f = BlockObjective::new(&bm, kind);
        for _ in 0..3 {
            let v = StiefelPoint::random(bm.kappa_c(), bm.kappa_c(), &mut rng).unwrap().into_matrix();
            let exact = f.closed_form_gradient(&v).unwrap();
            let fd = fd_gradient(&f, &v, 1e-6).unwrap();
            let rel = (&exact - &fd).norm() / exact.norm().max(1e-12);
            assert!(rel < 1e-6, "{kind:?}: relative error {rel:e}");
        }
    }
}

#[test]
fn bond_update_never_raises_the_objective() {
    let mut chain = stalled(6, 4, 5);
    chain.recanonicalize(0).unwrap();
    for kind in [EntropyKind::SecondRenyi, EntropyKind::VonNeumann] {
        let mut c = chain.clone();
        for b in 0..5 {
            let r = optimize_bond(&mut c, b, 0.1, &OptimizerConfig::with_objective(kind)).unwrap();
            assert!(r.objective_after <= r.objective_before + 1e-12);
            assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(c.bond_dim(b), r.dim_after);
        }
    }
}

#[test]
fn sweeps_keep_the_state() {
    let chain = stalled(6, 4, 7);
    let before = lpdo_to_dense(&chain).unwrap();
    assert!(before.max_abs_diff(&DenseRho::maximally_mixed(6).unwrap()) < 1e-8);
    for kind in [EntropyKind::SecondRenyi, EntropyKind::VonNeumann] {
        let run = riemann_sweep(chain.clone(), 0.1, &OptimizerConfig::with_objective(kind), 3, FidelityTracking::EverySweep, false)
            .unwrap();
        let after = lpdo_to_dense(&run.chain).unwrap();
        assert!(after.max_abs_diff(&before) < 1e-8);
        assert!((after.trace() - 1.0).abs() < 1e-12);
        for s in &run.stats {
            assert!(s.objective_after <= s.objective_before + 1e-12);
            assert!(1.0 - s.sweep.fidelity_vs_initial.unwrap() < 1e-9);
        }
    }
}

#[test]
fn stalled_chain_is_pruned_to_a_product() {
    let chain = stalled(8, 4, 11);
    assert!(chain.chi_mean() > 1.0);
    for gradient in [GradientMode::Exact, GradientMode::FiniteDifference] {
        let config = OptimizerConfig {
            gradient,
            ..OptimizerConfig::with_objective(EntropyKind::SecondRenyi)
        };
        let run = riemann_sweep(chain.clone(), 0.1, &config, 15, FidelityTracking::FinalOnly, true).unwrap();
        let sweeps = run.sweeps_to_product();
        assert!(sweeps.is_some(), "{gradient:?}: {:?}", run.stats.iter().map(|s| s.sweep.chi_mean).collect::<Vec<_>>());
        assert!(1.0 - run.stats.last().unwrap().sweep.fidelity_vs_initial.unwrap() < 1e-9);
    }
}
