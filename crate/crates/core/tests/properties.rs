use lpdo_core::bundle::{read_bundle, write_bundle};
use lpdo_core::gates;
use lpdo_core::measures::{fidelity_p, purity, trace};
use lpdo_core::oracle::lpdo_to_dense;
use lpdo_core::prune::sweep_truncate;
use lpdo_core::stiefel::{
    isometry_defect, objective_s_sr, objective_s_vn, project_tangent, retract, StiefelPoint,
};
use lpdo_core::tensor::TruncationPolicy;
use lpdo_core::{LpdoChain, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(n, p, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn mixed_chain(n: usize, chi: usize, seed: u64) -> LpdoChain {
    let mut chain = LpdoChain::random_pure(n, chi, seed).unwrap();
    chain.depolarize(0.3, 0.2, 1e-12).unwrap();
    chain
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn retraction_stays_on_the_manifold(seed in any::<u64>(), n in 2usize..9, t in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.gen_range(1..=n);
        let v = StiefelPoint::random(n, p, &mut rng).unwrap();
        let xi = project_tangent(&v, &gaussian(n, p, &mut rng)).unwrap();
        prop_assert!(isometry_defect(retract(&v, &xi, t).unwrap().matrix()) <= 1e-10);
    }

    #[test]
    fn canonicalization_keeps_rho(seed in 0u64..1000, n in 2usize..6, target in 0usize..6) {
        let chain = mixed_chain(n, 4, seed);
        let before = lpdo_to_dense(&chain).unwrap();
        let mut c = chain.clone();
        c.canonicalize(target.min(n - 1)).unwrap();
        prop_assert!(lpdo_to_dense(&c).unwrap().max_abs_diff(&before) < 1e-12);
    }

    #[test]
    fn kraus_unitaries_are_gauge(seed in 0u64..1000, site in 0usize..4) {
        let chain = mixed_chain(4, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let k = chain.kraus_dims()[site];
        let mut c = chain.clone();
        c.apply_kraus_isometry(site, &gates::random_unitary(k, &mut rng)).unwrap();
        prop_assert!(lpdo_to_dense(&c).unwrap().max_abs_diff(&lpdo_to_dense(&chain).unwrap()) < 1e-12);
    }

    #[test]
    fn measures_agree_with_the_oracle(seed in 0u64..1000, n in 1usize..6) {
        let chain = mixed_chain(n, 4, seed);
        let dense = lpdo_to_dense(&chain).unwrap();
        prop_assert!((trace(&chain).unwrap() - dense.trace()).abs() < 1e-12);
        prop_assert!((purity(&chain).unwrap() - dense.purity()).abs() < 1e-12);
        let f = fidelity_p(&chain, &chain).unwrap().fidelity;
        prop_assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in 0u64..1000, b in 0u64..1000) {
        let x = mixed_chain(4, 2, a);
        let y = mixed_chain(4, 2, b);
        let fxy = fidelity_p(&x, &y).unwrap().fidelity;
        let fyx = fidelity_p(&y, &x).unwrap().fidelity;
        prop_assert!((fxy - fyx).abs() < 1e-12);
        prop_assert!(fxy <= 1.0 + 1e-12 && fxy >= -1e-12);
    }

    #[test]
    fn truncation_never_raises_bond_dims(seed in 0u64..1000, cutoff in 0.0f64..0.6) {
        let mut chain = mixed_chain(6, 4, seed);
        let before = chain.bond_dims();
        sweep_truncate(&mut chain, &TruncationPolicy::l2(cutoff).unwrap(), false).unwrap();
        prop_assert!(chain.bond_dims().iter().zip(&before).all(|(a, b)| a <= b));
        prop_assert!((trace(&chain).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn renyi_never_exceeds_von_neumann(seed in any::<u64>()) {
        let mut chain = mixed_chain(4, 4, seed % 1000);
        chain.canonicalize(1).unwrap();
        let block = chain.two_site_block(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = block.dims()[4] * block.dims()[5];
        let v = StiefelPoint::random(k, k, &mut rng).unwrap().into_matrix();
        let sr = objective_s_sr(&block, 1, &v).unwrap().value;
        let vn = objective_s_vn(&block, 1, &v).unwrap().value;
        prop_assert!(sr <= vn + 1e-12 && sr >= -1e-12);
    }

    #[test]
    fn bundles_round_trip_bit_exact(seed in 0u64..1000, n in 1usize..6) {
        let chain = mixed_chain(n, 4, seed);
        let mut buf = Vec::new();
        write_bundle(&chain, &mut buf).unwrap();
        prop_assert_eq!(read_bundle(buf.as_slice()).unwrap(), chain);
    }
}
