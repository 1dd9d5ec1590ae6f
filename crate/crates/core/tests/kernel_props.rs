mod common;

use common::*;
use pdvol::kernel::KernelSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kernels() -> impl Strategy<Value = KernelSpec<f64>> {
    prop_oneof![
        (-2.3f64..3.9).prop_map(|l| KernelSpec::exponential(l.exp()).unwrap()),
        (1.05f64..3.0, -6.9f64..0.0).prop_map(|(a, d)| KernelSpec::tspl(a, d.exp(), f64::INFINITY).unwrap()),
        (0.2f64..3.0, -6.9f64..0.0, 0.1f64..5.0).prop_map(|(a, d, c)| KernelSpec::tspl(a, d.exp(), c).unwrap()),
        (0.0f64..=1.0, -2.3f64..3.9, -2.3f64..3.9).prop_map(|(th, a, b)| KernelSpec::convex_combo(
            th,
            a.exp(),
            b.exp()
        )
        .unwrap()),
        (0.1f64..5.0, 0.1f64..5.0).prop_map(|(a, d)| KernelSpec::shifted_power(a, d).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tspl_has_unit_mass(k in kernels()) {
        prop_assert!(check_normalization(&k).is_ok(), "{:?}", check_normalization(&k));
    }

    #[test]
    fn separable_kernels_factor(k in kernels()) {
        prop_assert!(check_separability(&k).is_ok(), "{:?}", check_separability(&k));
    }

    #[test]
    fn time_derivative_matches_finite_differences(k in kernels()) {
        prop_assert!(check_derivative(&k).is_ok(), "{:?}", check_derivative(&k));
    }

    #[test]
    fn kernels_decay_in_t(k in kernels()) {
        prop_assert!(check_monotone_decay(&k).is_ok(), "{:?}", check_monotone_decay(&k));
    }

    #[test]
    fn closed_forms_match_quadrature(k in kernels(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = check_closed_form(&k, &mut rng);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn evaluation_is_never_negative(k in kernels(), s in -0.09f64..1.0, lag in 0.0f64..5.0) {
        prop_assert!(k.evaluate(s, s + lag).unwrap() >= 0.0);
    }
}

#[test]
fn drawn_kernels_satisfy_every_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let k = draw_kernel(&mut rng);
        check_all_kernel_invariants(&k, &mut rng).unwrap();
    }
}
