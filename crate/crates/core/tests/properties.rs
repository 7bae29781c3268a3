use proptest::prelude::*;

use gibbs_nd::blockenc::{be_lcu, be_product, be_rescale, dilate};
use gibbs_nd::channels::{build_db_channel, build_povm, DbOverrides, DbParams};
use gibbs_nd::filters::{filtered_exact, imaginary_shift, FilterSpec};
use gibbs_nd::gibbs::{chi2_divergence, kms_db_residual, kms_inner, make_gibbs_context};
use gibbs_nd::linalg::random::{random_hermitian_normed, random_matrix, random_state, rng};
use gibbs_nd::linalg::{herm_eig, op_norm, sqrt_psd, trace_norm, ComplexMatrix, C64};
use gibbs_nd::protocols::{sample_count_azuma, sample_count_chebyshev};

fn contraction(seed: u64, d: usize, s: f64) -> ComplexMatrix {
    let m = random_matrix(&mut rng(seed), d, d);
    m.scale_real(s / op_norm(&m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..4) {
        let a = random_hermitian_normed(&mut rng(seed), 1 << n, 2.0);
        let eig = herm_eig(&a).unwrap();
        let back = eig.map(|x| x).unwrap();
        prop_assert!((&back - &a).max_abs() < 1e-12);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn psd_square_root_squares(seed in any::<u64>(), d in 2usize..6) {
        let rho = random_state(&mut rng(seed), d);
        let s = sqrt_psd(&rho).unwrap();
        prop_assert!((&(&s * &s) - &rho).max_abs() < 1e-12);
    }

    #[test]
    fn gibbs_state_is_a_state(seed in any::<u64>(), n in 1usize..4, beta in 0.05f64..4.0) {
        let h = random_hermitian_normed(&mut rng(seed), 1 << n, 1.0);
        let ctx = make_gibbs_context(&h, beta).unwrap();
        prop_assert!((ctx.sigma.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(ctx.sigma_min > 0.0);
        prop_assert!(chi2_divergence(&ctx.sigma, &ctx).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kms_inner_product_is_hermitian(seed in any::<u64>(), beta in 0.1f64..3.0) {
        let mut r = rng(seed);
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), beta).unwrap();
        let x = random_matrix(&mut r, 4, 4);
        let y = random_matrix(&mut r, 4, 4);
        let xy = kms_inner(&x, &y, &ctx).unwrap();
        let yx = kms_inner(&y, &x, &ctx).unwrap();
        prop_assert!((xy - yx.conj()).norm() < 1e-12);
        prop_assert!(kms_inner(&x, &x, &ctx).unwrap().re >= 0.0);
    }

    #[test]
    fn filtering_keeps_thermal_expectation(seed in any::<u64>(), beta in 0.1f64..3.0, tau in 0.2f64..6.0) {
        let mut r = rng(seed);
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), beta).unwrap();
        let a = random_hermitian_normed(&mut r, 4, 1.0);
        let af = filtered_exact(&a, &ctx, &FilterSpec::gaussian(tau).unwrap()).unwrap();
        prop_assert!((ctx.expectation(&af) - ctx.expectation(&a)).norm() < 1e-12);
        prop_assert!(op_norm(&af).unwrap() <= op_norm(&a).unwrap() + 1e-12);
        prop_assert!((&imaginary_shift(&af, 0.0, &ctx).unwrap() - &af).max_abs() < 1e-12);
    }

    #[test]
    fn db_channel_is_balanced_and_fixes_sigma(seed in any::<u64>(), n in 1usize..3, beta in 0.1f64..3.0) {
        let mut r = rng(seed);
        let d = 1 << n;
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, d, 1.0), beta).unwrap();
        let a = random_hermitian_normed(&mut r, d, 1.0);
        let p = DbParams::resolve(&a, &ctx, DbOverrides::default()).unwrap();
        let m = build_db_channel(&a, &ctx, p).unwrap();
        prop_assert!(m.tp_residual() < 1e-10);
        prop_assert!(kms_db_residual(&m, &ctx).unwrap() < 1e-7);
        prop_assert!(trace_norm(&(&m.superop().apply(&ctx.sigma) - &ctx.sigma)).unwrap() < 1e-8);
        let rho = random_state(&mut r, d);
        let total: f64 = m.probabilities(&rho).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn povm_probabilities_sum_to_one(seed in any::<u64>(), u in 0.01f64..0.5) {
        let mut r = rng(seed);
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), 1.0).unwrap();
        let a = random_hermitian_normed(&mut r, 4, 1.0);
        let m = build_povm(&a, &ctx, u, 2.0).unwrap();
        let p = m.probabilities(&random_state(&mut r, 4));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= -1e-14));
    }

    #[test]
    fn block_encoding_calculus(s1 in any::<u64>(), s2 in any::<u64>(), w in 0.1f64..2.0, extra in 1.0f64..3.0) {
        let x = contraction(s1, 2, 0.9);
        let y = contraction(s2, 2, 0.6);
        let (bx, by) = (dilate(&x).unwrap(), dilate(&y).unwrap());
        prop_assert!((&bx.extract() - &x).max_abs() < 1e-10);
        let p = be_product(&[bx.clone(), by.clone()]).unwrap();
        prop_assert!(op_norm(&(&p.extract() - &(&y * &x))).unwrap() < 1e-10);
        prop_assert_eq!(p.b, 2);
        let l = be_lcu(&[bx, by], &[C64::new(w, 0.0), C64::new(0.0, -1.0)]).unwrap();
        prop_assert!((l.alpha - (w + 1.0)).abs() < 1e-12);
        prop_assert!(l.measured_error().unwrap() < 1e-10);
        let big = be_rescale(&l, l.alpha * extra).unwrap();
        prop_assert!(op_norm(&(&big.extract() - &l.extract())).unwrap() < 1e-10);
        prop_assert!(big.unitarity_residual() < 1e-10);
    }

    #[test]
    fn planners_shrink_with_looser_targets(var in 0.1f64..10.0, t_aut in 0.5f64..5.0, eps in 0.01f64..0.5, eta in 0.01f64..0.5) {
        prop_assert!(sample_count_chebyshev(var, t_aut, eps, eta) >= sample_count_chebyshev(var, t_aut, 2.0 * eps, eta));
        prop_assert!(sample_count_azuma(var, eps, eta) >= sample_count_azuma(var, eps, (2.0 * eta).min(0.99)));
    }
}
