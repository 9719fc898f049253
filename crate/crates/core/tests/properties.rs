use evenop::charmat::{
    membership_residual, nevanlinna_gap, omega0, omega_tau_blocks, omega_tau_krein, pair_to_kernel_form,
    symmetry_defect, NevanlinnaPair, TauPoint,
};
use evenop::expr::{DiffExpr, Endpoint, FrameLayout};
use evenop::linalg::{c, max_abs_diff, random_hermitian, CMat, C64};
use evenop::ode::IntegratorConfig;
use evenop::quad::cumulative_simpson;
use evenop::resolvent::{apply_resolvent, green_eval_triplet, max_diff, sample_rhs, GreenKernel, KernelOptions, QuadConfig};
use evenop::weyl::{weyl_regular, WeylOptions};
use proptest::prelude::*;
use rand::SeedableRng;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn nonreal() -> impl Strategy<Value = C64> {
    (-5.0f64..5.0, 0.2f64..3.0, any::<bool>()).prop_map(|(re, im, up)| c(re, if up { im } else { -im }))
}

fn regular_expr(kind: u8) -> DiffExpr {
    match kind % 3 {
        0 => DiffExpr::free(1, 1, Endpoint::Regular(1.0)),
        1 => DiffExpr::sturm_liouville(|t| 1.0 / (1.0 + t * t), Endpoint::Regular(1.0)),
        _ => DiffExpr::free(2, 1, Endpoint::Regular(1.0)),
    }
}

fn random_matrix(r: usize, k: usize, seed: u64) -> CMat {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(r, k, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frame_split_merge_round_trip(n in 1usize..4, d in 1usize..4, cols in 1usize..4, seed in any::<u64>()) {
        let layout = FrameLayout { n, d };
        let u = random_matrix(2 * n * d, cols, seed);
        let (y1, y2) = layout.split(&u).unwrap();
        prop_assert_eq!(layout.merge(&y1, &y2).unwrap(), u.clone());
        let back = layout.to_boundary(&layout.to_stack(&u).unwrap()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn cumulative_simpson_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let x: Vec<f64> = (0..17).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let f: Vec<CMat> = (0..17).map(|i| random_matrix(1, 1, seed ^ i)).collect();
        let g: Vec<CMat> = (0..17).map(|i| random_matrix(1, 1, seed.wrapping_add(i + 99))).collect();
        let h: Vec<CMat> = f.iter().zip(&g).map(|(p, q)| p * c(a, 0.0) + q).collect();
        let (cf, cg, ch) = (cumulative_simpson(&x, &f), cumulative_simpson(&x, &g), cumulative_simpson(&x, &h));
        for i in 0..x.len() {
            prop_assert!((&cf[i] * c(a, 0.0) + &cg[i] - &ch[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn weyl_matrix_symmetry(l in nonreal(), kind in 0u8..3) {
        let e = regular_expr(kind);
        let w = weyl_regular(&e, l, &cfg()).unwrap();
        let wc = weyl_regular(&e, l.conj(), &cfg()).unwrap();
        prop_assert!(max_abs_diff(&wc.full().adjoint(), &w.full()) < 1e-9);
    }

    #[test]
    fn kernel_form_spans_the_relation(seed in any::<u64>(), h in 1usize..5, l in nonreal()) {
        let tau = NevanlinnaPair::random_self_adjoint(h, seed);
        let (c0, c1) = tau.at(l).unwrap();
        let (k0, k1) = pair_to_kernel_form(&tau, l).unwrap();
        prop_assert!(membership_residual(&c0, &c1, &k0, &k1) < 1e-12);
    }

    #[test]
    fn routes_agree_and_omega_is_symmetric(seed in any::<u64>(), l in nonreal(), kind in 0u8..3) {
        let e = regular_expr(kind);
        let w = weyl_regular(&e, l, &cfg()).unwrap();
        let wc = weyl_regular(&e, l.conj(), &cfg()).unwrap();
        let tau = NevanlinnaPair::random_self_adjoint(w.h(), seed);
        let a = omega_tau_blocks(&tau, &w).unwrap();
        let b = omega_tau_krein(&tau, &w, &wc).unwrap();
        prop_assert!(max_abs_diff(&a.omega, &b.omega) < 1e-9);
        let ac = omega_tau_blocks(&tau, &wc).unwrap();
        prop_assert!(symmetry_defect(&a, &ac) < 1e-9);
    }

    #[test]
    fn omega_is_invariant_under_pair_equivalence(seed in any::<u64>(), l in nonreal()) {
        let e = regular_expr(0);
        let w = weyl_regular(&e, l, &cfg()).unwrap();
        let tau = NevanlinnaPair::random_self_adjoint(2, seed);
        let (c0, c1) = tau.at(l).unwrap();
        let g = random_matrix(2, 2, seed.wrapping_mul(7)) + CMat::identity(2, 2) * c(3.0, 0.0);
        let other = NevanlinnaPair::constant(&g * c0, &g * c1).unwrap();
        let a = omega_tau_blocks(&tau, &w).unwrap();
        let b = omega_tau_blocks(&other, &w).unwrap();
        prop_assert!(max_abs_diff(&a.omega, &b.omega) < 1e-10);
    }

    #[test]
    fn tau0_gives_omega0(l in nonreal(), kind in 0u8..3) {
        let e = regular_expr(kind);
        let w = weyl_regular(&e, l, &cfg()).unwrap();
        let a = omega_tau_blocks(&NevanlinnaPair::tau0(w.h()), &w).unwrap();
        prop_assert!(max_abs_diff(&a.omega, &omega0(&w).omega) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gap_vanishes_for_self_adjoint_pairs(seed in any::<u64>(), l in nonreal()) {
        let e = regular_expr(1);
        let tau = NevanlinnaPair::random_self_adjoint(2, seed);
        let p = TauPoint::compute(&e, &tau, l, &WeylOptions::default(), 0.005, &cfg()).unwrap();
        let g = nevanlinna_gap(&p, 1e-7).unwrap();
        prop_assert!(g.gap.norm() < 1e-6);
    }

    #[test]
    fn gap_is_nonnegative_for_proper_pairs(seed in any::<u64>(), l in nonreal()) {
        let e = regular_expr(0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let hm = random_hermitian(2, 1.0, &mut rng);
        // C0 = I, C1 = H + iI on C+: Im(C1 C0*) = I
        let c1 = hm + CMat::identity(2, 2) * C64::i();
        let tau = NevanlinnaPair::from_upper_half_plane(CMat::identity(2, 2), c1).unwrap();
        let p = TauPoint::compute(&e, &tau, l, &WeylOptions::default(), 0.005, &cfg()).unwrap();
        let g = nevanlinna_gap(&p, 1e-7).unwrap();
        prop_assert!(g.min_eig > -1e-6);
    }

    #[test]
    fn resolvent_is_linear_and_kernel_symmetric(seed in any::<u64>(), l in nonreal()) {
        let e = regular_expr(1);
        let tau = NevanlinnaPair::random_self_adjoint(2, seed);
        let opts = KernelOptions::default();
        let k = GreenKernel::build(&e, &tau, l, &opts, &cfg()).unwrap();
        let f = sample_rhs(&k, |t| CMat::from_element(1, 1, c(t.sin(), 1.0)));
        let g = sample_rhs(&k, |t| CMat::from_element(1, 1, c(1.0 - t, t * t)));
        let fg: Vec<CMat> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let q = QuadConfig::default();
        let (yf, yg, yfg) = (
            apply_resolvent(&e, &k, &f, &q).unwrap(),
            apply_resolvent(&e, &k, &g, &q).unwrap(),
            apply_resolvent(&e, &k, &fg, &q).unwrap(),
        );
        let sum: Vec<CMat> = yf.quasi.iter().zip(&yg.quasi).map(|(a, b)| a + b).collect();
        prop_assert!(max_diff(&sum, &yfg.quasi) < 1e-12);
        let kc = GreenKernel::build(&e, &tau, l.conj(), &opts, &cfg()).unwrap();
        for (x, t) in [(0.3, 0.7), (0.9, 0.1), (0.55, 0.45)] {
            let a = green_eval_triplet(&k, x, t).unwrap();
            let b = green_eval_triplet(&kc, t, x).unwrap();
            prop_assert!((a.adjoint() - b).norm() < 1e-9);
        }
    }
}
