//! Property tests for algebraic and monotonicity invariants.

use depthsep::fouriernet::{fn_mul, fn_pow, FourierNet, DEFAULT_ATOM_CAP};
use depthsep::harness::{mc_l2_error, Sampler, SamplerKind};
use depthsep::numeric::binom_u128;
use depthsep::shallowify::{
    fixed_dimension_budget, gaussian_l2_budget, two_layer_atoms, two_layer_formula,
    GaussianConstants,
};
use depthsep::sphere::gegenbauer;
use depthsep::uniapprox::bernstein_degree;
use num_complex::Complex64;
use proptest::prelude::*;

fn net_strategy() -> impl Strategy<Value = FourierNet> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n),
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n),
        )
            .prop_map(move |(basis, coeffs)| {
                let atoms = coeffs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (re, im))| {
                        let mut s = vec![0; n];
                        s[i] = 1;
                        (s, Complex64::new(re, im))
                    })
                    .collect();
                FourierNet::from_parts(d, basis, atoms).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fn_pow_is_the_pointwise_power(net in net_strategy(), k in 0i64..=5, seed in any::<u64>()) {
        let pow = fn_pow(&net, k, DEFAULT_ATOM_CAP).unwrap();
        let n = net.atom_count() as u64;
        if k > 0 {
            prop_assert!(pow.atom_count() as u128 <= binom_u128(n + k as u64 - 1, k as u64));
        }
        for x in Sampler::new(SamplerKind::UniformCube { d: net.dim(), radius: 1.0 }, seed).sample(20) {
            let want = net.eval(&x).unwrap().powi(k as i32);
            let got = pow.eval(&x).unwrap();
            prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0));
        }
    }

    #[test]
    fn fn_mul_is_the_pointwise_product(a in net_strategy(), seed in any::<u64>()) {
        let b = a.scale(Complex64::new(0.5, -0.25));
        let prod = fn_mul(&a, &b, DEFAULT_ATOM_CAP).unwrap();
        for x in Sampler::new(SamplerKind::UniformCube { d: a.dim(), radius: 1.0 }, seed).sample(10) {
            let want = a.eval(&x).unwrap() * b.eval(&x).unwrap();
            prop_assert!((prod.eval(&x).unwrap() - want).norm() <= 1e-10 * want.norm().max(1.0));
        }
    }

    #[test]
    fn json_round_trip(net in net_strategy()) {
        let back = FourierNet::from_json_str(&net.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back.atom_count(), net.atom_count());
        let x = vec![0.3; net.dim()];
        prop_assert!((back.eval(&x).unwrap() - net.eval(&x).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn two_layer_budget_shrinks_with_eps(eps in 0.05f64..0.9, p in 1usize..10, alpha in 0.3f64..=1.0, gamma in 0.1f64..3.0) {
        let a = two_layer_formula(eps, p, alpha, gamma, 1.0, 1.0, 1.0, 1.0);
        let b = two_layer_formula(eps * 1.5, p, alpha, gamma, 1.0, 1.0, 1.0, 1.0);
        prop_assert!(b.n <= a.n && b.m <= a.m);
        prop_assert!(b.log2_atoms <= a.log2_atoms + 1e-9);
        prop_assert!(b.freq_bound <= a.freq_bound);
    }

    #[test]
    fn certificate_atom_count_is_consistent(n in 0u64..50, p in 1usize..10, m in 0u64..12) {
        let exact = two_layer_atoms(n, p, m);
        let base = 2 * n as u128 * p as u128 + 1;
        prop_assert_eq!(exact, base.checked_pow(m as u32));
        if let Some(e) = exact {
            let log2 = m as f64 * (base as f64).log2();
            prop_assert!(((e as f64).log2() - log2).abs() < 1e-9 * log2.max(1.0));
        }
    }

    #[test]
    fn formula_log2_atoms_matches_exact(eps in 0.3f64..0.9, p in 1usize..4) {
        let b = two_layer_formula(eps, p, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5);
        let base = (2 * b.n * p as u64 + 1) as f64;
        prop_assert!((b.log2_atoms - b.m as f64 * base.log2()).abs() < 1e-9 * b.log2_atoms.max(1.0));
        if let Some(a) = b.atoms {
            prop_assert_eq!(Some(a), two_layer_atoms(b.n, p, b.m));
        }
    }

    #[test]
    fn asymptotic_budgets_shrink_with_eps(d in 1usize..50, p in 1usize..20, eps in 0.01f64..0.6, w in 0.1f64..5.0) {
        let c = GaussianConstants { k: 1.0, s: 1.0 };
        let a = gaussian_l2_budget(d, p, w, eps, c).unwrap();
        let b = gaussian_l2_budget(d, p, w, eps * 1.5, c).unwrap();
        prop_assert!(b.log2 <= a.log2 + 1e-9);
        let fa = fixed_dimension_budget(d, eps, 1.0).unwrap();
        let fb = fixed_dimension_budget(d, eps * 1.5, 1.0).unwrap();
        prop_assert!(fb.log2 <= fa.log2 + 1e-9);
    }

    #[test]
    fn bernstein_degree_shrinks_with_eps(alpha in 0.2f64..=1.0, r in 0.1f64..3.0, eps in 0.05f64..0.9) {
        if let (Ok(a), Ok(b)) = (bernstein_degree(r, alpha, eps), bernstein_degree(r, alpha, eps * 1.2)) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn gegenbauer_parity_and_bound(d in 2usize..12, k in 0usize..60, t in -1.0f64..=1.0) {
        let a = gegenbauer(d, k, t).unwrap();
        let b = gegenbauer(d, k, -t).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(a.abs() <= 1.0 + 1e-12);
        prop_assert!((a - sign * b).abs() < 1e-12);
    }

    #[test]
    fn mc_error_of_constant_offset(c in -3.0f64..3.0, seed in any::<u64>()) {
        let s = Sampler::new(SamplerKind::Gaussian { d: 2, sigma: 1.0 }, seed);
        let est = mc_l2_error(|x| Complex64::new(x[0], 0.0), |x| Complex64::new(x[0] + c, 0.0), &s, 100).unwrap();
        prop_assert!((est.estimate - c.abs()).abs() < 1e-12);
    }
}
