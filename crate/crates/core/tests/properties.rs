use dwlab_core::grid::Spectral;
use dwlab_core::linear::{multipliers, Symbol};
use dwlab_core::modulus::{ModulusSpec, Table};
use dwlab_core::testfunction::jensen_check;
use dwlab_core::{Dim, GridField, GridSpec, Modulus, ModulusKind, Nonlinearity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog_modulus() -> impl Strategy<Value = Modulus> {
    prop_oneof![
        (0.05f64..1.0).prop_map(|p| Modulus::power(p).unwrap()),
        (0.05f64..1.0).prop_map(|p| Modulus::log_plus(p).unwrap()),
        (0.1f64..4.0).prop_map(|p| Modulus::inv_log(p).unwrap()),
        (0.1f64..3.0, 1u32..=2).prop_map(|(p, k)| Modulus::iter_log(p, k).unwrap()),
    ]
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn smooth_field(spec: GridSpec, coeffs: &[(f64, f64, f64)]) -> GridField {
    GridField::from_fn(spec, |x| {
        coeffs
            .iter()
            .map(|&(a, c, w)| a * (-((x[0] - c).powi(2) + x[1].powi(2)) / (w * w)).exp())
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn catalog_is_monotone_and_concave(m in catalog_modulus()) {
        let s_star = m.continuation_point().min(1e3);
        let grid = log_grid(1e-12, s_star, 400);
        prop_assert!(m.is_monotone_on(&grid));
        prop_assert!(m.is_concave_on(&grid));
        prop_assert_eq!(m.eval(0.0), 0.0);
        // the linear continuation keeps μ monotone past s*
        let beyond = log_grid(s_star, 10.0 * s_star, 50);
        prop_assert!(m.is_monotone_on(&beyond));
    }

    #[test]
    fn spec_strings_round_trip(m in catalog_modulus()) {
        let text = m.to_string();
        let spec: ModulusSpec = text.parse().unwrap();
        let built = spec.build().unwrap();
        prop_assert_eq!(built.kind(), m.kind());
        for s in [1e-9, 1e-4, 0.01] {
            let (a, b) = (built.eval(s), m.eval(s));
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn h_is_monotone(m in catalog_modulus(), two in any::<bool>()) {
        let dim = if two { Dim::Two } else { Dim::One };
        let nl = Nonlinearity::new(m, dim);
        let grid = log_grid(1e-10, 1.0, 200);
        prop_assert!(grid.windows(2).all(|w| nl.h(w[0]) <= nl.h(w[1])));
        prop_assert_eq!(nl.h(-0.3), nl.h(0.3));
    }

    #[test]
    fn table_interpolation_is_monotone(
        steps in proptest::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..30)
    ) {
        let mut s = Vec::new();
        let mut mu = Vec::new();
        let (mut x, mut y) = (0.0, 0.0);
        for (dx, dy) in steps {
            x += dx;
            y += dy;
            s.push(x);
            mu.push(y);
        }
        let table = Table::from_points(s, mu).unwrap();
        let m = Modulus::from_table(table).unwrap();
        prop_assert_eq!(m.kind(), ModulusKind::Custom);
        let grid: Vec<f64> = (0..500).map(|i| 1.2 * x * i as f64 / 499.0).collect();
        prop_assert!(m.is_monotone_on(&grid));
    }

    #[test]
    fn norm_inequalities_and_parseval(
        coeffs in proptest::collection::vec((-1.0f64..1.0, -3.0f64..3.0, 0.5f64..2.0), 1..4),
        two in any::<bool>(),
    ) {
        let dim = if two { Dim::Two } else { Dim::One };
        let spec = GridSpec::new(dim, 10.0, if two { 64 } else { 256 }).unwrap();
        let sp = Spectral::new(spec);
        let u = smooth_field(spec, &coeffs);
        let (l1, l2, linf) = (u.l1().unwrap(), u.l2().unwrap(), u.linf().unwrap());
        prop_assume!(l2 > 1e-6);
        prop_assert!(l2 * l2 <= l1 * linf * (1.0 + 1e-12));
        prop_assert!(l1 <= spec.volume().sqrt() * l2 * (1.0 + 1e-12));
        let ls = u.l2_spectral(&sp).unwrap();
        prop_assert!((ls - l2).abs() <= 1e-12 * l2);
        let h1 = u.sobolev_norm(&sp, 1).unwrap();
        prop_assert!(h1 >= l2 * (1.0 - 1e-12));
    }

    #[test]
    fn symbol_roots_satisfy_vieta(xi in 0.0f64..50.0) {
        // λ² + λ + |ξ|² = 0
        let s = Symbol::new(xi);
        let sum = s.lambda_plus + s.lambda_minus;
        let prod = s.lambda_plus * s.lambda_minus;
        prop_assert!((sum.re + 1.0).abs() < 1e-12 && sum.im.abs() < 1e-12);
        prop_assert!((prod.re - xi * xi).abs() <= 1e-12 * (1.0 + xi * xi));
        prop_assert!(prod.im.abs() <= 1e-12 * (1.0 + xi * xi));
    }

    #[test]
    fn multipliers_start_at_identity(xi in 0.0f64..20.0) {
        let m = multipliers(xi, 0.0).unwrap();
        prop_assert!((m.k0 - 1.0).abs() < 1e-14 && m.k1.abs() < 1e-14);
        prop_assert!((m.dk1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dini_integral_is_additive(m in catalog_modulus(), a in 1e-12f64..1e-6, b in 1e-6f64..1e-3, c in 1e-3f64..0.01) {
        let whole = m.dini_integral(a, c);
        let parts = m.dini_integral(a, b) + m.dini_integral(b, c);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1e-300));
    }
}

#[test]
fn jensen_random_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let h = Nonlinearity::new(Modulus::inv_log(1.0).unwrap(), Dim::One);
    let phis: [&dyn Fn(f64) -> f64; 4] = [
        &|t| t * t,
        &|t| t.powi(4),
        &|t| t.exp_m1(),
        &|t| h.h(t),
    ];
    let mut violations = 0;
    for trial in 0..1000 {
        let len = rng.random_range(1..200);
        let u: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..0.04)).collect();
        let mut alpha: Vec<f64> = (0..len)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        alpha[0] += 0.1;
        let r = jensen_check(phis[trial % 4], &u, &alpha).unwrap();
        if !r.holds() {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
