use proptest::prelude::*;
use wpap::ap::{scalar_fn, APSignal};
use wpap::config::{parse_config_str, RunConfig};
use wpap::pap::{geometric_schedule, is_pap0, ClosedForm, Pap0Config};
use wpap::quad::Composite;
use wpap::weights::{ergodic_mass, Weight};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_is_monotone_in_horizon(m in 0u32..5, t in 0.1f64..50.0, dt in 0.01f64..10.0) {
        let q = Composite::default();
        let w = Weight::polynomial(m);
        let a = ergodic_mass(&w, t, &q).unwrap().value;
        let b = ergodic_mass(&w, t + dt, &q).unwrap().value;
        prop_assert!(a > 0.0 && b > a);
    }

    #[test]
    fn polynomial_mass_matches_quadrature(m in 0u32..4, t in 0.5f64..20.0) {
        let q = Composite::default();
        let exact = ergodic_mass(&Weight::polynomial(m), t, &q).unwrap().value;
        let w = Weight::from_fn("poly", move |s: f64| (1.0 + s * s).powi(m as i32));
        let quad = ergodic_mass(&w, t, &q).unwrap().value;
        prop_assert!((exact - quad).abs() <= 1e-9 * exact);
    }

    #[test]
    fn ap_sum_and_scale_are_pointwise(
        f1 in 0.1f64..5.0, f2 in 0.1f64..5.0, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0,
        k in -4.0f64..4.0, t in -100.0f64..100.0,
    ) {
        let x = APSignal::sin(f1, a1);
        let y = APSignal::cos(f2, a2);
        let s = x.add(&y).scale(k);
        let expected = k * (a1 * (f1 * t).sin() + a2 * (f2 * t).cos());
        prop_assert!((s.value(t) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        prop_assert!(s.sup_bound() >= s.value(t).abs() - 1e-12);
    }

    #[test]
    fn pap0_deviation_is_homogeneous(k in 0.1f64..20.0, rate in 0.3f64..3.0, m in 0u32..3) {
        let cfg = Pap0Config::default();
        let horizons = geometric_schedule(10.0, 2.0, 5);
        let w = Weight::polynomial(m);
        let pulse = scalar_fn(None, move |t: f64| (-rate * t.abs()).exp());
        let scaled = scalar_fn(None, move |t: f64| k * (-rate * t.abs()).exp());
        let wave = scalar_fn(None, move |t: f64| k * (rate * t).sin());
        let a = is_pap0(&ClosedForm(&pulse), &w, &horizons, &cfg).unwrap();
        let b = is_pap0(&ClosedForm(&scaled), &w, &horizons, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((k * x - y).abs() <= 1e-9 * y.abs().max(1e-300));
        }
        prop_assert!((a.fitted_rate - b.fitted_rate).abs() <= 1e-9);
        prop_assert!(!is_pap0(&ClosedForm(&wave), &w, &horizons, &cfg).unwrap().decays_to_zero);
    }

    #[test]
    fn config_round_trips(seed in 0u64..1_000_000, first in 1.0f64..50.0, ratio in 1.5f64..4.0, count in 4usize..8) {
        let mut cfg = RunConfig { seed, ..RunConfig::default() };
        cfg.horizons.first = first;
        cfg.horizons.ratio = ratio;
        cfg.horizons.count = count;
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }
}
