use proptest::prelude::*;

use unitprod::stats;
use unitprod::ContingencyTable2x2;

fn table() -> impl Strategy<Value = ContingencyTable2x2> {
    (0u64..60, 0u64..60, 0u64..60, 0u64..60).prop_map(|(a, b, c, d)| ContingencyTable2x2::new(a, b, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn g_and_p_in_range(t in table()) {
        let g = stats::g_test(&t);
        prop_assert!(g.g >= 0.0);
        prop_assert!((0.0..=1.0).contains(&g.p));
    }

    #[test]
    fn tau_in_range(t in table()) {
        let tau = stats::kendall_tau_b_2x2(&t);
        prop_assert!(tau.tau.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn transposing_keeps_g_and_tau(t in table()) {
        let tr = ContingencyTable2x2::new(t.a, t.c, t.b, t.d);
        prop_assert!((stats::g_test(&t).g - stats::g_test(&tr).g).abs() < 1e-9);
        prop_assert!((stats::kendall_tau_b_2x2(&t).tau - stats::kendall_tau_b_2x2(&tr).tau).abs() < 1e-12);
    }

    #[test]
    fn swapping_columns_flips_tau(t in table()) {
        let sw = ContingencyTable2x2::new(t.b, t.a, t.d, t.c);
        prop_assert!((stats::kendall_tau_b_2x2(&t).tau + stats::kendall_tau_b_2x2(&sw).tau).abs() < 1e-12);
    }

    #[test]
    fn williams_never_increases_g(t in table()) {
        let plain = stats::g_test(&t);
        let w = stats::g_test_williams(&t);
        prop_assert!(w.g <= plain.g + 1e-12);
    }

    #[test]
    fn sf_is_decreasing(x in 0.0f64..80.0, dx in 0.001f64..5.0) {
        let a = stats::chi_square_sf(x).unwrap();
        let b = stats::chi_square_sf(x + dx).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn loess_reproduces_lines(intercept in -5.0f64..5.0, slope in -1.0f64..1.0, n in 8usize..40, span in 0.3f64..1.0) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let x = 1.0 + i as f64 * 1.3 + (i % 3) as f64 * 0.1;
            (x, intercept + slope * x)
        }).collect();
        if let Ok(fit) = stats::loess_fit(&pts, span, 1) {
            for (f, (x, _)) in fit.fitted.iter().zip(&pts) {
                prop_assert!((f - (intercept + slope * x)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn williams_reference_value() {
    let g = stats::g_test_williams(&ContingencyTable2x2::new(11, 11, 6, 7));
    assert!((g.g - 0.0462520723831).abs() < 1e-9, "{}", g.g);
}

#[test]
fn empty_row_is_degenerate() {
    let t = ContingencyTable2x2::new(0, 0, 5, 7);
    assert!(stats::g_test(&t).degenerate);
    assert!(stats::kendall_tau_b_2x2(&t).degenerate);
}
