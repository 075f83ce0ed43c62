use ppulse::stats::{beta_inc, chi2_sf, chi_square_2x2, cohen_kappa, point_biserial, student_t_sf};
use proptest::prelude::*;

fn table() -> impl Strategy<Value = [[u64; 2]; 2]> {
    prop::array::uniform2(prop::array::uniform2(0u64..200))
}

proptest! {
    #[test]
    fn chi_square_is_bounded_and_transpose_invariant(t in table()) {
        if let Ok(r) = chi_square_2x2::<f64>(t) {
            prop_assert!(r.chi2 >= 0.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let tr = chi_square_2x2::<f64>([[t[0][0], t[1][0]], [t[0][1], t[1][1]]]).unwrap();
            prop_assert!((r.chi2 - tr.chi2).abs() <= 1e-9 * r.chi2.max(1.0));
            let swapped = chi_square_2x2::<f64>([t[1], t[0]]).unwrap();
            prop_assert!((r.chi2 - swapped.chi2).abs() <= 1e-9 * r.chi2.max(1.0));
        }
    }

    #[test]
    fn survival_functions_are_monotone(k in 1u32..40, x in 0.0f64..80.0, dx in 0.0f64..10.0) {
        let a: f64 = chi2_sf(x, k);
        let b: f64 = chi2_sf(x + dx, k);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn t_survival_is_symmetric(t in -20.0f64..20.0, df in 1.0f64..200.0) {
        let s: f64 = student_t_sf(t, df) + student_t_sf(-t, df);
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_reflection(a in 0.1f64..20.0, b in 0.1f64..20.0, x in 0.0f64..=1.0) {
        let s: f64 = beta_inc(a, b, x) + beta_inc(b, a, 1.0 - x);
        prop_assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn point_biserial_bounds_and_group_swap(
        pairs in prop::collection::vec((any::<bool>(), -1.0f64..1.0), 3..80)
    ) {
        let flags: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r) = point_biserial(&flags, &values) {
            prop_assert!((-1.0..=1.0).contains(&r.r));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let flipped: Vec<bool> = flags.iter().map(|f| !f).collect();
            let s = point_biserial(&flipped, &values).unwrap();
            prop_assert!((r.r + s.r).abs() < 1e-12);
            prop_assert!((r.p_value - s.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_symmetric_and_at_most_one(
        pairs in prop::collection::vec((0u8..3, 0u8..3), 1..60)
    ) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let ab = cohen_kappa::<f64, _>(&a, &b).unwrap();
        let ba = cohen_kappa::<f64, _>(&b, &a).unwrap();
        prop_assert!(ab.kappa <= 1.0 + 1e-12);
        prop_assert!((ab.kappa - ba.kappa).abs() < 1e-12);
        let same = cohen_kappa::<f64, _>(&a, &a).unwrap();
        prop_assert_eq!(same.kappa, 1.0);
    }
}
