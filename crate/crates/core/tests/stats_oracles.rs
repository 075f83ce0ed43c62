mod oracles;

use oracles::*;
use ppulse::stats::{chi_square_2x2, cohen_kappa, point_biserial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quadrature_sanity() {
    // known closed forms: χ²(2) sf = e^{-x/2}, t(1) sf = 1/2 − atan(t)/π
    for x in [0.5, 2.0, 7.0] {
        assert!((chi2_sf_quadrature(x, 2) - (-x / 2.0).exp()).abs() < 1e-12);
        assert!((student_t_sf_quadrature(x, 1) - (0.5 - x.atan() / std::f64::consts::PI)).abs() < 1e-12);
    }
}

#[test]
fn survival_functions_match_quadrature() {
    let (chi, t) = survival_grid_error();
    assert!(chi < 1e-8, "chi2 gap {chi:e}");
    assert!(t < 1e-8, "t gap {t:e}");
}

#[test]
fn chi_square_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 50 {
        let table = [[rng.gen_range(0..40), rng.gen_range(0..40)], [rng.gen_range(0..40), rng.gen_range(0..40)]];
        let Ok(r) = chi_square_2x2::<f64>(table) else { continue };
        let oracle = chi_square_brute(table);
        assert!(rel_err(r.chi2, oracle) < 1e-9 || (r.chi2 - oracle).abs() < 1e-12, "{table:?}");
        assert!((r.p_value - chi2_sf_quadrature(r.chi2, 1)).abs() < 1e-8);
        checked += 1;
    }
}

#[test]
fn point_biserial_matches_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(4..60);
        let flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(r) = point_biserial(&flags, &values) else { continue };
        let encoded: Vec<f64> = flags.iter().map(|&f| f as u8 as f64).collect();
        let oracle = pearson(&encoded, &values);
        assert!((r.r - oracle).abs() < 1e-12, "{} vs {oracle}", r.r);
        let df = (n - 2) as u32;
        let t = oracle * (df as f64 / (1.0 - oracle * oracle)).sqrt();
        assert!((r.p_value - 2.0 * student_t_sf_quadrature(t.abs(), df)).abs() < 1e-8);
        checked += 1;
    }
}

#[test]
fn kappa_matches_confusion_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let n = rng.gen_range(2..40);
        let k = rng.gen_range(2..5);
        let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let b: Vec<usize> = a
            .iter()
            .map(|&x| if rng.gen_bool(0.6) { x } else { rng.gen_range(0..k) })
            .collect();
        let r = cohen_kappa::<f64, _>(&a, &b).unwrap();
        let oracle = kappa_by_hand(&a, &b, k);
        assert!(rel_err(r.kappa, oracle) < 1e-9 || (r.kappa - oracle).abs() < 1e-12);
    }
}

#[test]
fn worked_examples() {
    let k = cohen_kappa::<f64, _>(&["P", "P", "N", "N"], &["P", "N", "N", "N"]).unwrap();
    assert_eq!((k.observed_agreement, k.expected_agreement), (0.75, 0.5));
    assert!((k.kappa - 0.5).abs() < 1e-12);
    let k = cohen_kappa::<f64, _>(&["P"; 3], &["N"; 3]).unwrap();
    assert_eq!((k.observed_agreement, k.expected_agreement, k.kappa), (0.0, 0.0, 0.0));
}
