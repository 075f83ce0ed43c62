//! Independent reference implementations used to check the stats module.
//! None of these share code with the library: tail probabilities come from
//! numerically integrating the densities, gamma values from closed forms.
#![allow(dead_code)]

use std::f64::consts::PI;

/// ln Γ(n/2) for a positive integer n, from factorials.
pub fn ln_gamma_half(n: u32) -> f64 {
    let ln_fact = |m: u32| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    if n.is_multiple_of(2) {
        ln_fact(n / 2 - 1)
    } else {
        // Γ(m + 1/2) = (2m)! √π / (4^m m!)
        let m = (n - 1) / 2;
        ln_fact(2 * m) + 0.5 * PI.ln() - (m as f64) * 4f64.ln() - ln_fact(m)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature over [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    // split first so narrow peaks are not missed by the initial estimate
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, 1e-15, 40)
        })
        .sum()
}

/// P(X > x) for X ~ χ²(k): one minus the integrated density. Substituting
/// t = u² removes the singularity at zero for k = 1.
pub fn chi2_sf_quadrature(x: f64, k: u32) -> f64 {
    let half = k as f64 / 2.0;
    let ln_norm = half * 2f64.ln() + ln_gamma_half(k);
    let density_u = move |u: f64| {
        if u == 0.0 {
            return if k == 1 { 2.0 * (-ln_norm).exp() } else { 0.0 };
        }
        2.0 * ((k as f64 - 1.0) * u.ln() - u * u / 2.0 - ln_norm).exp()
    };
    (1.0 - integrate(&density_u, 0.0, x.sqrt())).max(0.0)
}

/// P(T > t) for Student's t with `df` degrees of freedom.
pub fn student_t_sf_quadrature(t: f64, df: u32) -> f64 {
    let v = df as f64;
    let ln_norm = ln_gamma_half(df + 1) - ln_gamma_half(df) - 0.5 * (v * PI).ln();
    let density = move |s: f64| (ln_norm - (v + 1.0) / 2.0 * (1.0 + s * s / v).ln()).exp();
    let mass = integrate(&density, 0.0, t.abs());
    if t >= 0.0 {
        0.5 - mass
    } else {
        0.5 + mass
    }
}

/// Σ (O − E)² / E with E from the margins.
pub fn chi_square_brute(table: [[u64; 2]; 2]) -> f64 {
    let n: f64 = table.iter().flatten().sum::<u64>() as f64;
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let row_total = (table[i][0] + table[i][1]) as f64;
            let col_total = (table[0][j] + table[1][j]) as f64;
            let expected = row_total * col_total / n;
            stat += (obs as f64 - expected).powi(2) / expected;
        }
    }
    stat
}

/// Textbook two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kappa from a k×k confusion matrix.
pub fn kappa_by_hand(a: &[usize], b: &[usize], k: usize) -> f64 {
    let n = a.len() as f64;
    let mut m = vec![vec![0.0; k]; k];
    for (&i, &j) in a.iter().zip(b) {
        m[i][j] += 1.0;
    }
    let po = (0..k).map(|i| m[i][i]).sum::<f64>() / n;
    let pe = (0..k)
        .map(|c| {
            let row: f64 = m[c].iter().sum();
            let col: f64 = m.iter().map(|r| r[c]).sum();
            row * col / (n * n)
        })
        .sum::<f64>();
    if pe == 1.0 {
        return if po == 1.0 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

pub const CHI2_GRID_DOF: [u32; 7] = [1, 2, 3, 4, 5, 10, 20];
pub const CHI2_GRID_X: [f64; 10] = [0.1, 0.5, 1.0, 2.0, 3.841459, 5.0, 6.634897, 10.0, 20.0, 40.0];
pub const T_GRID_DF: [u32; 7] = [1, 2, 3, 5, 10, 30, 100];
pub const T_GRID_T: [f64; 8] = [-2.0, 0.0, 0.5, 1.0, 2.0, 2.576, 3.0, 5.0];

/// Largest absolute gap between the library and the quadrature oracle over
/// the fixed grids, as (chi2 gap, t gap).
pub fn survival_grid_error() -> (f64, f64) {
    let mut chi = 0.0f64;
    for &k in &CHI2_GRID_DOF {
        for &x in &CHI2_GRID_X {
            let lib: f64 = ppulse::stats::chi2_sf(x, k);
            chi = chi.max((lib - chi2_sf_quadrature(x, k)).abs());
        }
    }
    let mut t_err = 0.0f64;
    for &df in &T_GRID_DF {
        for &t in &T_GRID_T {
            let lib: f64 = ppulse::stats::student_t_sf(t, df as f64);
            t_err = t_err.max((lib - student_t_sf_quadrature(t, df)).abs());
        }
    }
    (chi, t_err)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }
}
