//! Chi-square association on 2×2 tables, point-biserial correlation and
//! Cohen's kappa, each with the p-value or agreement terms it needs.
//!
//! Everything here is generic over the floating-point scalar; the crate root
//! exposes `f64` aliases for the result types.

mod special;

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::numeric::{compensated_sum, from_count, lit, round6, Scalar};

pub use special::{beta_inc, chi2_sf, gamma_p, gamma_q, ln_gamma, student_t_sf};

/// 2×2 contingency counts, `table[row][col]`.
pub type Table2x2 = [[u64; 2]; 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("degenerate 2x2 table {table:?}: every row and column needs a positive total")]
    DegenerateTable { table: Table2x2 },
    #[error("degenerate input: {reason}")]
    DegenerateInput {
        reason: String,
        group_sizes: [usize; 2],
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationResult<F: Scalar> {
    #[serde(serialize_with = "round6")]
    pub chi2: F,
    pub dof: u32,
    #[serde(serialize_with = "round6")]
    pub p_value: F,
    pub n: u64,
    pub table: Table2x2,
    pub yates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult<F: Scalar> {
    #[serde(serialize_with = "round6")]
    pub r: F,
    #[serde(serialize_with = "round6")]
    pub t_stat: F,
    #[serde(serialize_with = "round6")]
    pub p_value: F,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementResult<F: Scalar> {
    #[serde(serialize_with = "round6")]
    pub kappa: F,
    #[serde(serialize_with = "round6")]
    pub observed_agreement: F,
    #[serde(serialize_with = "round6")]
    pub expected_agreement: F,
    pub n: usize,
}

/// Pearson chi-square without continuity correction.
pub fn chi_square_2x2<F: Scalar>(table: Table2x2) -> Result<AssociationResult<F>, StatsError> {
    chi_square_2x2_with(table, false)
}

/// Pearson chi-square on a 2×2 table, optionally with Yates' correction.
pub fn chi_square_2x2_with<F: Scalar>(
    table: Table2x2,
    yates: bool,
) -> Result<AssociationResult<F>, StatsError> {
    let [[a, b], [c, d]] = table;
    let rows = [a + b, c + d];
    let cols = [a + c, b + d];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::DegenerateTable { table });
    }
    let n = a + b + c + d;
    let f = |v: u64| -> F { F::from_u64(v).expect("count fits scalar") };
    let cross = f(a) * f(d) - f(b) * f(c);
    let mut dev = cross.abs();
    if yates {
        dev = (dev - f(n) / lit(2.0)).max(F::zero());
    }
    let denom = f(rows[0]) * f(rows[1]) * f(cols[0]) * f(cols[1]);
    let chi2 = f(n) * dev * dev / denom;
    Ok(AssociationResult {
        chi2,
        dof: 1,
        p_value: chi2_sf(chi2, 1),
        n,
        table,
        yates,
    })
}

/// Point-biserial correlation between a binary indicator and a score, with
/// a two-sided t-test on `n − 2` degrees of freedom.
///
/// Uses the population standard deviation of the scores, which makes `r`
/// identical to Pearson's correlation of the 0/1 encoding.
pub fn point_biserial<F: Scalar>(
    binary: &[bool],
    scores: &[F],
) -> Result<CorrelationResult<F>, StatsError> {
    if binary.len() != scores.len() {
        return Err(StatsError::LengthMismatch {
            left: binary.len(),
            right: scores.len(),
        });
    }
    let n = scores.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    let n1 = binary.iter().filter(|&&b| b).count();
    let n0 = n - n1;
    let sizes = [n0, n1];
    if n1 == 0 || n0 == 0 {
        return Err(StatsError::DegenerateInput {
            reason: "one group is empty".into(),
            group_sizes: sizes,
        });
    }
    let group_mean = |flag: bool, count: usize| -> F {
        let s = compensated_sum(
            binary
                .iter()
                .zip(scores)
                .filter(|(b, _)| **b == flag)
                .map(|(_, &s)| s),
        );
        s / from_count(count)
    };
    let m1 = group_mean(true, n1);
    let m0 = group_mean(false, n0);
    let nf: F = from_count(n);
    let mean = compensated_sum(scores.iter().copied()) / nf;
    let var = compensated_sum(scores.iter().map(|&s| (s - mean) * (s - mean))) / nf;
    if !(var > F::zero()) {
        return Err(StatsError::DegenerateInput {
            reason: "scores have zero variance".into(),
            group_sizes: sizes,
        });
    }
    let p: F = from_count::<F>(n1) / nf;
    let q: F = from_count::<F>(n0) / nf;
    let r = ((m1 - m0) / var.sqrt() * (p * q).sqrt())
        .max(-F::one())
        .min(F::one());
    let df = nf - lit(2.0);
    let one_minus = F::one() - r * r;
    let t_stat = if one_minus <= F::zero() {
        F::infinity() * r.signum()
    } else {
        r * (df / one_minus).sqrt()
    };
    let p_value = (lit::<F>(2.0) * student_t_sf(t_stat.abs(), df)).min(F::one());
    Ok(CorrelationResult {
        r,
        t_stat,
        p_value,
        n,
    })
}

/// Cohen's kappa between two raters' category assignments.
///
/// When chance agreement is 1 (both raters used one identical category)
/// kappa is defined as 1 if observed agreement is 1, else 0.
pub fn cohen_kappa<F: Scalar, L: Eq + Hash>(
    labels_a: &[L],
    labels_b: &[L],
) -> Result<AgreementResult<F>, StatsError> {
    if labels_a.len() != labels_b.len() {
        return Err(StatsError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    let n = labels_a.len();
    if n == 0 {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let mut counts: HashMap<&L, [usize; 2]> = HashMap::new();
    for l in labels_a {
        counts.entry(l).or_default()[0] += 1;
    }
    for l in labels_b {
        counts.entry(l).or_default()[1] += 1;
    }
    let nf: F = from_count(n);
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count();
    let po = from_count::<F>(agree) / nf;
    // sort terms so the sum does not depend on hash iteration order
    let mut terms: Vec<F> = counts
        .values()
        .map(|&[ca, cb]| from_count::<F>(ca) * from_count::<F>(cb) / (nf * nf))
        .collect();
    terms.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let pe = compensated_sum(terms).min(F::one());
    let kappa = if pe >= F::one() {
        if po >= F::one() {
            F::one()
        } else {
            F::zero()
        }
    } else {
        (po - pe) / (F::one() - pe)
    };
    Ok(AgreementResult {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_table_has_zero_statistic() {
        let res = chi_square_2x2::<f64>([[4, 4], [4, 4]]).unwrap();
        assert_eq!(res.chi2, 0.0);
        assert_eq!(res.p_value, 1.0);
        assert_eq!(res.n, 16);
        assert_eq!(res.dof, 1);
    }

    #[test]
    fn perfect_association_table() {
        let res = chi_square_2x2::<f64>([[8, 0], [0, 8]]).unwrap();
        assert!((res.chi2 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn worked_table_matches_expected_counts_oracle() {
        // Σ(O−E)²/E by hand: E = [[6.5,5.5],[6.5,5.5]] → 8.2237...
        let res = chi_square_2x2::<f64>([[10, 2], [3, 9]]).unwrap();
        assert!((res.chi2 - 8.22).abs() < 0.01, "{}", res.chi2);
    }

    #[test]
    fn zero_marginal_is_degenerate() {
        let err = chi_square_2x2::<f64>([[3, 0], [5, 0]]).unwrap_err();
        assert_eq!(
            err,
            StatsError::DegenerateTable {
                table: [[3, 0], [5, 0]]
            }
        );
    }

    #[test]
    fn yates_shrinks_statistic() {
        let plain = chi_square_2x2::<f64>([[10, 2], [3, 9]]).unwrap();
        let yates = chi_square_2x2_with::<f64>([[10, 2], [3, 9]], true).unwrap();
        assert!(yates.chi2 < plain.chi2);
        assert!(yates.yates);
        // |ad − bc| below n/2 clamps to zero
        let tiny = chi_square_2x2_with::<f64>([[5, 4], [4, 5]], true).unwrap();
        assert_eq!(tiny.chi2, 0.0);
    }

    #[test]
    fn perfect_separation_gives_unit_r() {
        let res =
            point_biserial(&[true, true, false, false], &[1.0f64, 1.0, 0.0, 0.0]).unwrap();
        assert!((res.r - 1.0).abs() < 1e-15);
        assert_eq!(res.p_value, 0.0);
    }

    #[test]
    fn equal_group_means_give_zero_r() {
        let res = point_biserial(&[true, false, true, false], &[5.0f64, 5.0, 1.0, 1.0]).unwrap();
        assert_eq!(res.r, 0.0);
        assert!((res.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_biserial_degenerate_inputs() {
        let one_group = point_biserial(&[true, true, true], &[1.0f64, 2.0, 3.0]);
        assert!(matches!(
            one_group,
            Err(StatsError::DegenerateInput { group_sizes: [0, 3], .. })
        ));
        let flat = point_biserial(&[true, false, true], &[2.0f64, 2.0, 2.0]);
        assert!(matches!(flat, Err(StatsError::DegenerateInput { .. })));
        let short = point_biserial(&[true, false], &[2.0f64, 1.0]);
        assert!(matches!(short, Err(StatsError::TooFewObservations { .. })));
        let mismatch = point_biserial(&[true, false, true], &[2.0f64, 1.0]);
        assert!(matches!(mismatch, Err(StatsError::LengthMismatch { .. })));
    }

    #[test]
    fn kappa_worked_examples() {
        let same = cohen_kappa::<f64, _>(&["P", "N", "N"], &["P", "N", "N"]).unwrap();
        assert_eq!(same.kappa, 1.0);

        let res = cohen_kappa::<f64, _>(&["P", "P", "N", "N"], &["P", "N", "N", "N"]).unwrap();
        assert!((res.observed_agreement - 0.75).abs() < 1e-15);
        assert!((res.expected_agreement - 0.5).abs() < 1e-15);
        assert!((res.kappa - 0.5).abs() < 1e-15);

        let disjoint = cohen_kappa::<f64, _>(&["P", "P"], &["N", "N"]).unwrap();
        assert_eq!(disjoint.observed_agreement, 0.0);
        assert_eq!(disjoint.expected_agreement, 0.0);
        assert_eq!(disjoint.kappa, 0.0);
    }

    #[test]
    fn kappa_with_single_shared_category() {
        let res = cohen_kappa::<f64, _>(&[1, 1, 1], &[1, 1, 1]).unwrap();
        assert_eq!(res.expected_agreement, 1.0);
        assert_eq!(res.kappa, 1.0);
    }

    #[test]
    fn kappa_length_mismatch() {
        let err = cohen_kappa::<f64, _>(&[1, 2], &[1]).unwrap_err();
        assert_eq!(err, StatsError::LengthMismatch { left: 2, right: 1 });
    }

    #[test]
    fn single_precision_statistics() {
        let res = chi_square_2x2::<f32>([[8, 0], [0, 8]]).unwrap();
        assert!((res.chi2 - 16.0).abs() < 1e-4);
        let k = cohen_kappa::<f32, _>(&["P", "P", "N", "N"], &["P", "N", "N", "N"]).unwrap();
        assert!((k.kappa - 0.5).abs() < 1e-6);
    }
}
