//! Scalar abstraction shared by the numeric code.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serializer;

/// Floating-point type the statistics are computed in.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn from_count<F: Scalar>(n: usize) -> F {
    F::from_usize(n).expect("count representable in scalar type")
}

/// Neumaier-compensated sum.
pub fn compensated_sum<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean with compensated summation; `None` for an empty input.
pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    Some(compensated_sum(values.iter().copied()) / from_count(values.len()))
}

/// Rounds to six decimals when serializing report numbers.
pub fn round6<F: Scalar, S: Serializer>(value: &F, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_f64(round_to(value.to_f64().unwrap_or(f64::NAN), 6))
}

pub fn round6_opt<F: Scalar, S: Serializer>(
    value: &Option<F>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => round6(v, serializer),
        None => serializer.serialize_none(),
    }
}

pub fn round_to(x: f64, places: i32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(places);
    let r = (x * scale).round() / scale;
    // avoid "-0.0" in reports
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn round6_map<K: serde::Serialize, S: Serializer>(
    map: &std::collections::BTreeMap<K, f64>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = serializer.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(k, &round_to(*v, 6))?;
    }
    m.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(&[]), None);
        assert_eq!(mean(&[1.0f32, 2.0]), Some(1.5));
    }

    #[test]
    fn rounding_drops_negative_zero() {
        assert_eq!(round_to(-0.0000001, 6).to_bits(), 0.0f64.to_bits());
        assert_eq!(round_to(0.1234567, 6), 0.123457);
    }
}
