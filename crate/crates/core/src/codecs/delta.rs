//! Delta encoding: each value becomes its difference from the previous one.
//!
//! The first output is 0 by convention and the first value is kept as the
//! base, so decode is exactly an inclusive scan plus the base.

use super::CodecError;

pub fn delta_encode(values: &[i64]) -> Result<(Vec<i64>, i64), CodecError> {
    if values.is_empty() {
        return Err(CodecError::EmptyColumn);
    }
    let base = values[0];
    let mut out = Vec::with_capacity(values.len());
    out.push(0);
    for w in values.windows(2) {
        let d = w[1]
            .checked_sub(w[0])
            .ok_or(CodecError::ArithmeticOverflow)?;
        out.push(d);
    }
    Ok((out, base))
}

/// Inclusive wrapping scan plus base. Wrapping is exact here: every true
/// value fit i64 when it was encoded.
pub fn delta_decode(deltas: &[i64], base: i64) -> Vec<i64> {
    let mut acc = base;
    deltas
        .iter()
        .map(|&d| {
            acc = acc.wrapping_add(d);
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_differences() {
        let (deltas, base) = delta_encode(&[10, 11, 13]).unwrap();
        assert_eq!(base, 10);
        assert_eq!(deltas, vec![0, 1, 2]);
    }

    #[test]
    fn constant_column_is_all_zero() {
        let (deltas, _) = delta_encode(&[4, 4, 4, 4]).unwrap();
        assert_eq!(deltas, vec![0, 0, 0, 0]);
    }

    #[test]
    fn round_trip_on_monotone_data() {
        let values: Vec<i64> = (0..10_000)
            .scan(0i64, |acc, i| {
                *acc += (i * 31 + 5) % 17;
                Some(*acc)
            })
            .collect();
        let (deltas, base) = delta_encode(&values).unwrap();
        assert_eq!(delta_decode(&deltas, base), values);
    }

    #[test]
    fn difference_overflow_detected() {
        assert_eq!(
            delta_encode(&[i64::MIN, i64::MAX]),
            Err(CodecError::ArithmeticOverflow)
        );
    }
}
