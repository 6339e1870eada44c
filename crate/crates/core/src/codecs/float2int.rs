//! Float2Int: exact decimal scaling of doubles to integers.
//!
//! Picks the smallest power-of-ten exponent `d <= 18` such that
//! `round(x * 10^d) / 10^d` reproduces every value bit-exactly; when none
//! works the caller falls back to Raw. Non-finite values and -0.0 are not
//! decimal-representable under this contract.

use super::CodecError;
use serde::Serialize;

pub const MAX_DECIMAL_SCALE: u8 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Float2IntParams {
    pub decimal_scale: u8,
}

/// 10^d as f64; exact for d <= 18.
pub fn pow10(d: u8) -> f64 {
    const TABLE: [f64; 19] = [
        1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
        1e17, 1e18,
    ];
    TABLE[d as usize]
}

// Conservative i64 cast guard: the nearest f64 below 2^63.
const I64_F64_LIMIT: f64 = 9.223372036854775e18;

fn try_scale(x: f64, d: u8) -> Option<i64> {
    if !x.is_finite() {
        return None;
    }
    let scaled = x * pow10(d);
    if scaled.is_nan() || scaled.abs() >= I64_F64_LIMIT {
        return None;
    }
    let int = scaled.round();
    let as_i64 = int as i64;
    let back = (as_i64 as f64) / pow10(d);
    if back.to_bits() == x.to_bits() {
        Some(as_i64)
    } else {
        None
    }
}

pub fn float2int_encode(values: &[f64]) -> Result<(Vec<i64>, Float2IntParams), CodecError> {
    'scale: for d in 0..=MAX_DECIMAL_SCALE {
        let mut ints = Vec::with_capacity(values.len());
        for &x in values {
            match try_scale(x, d) {
                Some(v) => ints.push(v),
                None => continue 'scale,
            }
        }
        return Ok((ints, Float2IntParams { decimal_scale: d }));
    }
    Err(CodecError::NotDecimalRepresentable)
}

/// Decode of one element; bit-exactness is guaranteed by the encoder.
pub fn float2int_decode_value(int: i64, decimal_scale: u8) -> f64 {
    (int as f64) / pow10(decimal_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_decimal_money_values() {
        let (ints, params) = float2int_encode(&[0.04, 0.07, 0.00]).unwrap();
        assert_eq!(params.decimal_scale, 2);
        assert_eq!(ints, vec![4, 7, 0]);
    }

    #[test]
    fn integral_floats_use_scale_zero() {
        let (ints, params) = float2int_encode(&[1.0, 2.0]).unwrap();
        assert_eq!(params.decimal_scale, 0);
        assert_eq!(ints, vec![1, 2]);
    }

    #[test]
    fn pi_needs_fifteen_digits() {
        // Oracle: 17 significant decimal digits identify a double, so pi
        // becomes representable once the scale reaches 15 and not before.
        for d in 0..15 {
            assert!(try_scale(std::f64::consts::PI, d).is_none(), "d={d}");
        }
        assert!(try_scale(std::f64::consts::PI, 15).is_some());
        let (ints, params) = float2int_encode(&[std::f64::consts::PI]).unwrap();
        assert_eq!(params.decimal_scale, 15);
        assert_eq!(
            float2int_decode_value(ints[0], 15).to_bits(),
            std::f64::consts::PI.to_bits()
        );
    }

    #[test]
    fn out_of_range_magnitude_is_not_representable() {
        // Oracle: 1e19 exceeds i64 even at scale 0, and larger scales only
        // grow the integer; no d can work.
        for d in 0..=MAX_DECIMAL_SCALE {
            assert!(try_scale(1e19, d).is_none(), "d={d}");
        }
        assert_eq!(
            float2int_encode(&[1e19]),
            Err(CodecError::NotDecimalRepresentable)
        );
    }

    #[test]
    fn non_finite_and_negative_zero_rejected() {
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY, -0.0] {
            assert_eq!(
                float2int_encode(&[bad]),
                Err(CodecError::NotDecimalRepresentable)
            );
        }
    }

    #[test]
    fn random_two_decimal_data_round_trips() {
        let values: Vec<f64> = (0..50_000)
            .map(|i| ((i * 7919) % 100_000) as f64 / 100.0)
            .collect();
        let (ints, params) = float2int_encode(&values).unwrap();
        assert!(params.decimal_scale <= 2);
        for (i, &x) in values.iter().enumerate() {
            let back = float2int_decode_value(ints[i], params.decimal_scale);
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn negative_values_round_trip() {
        let values = vec![-12.5, 3.25, -0.75];
        let (ints, params) = float2int_encode(&values).unwrap();
        for (i, &x) in values.iter().enumerate() {
            assert_eq!(
                float2int_decode_value(ints[i], params.decimal_scale).to_bits(),
                x.to_bits()
            );
        }
    }
}
