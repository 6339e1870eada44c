//! Run-length encoding: maximal runs stored as a value and a count.

use super::CodecError;

/// Splits into maximal runs; counts are all >= 1 and adjacent values differ.
pub fn rle_encode(values: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let mut run_values = Vec::new();
    let mut run_counts = Vec::new();
    for &v in values {
        match run_values.last() {
            Some(&last) if last == v => *run_counts.last_mut().unwrap() += 1,
            _ => {
                run_values.push(v);
                run_counts.push(1);
            }
        }
    }
    (run_values, run_counts)
}

/// Sequential expansion oracle for the group-parallel decode kernel.
pub fn rle_decode(run_values: &[i64], run_counts: &[i64]) -> Result<Vec<i64>, CodecError> {
    if run_values.len() != run_counts.len() {
        return Err(CodecError::BadParams("values/counts length mismatch"));
    }
    let mut total: usize = 0;
    for &c in run_counts {
        if c < 0 {
            return Err(CodecError::CountOverflow);
        }
        total = total
            .checked_add(c as usize)
            .ok_or(CodecError::CountOverflow)?;
    }
    let mut out = Vec::with_capacity(total);
    for (&v, &c) in run_values.iter().zip(run_counts) {
        for _ in 0..c {
            out.push(v);
        }
    }
    Ok(out)
}
