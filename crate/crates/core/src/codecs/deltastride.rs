//! DeltaStride: arithmetic-run encoding as (start, stride, count) triples,
//! for nearly monotone key columns.
//!
//! Runs are greedy and maximal: the stride is fixed by a run's first two
//! elements and the run extends while the next first-difference matches.
//! Singleton runs get stride 0.

use super::CodecError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StrideRuns {
    pub starts: Vec<i64>,
    pub strides: Vec<i64>,
    pub counts: Vec<i64>,
}

pub fn deltastride_encode(values: &[i64]) -> StrideRuns {
    let mut runs = StrideRuns::default();
    let mut i = 0;
    while i < values.len() {
        let start = values[i];
        // A run needs a representable first difference; otherwise the pair
        // splits into singletons.
        let stride = if i + 1 < values.len() {
            values[i + 1].checked_sub(values[i])
        } else {
            None
        };
        match stride {
            Some(stride) => {
                let mut len = 2;
                while i + len < values.len()
                    && values[i + len].checked_sub(values[i + len - 1]) == Some(stride)
                {
                    len += 1;
                }
                runs.starts.push(start);
                runs.strides.push(stride);
                runs.counts.push(len as i64);
                i += len;
            }
            None => {
                runs.starts.push(start);
                runs.strides.push(0);
                runs.counts.push(1);
                i += 1;
            }
        }
    }
    runs
}

/// Sequential expansion oracle: element `j` of run `g` is
/// `starts[g] + j * strides[g]` (wrapping; exact because the true values fit).
pub fn deltastride_decode(runs: &StrideRuns) -> Result<Vec<i64>, CodecError> {
    if runs.starts.len() != runs.strides.len() || runs.starts.len() != runs.counts.len() {
        return Err(CodecError::BadParams("run stream length mismatch"));
    }
    let mut out = Vec::new();
    for g in 0..runs.starts.len() {
        let count = runs.counts[g];
        if count < 0 {
            return Err(CodecError::CountOverflow);
        }
        for j in 0..count {
            out.push(runs.starts[g].wrapping_add(runs.strides[g].wrapping_mul(j)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_arithmetic_runs() {
        let runs = deltastride_encode(&[10, 11, 12, 20, 22, 24]);
        assert_eq!(runs.starts, vec![10, 20]);
        assert_eq!(runs.strides, vec![1, 2]);
        assert_eq!(runs.counts, vec![3, 3]);
    }

    #[test]
    fn singleton() {
        let runs = deltastride_encode(&[5]);
        assert_eq!(runs.starts, vec![5]);
        assert_eq!(runs.strides, vec![0]);
        assert_eq!(runs.counts, vec![1]);
    }

    #[test]
    fn runs_with_count_two_or_more_have_constant_difference() {
        let values: Vec<i64> = vec![1, 2, 3, 3, 3, 7, 9, 11, 4];
        let runs = deltastride_encode(&values);
        assert_eq!(deltastride_decode(&runs).unwrap(), values);
        // maximality: a run never continues into the next one's start
        let mut idx = 0usize;
        for g in 0..runs.starts.len() {
            idx += runs.counts[g] as usize;
            if idx < values.len() && runs.counts[g] >= 2 {
                let last = runs.starts[g] + runs.strides[g] * (runs.counts[g] - 1);
                assert_ne!(values[idx] - last, runs.strides[g]);
            }
        }
    }

    #[test]
    fn monotone_keys_with_duplicates_round_trip() {
        // each key repeated 4 times, then a jump of 2
        let mut values = Vec::new();
        let mut key = 1_000i64;
        for i in 0..5_000 {
            if i % 4 == 0 {
                key += 2;
            }
            values.push(key);
        }
        let runs = deltastride_encode(&values);
        assert_eq!(deltastride_decode(&runs).unwrap(), values);
        assert!(runs.starts.len() < values.len() / 2);
    }

    #[test]
    fn overflowing_difference_splits_run() {
        let values = vec![i64::MIN, i64::MAX, i64::MAX - 1];
        let runs = deltastride_encode(&values);
        assert_eq!(deltastride_decode(&runs).unwrap(), values);
    }
}
