//! Deterministic, seeded benchmark data generators.
//!
//! The generator stream is fixed for cross-run reproducibility: a splitmix64
//! expansion of the seed initializes a xoshiro256** state, so identical specs
//! produce identical bytes on every platform.

use crate::datamodel::TypedColumn;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// xoshiro256** seeded through splitmix64.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(&mut sm);
        }
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, bound)`; `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        // multiply-shift bounded sampling; bias is negligible at 64 bits
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform in `[lo, hi]` inclusive.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn kind_rng(seed: u64, kind_tag: u64) -> Rng {
    Rng::seeded(seed ^ kind_tag.wrapping_mul(0x9E3779B97F4A7C15))
}

/// Uniform int64 values in `[0, 2^bit_width)`.
pub fn gen_uniform_bits(rows: usize, bit_width: u8, seed: u64) -> TypedColumn {
    assert!((1..=63).contains(&bit_width), "bit_width must be in 1..=63");
    let mut rng = kind_rng(seed, 1);
    let values: Vec<i64> = (0..rows)
        .map(|_| (rng.next_u64() >> (64 - bit_width)) as i64)
        .collect();
    TypedColumn::from_i64(&values)
}

/// Run-length shape of a generated RLE column.
#[derive(Debug, Clone, PartialEq)]
pub enum RunDist {
    /// All runs have the same length.
    EvenX(u64),
    /// Run lengths uniform in `[lo, hi]`.
    RandomRange(u64, u64),
    /// Mostly singleton runs, with `frac` of runs having length `big`.
    Outlier { big: u64, frac: f64 },
    /// Concatenation of two sub-distributions, half the groups each.
    Mixed(Box<RunDist>, Box<RunDist>),
}

fn run_lengths(n_groups: usize, dist: &RunDist, rng: &mut Rng) -> Vec<u64> {
    match dist {
        RunDist::EvenX(x) => {
            assert!(*x >= 1);
            vec![*x; n_groups]
        }
        RunDist::RandomRange(lo, hi) => {
            assert!(*lo >= 1 && lo <= hi);
            (0..n_groups).map(|_| rng.range(*lo, *hi)).collect()
        }
        RunDist::Outlier { big, frac } => {
            assert!(*big >= 1 && (0.0..=1.0).contains(frac));
            (0..n_groups)
                .map(|_| if rng.f64() < *frac { *big } else { 1 })
                .collect()
        }
        RunDist::Mixed(a, b) => {
            let first = n_groups / 2;
            let mut lengths = run_lengths(first, a, rng);
            lengths.extend(run_lengths(n_groups - first, b, rng));
            lengths
        }
    }
}

/// A run-length column with `n_groups` runs shaped by `dist`. Adjacent run
/// values always differ, so RLE recovers exactly the requested runs.
pub fn gen_rle_groups(n_groups: usize, dist: &RunDist, seed: u64) -> TypedColumn {
    let mut rng = kind_rng(seed, 2);
    let lengths = run_lengths(n_groups, dist, &mut rng);
    let mut values = Vec::with_capacity(lengths.iter().sum::<u64>() as usize);
    let mut prev: Option<i64> = None;
    for len in lengths {
        let mut v = rng.below(1 << 32) as i64;
        if prev == Some(v) {
            v = v.wrapping_add(1);
        }
        prev = Some(v);
        for _ in 0..len {
            values.push(v);
        }
    }
    TypedColumn::from_i64(&values)
}

/// I.i.d. byte symbols `0, 1, ...` with the given marginal frequencies.
pub fn gen_skewed_symbols(n: usize, freq_ratios: &[f64], seed: u64) -> TypedColumn {
    assert!(!freq_ratios.is_empty() && freq_ratios.len() <= 256);
    let total: f64 = freq_ratios.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "ratios must sum to 1");
    let mut cum = Vec::with_capacity(freq_ratios.len());
    let mut acc = 0.0;
    for r in freq_ratios {
        acc += r;
        cum.push(acc);
    }
    let mut rng = kind_rng(seed, 3);
    let payload: Vec<u8> = (0..n)
        .map(|_| {
            let u = rng.f64();
            cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1) as u8
        })
        .collect();
    TypedColumn::from_fixed(1, payload).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpchColumnKind {
    /// Non-decreasing keys with short repeats (lineitem order-key shape).
    OrderKeyLike,
    /// ~2,500 distinct day numbers.
    DateLike,
    /// Two-decimal money values.
    DecimalLike,
    /// Sentences over a bounded word pool joined by spaces and periods.
    CommentLike,
    /// Uniform keys in a bounded range.
    FkLike,
}

/// Word pool used by CommentLike columns; deterministic synthetic words,
/// unique for any size up to 9025.
pub fn comment_word_pool(size: usize) -> Vec<String> {
    const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwz";
    const VOWELS: &[u8] = b"aeiou";
    let syllables: Vec<String> = CONSONANTS
        .iter()
        .flat_map(|&c| {
            VOWELS
                .iter()
                .map(move |&v| format!("{}{}", c as char, v as char))
        })
        .collect();
    let k = syllables.len();
    assert!(size <= k * k, "pool size limited to {}", k * k);
    (0..size)
        .map(|i| format!("{}{}", syllables[i / k], syllables[i % k]))
        .collect()
}

/// Default CommentLike pool size, chosen so the realized token set (word
/// plus trailing delimiter forms) lands in (2048, 4096] and indices pack to
/// 12 bits on corpora of a few ten thousand rows.
pub const COMMENT_POOL_SIZE: usize = 1300;

pub fn gen_tpch_like(kind: TpchColumnKind, rows: usize, seed: u64) -> TypedColumn {
    assert!(rows >= 1);
    match kind {
        TpchColumnKind::OrderKeyLike => {
            let mut rng = kind_rng(seed, 10);
            let mut values = Vec::with_capacity(rows);
            let mut key = 1i64;
            while values.len() < rows {
                let repeats = rng.range(1, 7) as usize;
                for _ in 0..repeats.min(rows - values.len()) {
                    values.push(key);
                }
                key += rng.range(1, 8) as i64;
            }
            TypedColumn::from_i64(&values)
        }
        TpchColumnKind::DateLike => {
            let mut rng = kind_rng(seed, 11);
            let values: Vec<i64> = (0..rows).map(|_| 8035 + rng.below(2500) as i64).collect();
            TypedColumn::from_i64(&values)
        }
        TpchColumnKind::DecimalLike => {
            let mut rng = kind_rng(seed, 12);
            let values: Vec<f64> = (0..rows)
                .map(|_| rng.below(100_000) as f64 / 100.0)
                .collect();
            TypedColumn::from_f64(&values)
        }
        TpchColumnKind::CommentLike => gen_comments(rows, COMMENT_POOL_SIZE, seed),
        TpchColumnKind::FkLike => {
            let mut rng = kind_rng(seed, 13);
            let bound = (rows as u64 / 4).max(2);
            let values: Vec<i64> = (0..rows).map(|_| 1 + rng.below(bound) as i64).collect();
            TypedColumn::from_i64(&values)
        }
    }
}

/// CommentLike generator with an explicit word pool size: each comment is
/// two sentences of 4..=10 pool words, so every word can occur mid-sentence,
/// at a sentence end, and at the comment end.
pub fn gen_comments(rows: usize, pool_size: usize, seed: u64) -> TypedColumn {
    let pool = comment_word_pool(pool_size);
    let mut rng = kind_rng(seed, 14);
    let mut strings = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut s = String::new();
        for sentence in 0..2 {
            if sentence > 0 {
                s.push(' ');
            }
            let words = rng.range(4, 10);
            for w in 0..words {
                if w > 0 {
                    s.push(' ');
                }
                s.push_str(&pool[rng.below(pool.len() as u64) as usize]);
            }
            s.push('.');
        }
        strings.push(s);
    }
    TypedColumn::from_strings(&strings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{bitpack_encode, rle_encode, strdict_encode};

    #[test]
    fn uniform_bits_stay_in_range_and_pack() {
        let col = gen_uniform_bits(20_000, 25, 7);
        let values = col.as_i64().unwrap();
        assert!(values.iter().all(|&v| (0..1 << 25).contains(&v)));
        let (_, params) = bitpack_encode(&values).unwrap();
        assert_eq!(params.bit_width, 25);
        let one_bit = gen_uniform_bits(1000, 1, 7).as_i64().unwrap();
        assert!(one_bit.iter().all(|&v| v == 0 || v == 1));
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in [
            TpchColumnKind::OrderKeyLike,
            TpchColumnKind::DateLike,
            TpchColumnKind::DecimalLike,
            TpchColumnKind::CommentLike,
            TpchColumnKind::FkLike,
        ] {
            let a = gen_tpch_like(kind, 500, 99);
            let b = gen_tpch_like(kind, 500, 99);
            assert_eq!(a, b, "{kind:?} must be reproducible");
        }
        assert_eq!(gen_uniform_bits(100, 13, 5), gen_uniform_bits(100, 13, 5));
    }

    #[test]
    fn even2_produces_pairs() {
        let col = gen_rle_groups(3, &RunDist::EvenX(2), 1);
        let values = col.as_i64().unwrap();
        assert_eq!(values.len(), 6);
        assert_eq!(values[0], values[1]);
        assert_eq!(values[2], values[3]);
        assert_eq!(values[4], values[5]);
        assert_ne!(values[1], values[2]);
        assert_ne!(values[3], values[4]);
    }

    #[test]
    fn rle_recovers_requested_run_shape() {
        let col = gen_rle_groups(5_000, &RunDist::RandomRange(1, 9), 3);
        let (_, counts) = rle_encode(&col.as_i64().unwrap());
        assert_eq!(counts.len(), 5_000);
        assert!(counts.iter().all(|&c| (1..=9).contains(&c)));

        let col = gen_rle_groups(
            5_000,
            &RunDist::Outlier {
                big: 1024,
                frac: 0.01,
            },
            4,
        );
        let (_, counts) = rle_encode(&col.as_i64().unwrap());
        assert_eq!(counts.len(), 5_000);
        assert!(counts.iter().all(|&c| c == 1 || c == 1024));
        let outliers = counts.iter().filter(|&&c| c == 1024).count();
        assert!(outliers > 10 && outliers < 150, "got {outliers} outliers");
    }

    #[test]
    fn skewed_symbols_match_requested_entropy() {
        let n = 1_000_000;
        let col = gen_skewed_symbols(n, &[0.9, 0.1], 11);
        let ones = col.payload().iter().filter(|&&b| b == 1).count() as f64;
        let p = ones / n as f64;
        assert!((p - 0.1).abs() < 0.002);
        // empirical entropy within 1% of the 0.469-bit target
        let h = -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        let target = 0.46899559358928133;
        assert!((h - target).abs() / target < 0.01, "H = {h}");

        let uniform = gen_skewed_symbols(100_000, &[0.25; 4], 12);
        let mut hist = [0f64; 4];
        for &b in uniform.payload() {
            hist[b as usize] += 1.0;
        }
        let h: f64 = hist
            .iter()
            .map(|&c| {
                let p = c / 100_000.0;
                -p * p.log2()
            })
            .sum();
        assert!((h - 2.0).abs() < 0.01);
    }

    #[test]
    fn comment_pool_is_unique_and_bounded() {
        use std::collections::HashSet;
        let pool = comment_word_pool(4096);
        let distinct: HashSet<&String> = pool.iter().collect();
        assert_eq!(distinct.len(), 4096);
    }

    #[test]
    fn comment_corpus_token_pool_lands_in_12_bit_range() {
        let col = gen_tpch_like(TpchColumnKind::CommentLike, 20_000, 5);
        let enc = strdict_encode(col.offsets().unwrap(), col.payload());
        let tc = enc.token_count();
        assert!(tc > 2048 && tc <= 4096, "token count {tc}");
    }

    #[test]
    fn decimal_like_is_two_decimal() {
        let col = gen_tpch_like(TpchColumnKind::DecimalLike, 10_000, 8);
        let (_, params) = crate::codecs::float2int_encode(&col.as_f64().unwrap()).unwrap();
        assert!(params.decimal_scale <= 2);
    }

    #[test]
    fn order_keys_are_non_decreasing_with_repeats() {
        let col = gen_tpch_like(TpchColumnKind::OrderKeyLike, 10_000, 2);
        let values = col.as_i64().unwrap();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        assert!(values.windows(2).any(|w| w[0] == w[1]));
    }

    #[test]
    fn date_like_has_bounded_cardinality() {
        use std::collections::HashSet;
        let col = gen_tpch_like(TpchColumnKind::DateLike, 50_000, 6);
        let distinct: HashSet<i64> = col.as_i64().unwrap().into_iter().collect();
        assert!(distinct.len() <= 2500);
        assert!(distinct.len() > 2000);
    }
}
