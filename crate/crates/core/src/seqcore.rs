//! Binary strings, seeded bit sources, cylinder sets, Bernoulli priors and
//! empirical distributions: the substrate shared by every model module.
//!
//! The generator is SplitMix64, fixed so that identical `(seed, q1)` produce
//! identical bit streams on every platform. A Bernoulli(q1) bit is 1 iff the
//! 64-bit generator output is below `floor(q1 * 2^64)`, compared exactly.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use num_rational::Ratio;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

const WORD_BITS: usize = 64;

/// A finite binary string, bit-packed into 64-bit words (LSB-first per word).
///
/// The text form is the ASCII string of `0`/`1` characters.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            words: Vec::with_capacity(bits.div_ceil(WORD_BITS)),
            len: 0,
        }
    }

    /// All-zero string of the given length.
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0u64; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                s.set(i, true);
            }
        }
        s
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let (w, b) = (i / WORD_BITS, i % WORD_BITS);
        if v {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn push(&mut self, v: bool) {
        if self.len % WORD_BITS == 0 {
            self.words.push(0);
        }
        self.len += 1;
        let i = self.len - 1;
        if v {
            self.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Backing words; bits past `len` in the last word are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn prefix(&self, n: usize) -> BitString {
        assert!(n <= self.len);
        let mut out = self.clone();
        out.truncate(n);
        out
    }

    pub fn truncate(&mut self, n: usize) {
        assert!(n <= self.len);
        self.len = n;
        self.words.truncate(n.div_ceil(WORD_BITS));
        self.mask_tail();
    }

    fn mask_tail(&mut self) {
        let r = self.len % WORD_BITS;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    /// Reads up to 64 bits starting at `pos` (LSB = bit at `pos`).
    /// Requires `pos + n <= len`.
    #[inline]
    pub fn read_chunk(&self, pos: usize, n: usize) -> u64 {
        debug_assert!(n <= 64 && pos + n <= self.len);
        if n == 0 {
            return 0;
        }
        let (w, b) = (pos / WORD_BITS, pos % WORD_BITS);
        let mut v = self.words[w] >> b;
        if b != 0 && w + 1 < self.words.len() {
            v |= self.words[w + 1] << (WORD_BITS - b);
        }
        if n == 64 {
            v
        } else {
            v & ((1u64 << n) - 1)
        }
    }

    /// Appends up to 64 bits (LSB-first) to the string.
    pub fn push_chunk(&mut self, chunk: u64, n: usize) {
        debug_assert!(n <= 64);
        if n == 0 {
            return;
        }
        let b = self.len % WORD_BITS;
        let masked = if n == 64 { chunk } else { chunk & ((1u64 << n) - 1) };
        if b == 0 {
            self.words.push(masked);
        } else {
            *self.words.last_mut().unwrap() |= masked << b;
            if b + n > WORD_BITS {
                self.words.push(masked >> (WORD_BITS - b));
            }
        }
        self.len += n;
        self.mask_tail();
    }

    /// Appends `count` bits of `src` starting at `start`.
    pub fn extend_range(&mut self, src: &BitString, start: usize, count: usize) {
        assert!(start + count <= src.len);
        let mut done = 0;
        while done < count {
            let n = (count - done).min(64);
            self.push_chunk(src.read_chunk(start + done, n), n);
            done += n;
        }
    }

    /// Bitwise XOR of equal-length strings.
    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len);
        BitString {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    pub fn xor_in_place(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Flips every bit (0 <-> 1 relabeling).
    pub fn complement(&self) -> BitString {
        let mut out = BitString {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.mask_tail();
        out
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => {
                    return Err(Error::invalid(
                        "bitstring",
                        format!("character {c:?} at position {i} is not 0 or 1"),
                    ))
                }
            }
        }
        Ok(out)
    }
}

/// SplitMix64: state advances by the golden-ratio increment, outputs pass the
/// standard two-round finalizer. Output `i` is a pure function of `(seed, i)`.
#[derive(Clone, Copy, Debug)]
pub struct SplitMix64 {
    state: u64,
}

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Unbiased uniform draw in `[0, n)` (Lemire multiply-shift with rejection).
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let t = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= t {
                return (m >> 64) as u64;
            }
        }
    }

    #[inline]
    pub fn bernoulli(&mut self, threshold: u128) -> bool {
        (self.next_u64() as u128) < threshold
    }
}

/// Exact comparison threshold for a Bernoulli(q1) bit: `floor(q1 * 2^64)`.
#[inline]
pub fn bernoulli_threshold(q1: f64) -> u128 {
    debug_assert!((0.0..=1.0).contains(&q1));
    (q1 * 18_446_744_073_709_551_616.0) as u128
}

/// Derives the seed of an independent stream: one SplitMix64 step applied to
/// `master ^ stream_index`.
#[inline]
pub fn derive_stream_seed(master: u64, stream_index: u64) -> u64 {
    SplitMix64::new(master ^ stream_index).next_u64()
}

/// Reproducible Bernoulli(q1) bit source; bit `i` is a pure function of
/// `(seed, q1, i)` and may be read from any thread.
#[derive(Clone, Copy, Debug)]
pub struct SeededBitSource {
    seed: u64,
    q1: f64,
    threshold: u128,
}

impl SeededBitSource {
    pub fn new(seed: u64, q1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q1) {
            return Err(Error::invalid("q1", format!("{q1} not in [0, 1]")));
        }
        Ok(SeededBitSource {
            seed,
            q1,
            threshold: bernoulli_threshold(q1),
        })
    }

    pub fn fair(seed: u64) -> Self {
        Self::new(seed, 0.5).unwrap()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    #[inline]
    pub fn bit(&self, i: u64) -> bool {
        let state = self.seed.wrapping_add((i.wrapping_add(1)).wrapping_mul(GOLDEN_GAMMA));
        (mix64(state) as u128) < self.threshold
    }

    pub fn take(&self, n: usize) -> BitString {
        BitString::from_fn(n, |i| self.bit(i as u64))
    }
}

/// Bernoulli prior on `{0, 1}`, labeled by the probability of symbol 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BernoulliPrior {
    q1: f64,
}

impl BernoulliPrior {
    pub fn new(q1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q1) {
            return Err(Error::invalid("q1", format!("{q1} not in [0, 1]")));
        }
        Ok(BernoulliPrior { q1 })
    }

    /// The fair prior `q(0) = q(1) = 1/2`.
    pub fn fair() -> Self {
        BernoulliPrior { q1: 0.5 }
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q0(&self) -> f64 {
        1.0 - self.q1
    }

    /// Probability of a single symbol.
    pub fn prob<R: Real>(&self, bit: bool) -> R {
        lit(if bit { self.q1 } else { 1.0 - self.q1 })
    }
}

/// A cylinder set: the event that a sequence matches `prefix` starting at
/// `start` (0 for one-sided sequences; may be negative on bilateral lattices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub prefix: BitString,
    pub start: i64,
}

impl Cylinder {
    pub fn anchored(prefix: BitString) -> Self {
        Cylinder { prefix, start: 0 }
    }
}

/// Bernoulli measure of a cylinder: the product of per-bit probabilities.
/// For the fair prior this is exactly `2^-len(prefix)`.
pub fn cylinder_measure<R: Real>(c: &Cylinder, prior: &BernoulliPrior) -> R {
    let mut p = R::one();
    for b in c.prefix.iter() {
        p = p * prior.prob(b);
    }
    p
}

/// Empirical distribution of symbols in a finite string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EmpiricalDistribution {
    pub zeros: u64,
    pub ones: u64,
}

impl EmpiricalDistribution {
    pub fn total(&self) -> u64 {
        self.zeros + self.ones
    }

    pub fn freq_ones(&self) -> f64 {
        self.ones as f64 / self.total() as f64
    }

    pub fn freq_zeros(&self) -> f64 {
        self.zeros as f64 / self.total() as f64
    }
}

/// Running-average of a nonempty string, exactly: (number of ones) / length.
pub fn empirical_mean(s: &BitString) -> Result<Ratio<u64>> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(Ratio::new(s.count_ones() as u64, s.len() as u64))
}

/// Symbol counts of a nonempty string; `counts(1)/N` equals `empirical_mean`.
pub fn empirical_measure(s: &BitString) -> Result<EmpiricalDistribution> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    let ones = s.count_ones() as u64;
    Ok(EmpiricalDistribution {
        zeros: s.len() as u64 - ones,
        ones,
    })
}

/// The n-th finite binary string in length-then-lexicographic order,
/// starting from the empty string at n = 0.
pub fn lex_index(n: u64) -> BitString {
    // Strings shorter than k occupy ranks [0, 2^k - 1); rank n has
    // k = bitlen(n + 1) - 1 and offset n + 1 - 2^k, written MSB-first.
    let k = (64 - (n + 1).leading_zeros() as u64 - 1) as usize;
    let offset = n + 1 - (1u64 << k);
    BitString::from_fn(k, |i| (offset >> (k - 1 - i)) & 1 == 1)
}

/// Inverse of [`lex_index`].
pub fn lex_rank(s: &BitString) -> u64 {
    assert!(s.len() < 64, "rank overflows u64 for strings this long");
    let mut value = 0u64;
    for b in s.iter() {
        value = (value << 1) | b as u64;
    }
    (1u64 << s.len()) - 1 + value
}
