//! Packed binary vectors, flip masks, and the i.i.d. bit-flip noise model.
//!
//! A structure vector `s` lives in `{0,1}^n`. Noise `ε` and adversarial
//! perturbations `δ` are [`FlipMask`]s applied with XOR. Noise keeps each
//! bit with probability `β` (stored as an exact fraction in [`NoiseSpec`])
//! and flips it with probability `1 - β`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Fixed-length bit vector packed into 64-bit words. Bits past `len` in the
/// last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD] |= 1 << (len % WORD);
            }
            len += 1;
        }
        Self { words, len }
    }

    /// Builds a vector of length `len` with ones at `indices`.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(len);
        for &i in indices {
            if i >= len {
                return Err(Error::OutOfRange(format!("bit index {i} >= {len}")));
            }
            v.set(i, true);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        })
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD + tz)
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Low `len` bits of `value`, bit `i` of the vector taken from bit `i`
    /// of the integer. Used by the enumeration oracle.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD);
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == WORD { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBits(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bools)
    }
}

/// The attackable binary encoding of a graph (one adjacency row, or the
/// upper triangle of the adjacency matrix).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StructureVector(BitVector);

impl StructureVector {
    pub fn new(bits: BitVector) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(BitVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    pub fn into_bits(self) -> BitVector {
        self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn count_ones(&self) -> usize {
        self.0.count_ones()
    }
}

impl fmt::Display for StructureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for StructureVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Self)
    }
}

/// A noise draw or an adversarial perturbation. The weight is its ℓ0 norm.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlipMask {
    bits: BitVector,
    weight: usize,
}

impl FlipMask {
    pub fn new(bits: BitVector) -> Self {
        let weight = bits.count_ones();
        Self { bits, weight }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(BitVector::zeros(n))
    }

    /// Mask flipping exactly the first `k` of `n` bits.
    pub fn prefix(n: usize, k: usize) -> Self {
        assert!(k <= n);
        Self::new(BitVector::from_bools((0..n).map(|i| i < k)))
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        BitVector::from_indices(n, indices).map(Self::new)
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn flipped(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }
}

impl fmt::Display for FlipMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits.fmt(f)
    }
}

impl FromStr for FlipMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Self::new)
    }
}

/// `s ⊕ mask`.
pub fn xor_apply(s: &StructureVector, mask: &FlipMask) -> Result<StructureVector> {
    s.0.xor(&mask.bits).map(StructureVector)
}

pub fn hamming(a: &StructureVector, b: &StructureVector) -> Result<usize> {
    a.0.hamming(&b.0)
}

/// Class label, an index into the label set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn checked(id: u32, num_labels: usize) -> Result<Self> {
        if (id as usize) < num_labels {
            Ok(Self(id))
        } else {
            Err(Error::LabelOutOfRange {
                label: id,
                num_labels,
            })
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Bit-preservation probability `β = numer / denom`, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSpec {
    numer: u64,
    denom: u64,
}

impl NoiseSpec {
    /// Reduces `numer/denom`; requires `0 < numer < denom`.
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if numer == 0 || denom == 0 || numer >= denom {
            return Err(Error::InvalidNoise(format!(
                "beta = {numer}/{denom} must lie strictly between 0 and 1"
            )));
        }
        let g = numer.gcd(&denom);
        Ok(Self {
            numer: numer / g,
            denom: denom / g,
        })
    }

    pub fn numer(&self) -> u64 {
        self.numer
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn beta(&self) -> BigRational {
        BigRational::new(BigInt::from(self.numer), BigInt::from(self.denom))
    }

    /// `1 - β` as an exact fraction.
    pub fn flip_prob(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.denom - self.numer),
            BigInt::from(self.denom),
        )
    }

    pub fn beta_f64(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }

    pub fn is_half(&self) -> bool {
        2 * self.numer == self.denom
    }

    /// True when `β > 1/2`, i.e. the density ratio grows with `m`.
    pub fn keeps_more_than_flips(&self) -> bool {
        2 * self.numer > self.denom
    }

    /// Draws one flip bit: `true` with probability exactly `1 - β`.
    pub fn draw_flip<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.gen_range(0..self.denom) >= self.numer
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

/// Parses `0.7`, `.25`, or `7/10` without going through a float.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidNoise(format!("cannot parse `{s}` as a probability"));
        if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            return Self::new(p, q);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        if int != 0 {
            return Err(Error::InvalidNoise(format!(
                "beta = {s} must lie strictly between 0 and 1"
            )));
        }
        let denom = 10u64.pow(frac.len() as u32);
        let numer: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Self::new(numer, denom)
    }
}

/// Samples a noise mask in which each of `n` bits is flipped independently
/// with probability `1 - β`.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, n: usize, rng: &mut R) -> FlipMask {
    FlipMask::new(BitVector::from_bools((0..n).map(|_| spec.draw_flip(rng))))
}

/// Independent, reproducible stream for sample `index` under `seed`.
pub fn noise_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
