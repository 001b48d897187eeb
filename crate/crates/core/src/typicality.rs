//! Robust typical sets (relative deviation per symbol), type-class
//! enumeration, exact typical mass, exact uniform sampling and the
//! concentration constants that bound atypicality.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source_model::{FinitePmf, JointPmf};

/// Default cap on the number of candidate compositions examined.
pub const DEFAULT_COMPOSITION_CAP: u64 = 10_000_000;

/// Absolute slack on `|N/n - p| <= sigma p`, so that boundary compositions
/// that satisfy the inequality with equality are not lost to rounding.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypicalityError {
    #[error("sequence symbol {symbol} outside alphabet of size {alphabet}")]
    AlphabetMismatch { symbol: usize, alphabet: usize },
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sequences must be non-empty")]
    EmptySequence,
    #[error("sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("composition count {needed} exceeds cap {cap}")]
    CapExceeded { needed: u64, cap: u64 },
    #[error("typical set is empty")]
    EmptySet,
    #[error("{which} has a zero-mass cell; concentration constant undefined")]
    ZeroSupport { which: &'static str },
    #[error("need 0 < sigma1 < sigma2 < sigma3 < 1, got ({0}, {1}, {2})")]
    BadSigmas(f64, f64, f64),
}

/// A length-`n` sequence of alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence(pub Vec<usize>);

impl Sequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn constant(symbol: usize, n: usize) -> Self {
        Sequence(vec![symbol; n])
    }

    /// Parses a string of decimal digits, one symbol per character.
    pub fn from_digits(s: &str) -> Self {
        Sequence(s.bytes().map(|b| (b - b'0') as usize).collect())
    }

    /// Occupancy vector over an alphabet of size `k`.
    pub fn counts(&self, k: usize) -> Result<Vec<u32>, TypicalityError> {
        let mut counts = vec![0u32; k];
        for &a in &self.0 {
            if a >= k {
                return Err(TypicalityError::AlphabetMismatch {
                    symbol: a,
                    alphabet: k,
                });
            }
            counts[a] += 1;
        }
        Ok(counts)
    }
}

impl std::fmt::Display for Sequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sep = if self.0.iter().any(|&a| a > 9) {
            ","
        } else {
            ""
        };
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(sep))
    }
}

/// The three nested typicality slacks `sigma1 < sigma2 < sigma3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl Sigmas {
    /// `(sigma, 2 sigma, 3 sigma)`.
    pub fn from_base(sigma: f64) -> Self {
        Sigmas {
            s1: sigma,
            s2: 2.0 * sigma,
            s3: 3.0 * sigma,
        }
    }

    pub fn validate(&self) -> Result<(), TypicalityError> {
        let ok = self.s1 > 0.0 && self.s1 < self.s2 && self.s2 < self.s3 && self.s3 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(TypicalityError::BadSigmas(self.s1, self.s2, self.s3))
        }
    }
}

fn check_sigma(sigma: f64) -> Result<(), TypicalityError> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(TypicalityError::InvalidSigma(sigma))
    }
}

/// Membership test on an occupancy vector.
#[inline]
pub fn counts_are_typical(counts: &[u32], probs: &[f64], n: usize, sigma: f64) -> bool {
    let n = n as f64;
    counts.iter().zip(probs).all(|(&c, &p)| {
        let dev = (c as f64 / n - p).abs();
        dev <= sigma * p + BOUNDARY_SLACK
    })
}

pub fn is_typical(x: &Sequence, p: &FinitePmf, sigma: f64) -> Result<bool, TypicalityError> {
    check_sigma(sigma)?;
    if x.is_empty() {
        return Err(TypicalityError::EmptySequence);
    }
    let counts = x.counts(p.len())?;
    Ok(counts_are_typical(&counts, p.probs(), x.len(), sigma))
}

/// Pair membership in the typical set of `j` (rows index `x`, columns index `y`).
pub fn is_jointly_typical(
    x: &Sequence,
    y: &Sequence,
    j: &JointPmf,
    sigma: f64,
) -> Result<bool, TypicalityError> {
    check_sigma(sigma)?;
    if x.len() != y.len() {
        return Err(TypicalityError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(TypicalityError::EmptySequence);
    }
    let (nr, nc) = (j.n_rows(), j.n_cols());
    let mut counts = vec![0u32; nr * nc];
    for (&a, &b) in x.symbols().iter().zip(y.symbols()) {
        if a >= nr {
            return Err(TypicalityError::AlphabetMismatch {
                symbol: a,
                alphabet: nr,
            });
        }
        if b >= nc {
            return Err(TypicalityError::AlphabetMismatch {
                symbol: b,
                alphabet: nc,
            });
        }
        counts[a * nc + b] += 1;
    }
    Ok(counts_are_typical(&counts, j.mass(), x.len(), sigma))
}

/// Triple membership; `j` has rows `U` and columns the product `X x Y`
/// (column index `x * y_size + y`).
pub fn is_triple_typical(
    u: &Sequence,
    x: &Sequence,
    y: &Sequence,
    j: &JointPmf,
    y_size: usize,
    sigma: f64,
) -> Result<bool, TypicalityError> {
    if u.len() != x.len() {
        return Err(TypicalityError::LengthMismatch(u.len(), x.len()));
    }
    if x.len() != y.len() {
        return Err(TypicalityError::LengthMismatch(x.len(), y.len()));
    }
    let x_size = j.n_cols() / y_size.max(1);
    for (&a, &b) in x.symbols().iter().zip(y.symbols()) {
        if a >= x_size {
            return Err(TypicalityError::AlphabetMismatch {
                symbol: a,
                alphabet: x_size,
            });
        }
        if b >= y_size {
            return Err(TypicalityError::AlphabetMismatch {
                symbol: b,
                alphabet: y_size,
            });
        }
    }
    let xy = Sequence(
        x.symbols()
            .iter()
            .zip(y.symbols())
            .map(|(&a, &b)| a * y_size + b)
            .collect(),
    );
    is_jointly_typical(u, &xy, j, sigma)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for i in 1..=n {
        table[i] = table[i - 1] + (i as f64).ln();
    }
    table
}

/// An occupancy vector `N(a|x^n)` summing to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeClass {
    pub counts: Vec<u32>,
}

impl TypeClass {
    pub fn n(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Exact multinomial coefficient when it fits in `u128`.
    pub fn size_exact(&self) -> Option<u128> {
        let mut remaining = self.n() as u128;
        let mut size: u128 = 1;
        for &c in &self.counts {
            // C(remaining, c) built incrementally stays integral at every step.
            let mut binom: u128 = 1;
            for i in 0..c as u128 {
                binom = binom.checked_mul(remaining - i)? / (i + 1);
            }
            size = size.checked_mul(binom)?;
            remaining -= c as u128;
        }
        Some(size)
    }

    pub fn ln_size(&self) -> f64 {
        let table = ln_factorials(self.n());
        self.ln_size_with(&table)
    }

    fn ln_size_with(&self, ln_fact: &[f64]) -> f64 {
        ln_fact[self.n()]
            - self
                .counts
                .iter()
                .map(|&c| ln_fact[c as usize])
                .sum::<f64>()
    }

    pub fn size(&self) -> f64 {
        match self.size_exact() {
            Some(s) => s as f64,
            None => self.ln_size().exp(),
        }
    }

    /// Probability of one particular sequence of this type under i.i.d. `probs`.
    pub fn ln_sequence_prob(&self, probs: &[f64]) -> f64 {
        self.counts
            .iter()
            .zip(probs)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &p)| c as f64 * p.ln())
            .sum()
    }
}

/// All typical type classes for one `(p, n, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSet {
    pub classes: Vec<TypeClass>,
    /// Number of typical sequences, the sum of class sizes.
    pub total: f64,
}

impl TypicalSet {
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Per-symbol count ranges that can possibly satisfy the band, widened by
/// one on each side; the exact predicate is applied afterwards.
fn count_ranges(probs: &[f64], n: usize, sigma: f64) -> Vec<(u32, u32)> {
    let nf = n as f64;
    probs
        .iter()
        .map(|&p| {
            let lo = (nf * p * (1.0 - sigma)).floor() - 1.0;
            let hi = (nf * p * (1.0 + sigma)).ceil() + 1.0;
            (lo.max(0.0) as u32, hi.min(nf).max(0.0) as u32)
        })
        .collect()
}

pub fn enumerate_typical(
    p: &FinitePmf,
    n: usize,
    sigma: f64,
) -> Result<TypicalSet, TypicalityError> {
    enumerate_typical_capped(p.probs(), n, sigma, DEFAULT_COMPOSITION_CAP)
}

/// Enumerates typical compositions of `n` for the law `probs`.
///
/// The cap applies to the number of candidate compositions inside the
/// per-symbol count bands (the product of band widths), which bounds the
/// work done here.
pub fn enumerate_typical_capped(
    probs: &[f64],
    n: usize,
    sigma: f64,
    cap: u64,
) -> Result<TypicalSet, TypicalityError> {
    check_sigma(sigma)?;
    if n == 0 {
        return Err(TypicalityError::EmptySequence);
    }
    let ranges = count_ranges(probs, n, sigma);
    let mut needed: u64 = 1;
    for &(lo, hi) in &ranges[..ranges.len().saturating_sub(1)] {
        needed = needed.saturating_mul(u64::from(hi - lo) + 1);
    }
    if needed > cap {
        return Err(TypicalityError::CapExceeded { needed, cap });
    }
    let mut classes = Vec::new();
    let mut counts = vec![0u32; probs.len()];
    compositions(&ranges, n as u32, 0, &mut counts, &mut |c| {
        if counts_are_typical(c, probs, n, sigma) {
            classes.push(TypeClass { counts: c.to_vec() });
        }
    });
    let total = classes.iter().map(TypeClass::size).sum();
    Ok(TypicalSet { classes, total })
}

fn compositions(
    ranges: &[(u32, u32)],
    remaining: u32,
    pos: usize,
    counts: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    let last = ranges.len() - 1;
    if pos == last {
        let (lo, hi) = ranges[pos];
        if remaining >= lo && remaining <= hi {
            counts[pos] = remaining;
            visit(counts);
        }
        return;
    }
    let (lo, hi) = ranges[pos];
    for c in lo..=hi.min(remaining) {
        counts[pos] = c;
        compositions(ranges, remaining - c, pos + 1, counts, visit);
    }
}

/// Exact probability that an i.i.d. `p` sequence of length `n` is typical.
pub fn typical_probability(p: &FinitePmf, n: usize, sigma: f64) -> Result<f64, TypicalityError> {
    let set = enumerate_typical(p, n, sigma)?;
    let ln_fact = ln_factorials(n);
    let total: f64 = set
        .classes
        .iter()
        .map(|c| (c.ln_size_with(&ln_fact) + c.ln_sequence_prob(p.probs())).exp())
        .sum();
    Ok(total.clamp(0.0, 1.0))
}

/// Exact uniform sampler over a typical set: picks a type class with
/// probability proportional to its size, then a uniformly random arrangement.
#[derive(Debug, Clone)]
pub struct TypicalSampler {
    set: TypicalSet,
    index: WeightedIndex<f64>,
}

impl TypicalSampler {
    pub fn new(p: &FinitePmf, n: usize, sigma: f64) -> Result<Self, TypicalityError> {
        Self::from_probs(p.probs(), n, sigma)
    }

    pub fn from_probs(probs: &[f64], n: usize, sigma: f64) -> Result<Self, TypicalityError> {
        let set = enumerate_typical_capped(probs, n, sigma, DEFAULT_COMPOSITION_CAP)?;
        if set.is_empty() {
            return Err(TypicalityError::EmptySet);
        }
        let ln_fact = ln_factorials(n);
        let ln_sizes: Vec<f64> = set
            .classes
            .iter()
            .map(|c| c.ln_size_with(&ln_fact))
            .collect();
        let max = ln_sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = ln_sizes.iter().map(|l| (l - max).exp()).collect();
        let index = WeightedIndex::new(&weights).map_err(|_| TypicalityError::EmptySet)?;
        Ok(Self { set, index })
    }

    pub fn set(&self) -> &TypicalSet {
        &self.set
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        let class = &self.set.classes[self.index.sample(rng)];
        let mut symbols: Vec<usize> = class
            .counts
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| std::iter::repeat_n(a, c as usize))
            .collect();
        symbols.shuffle(rng);
        Sequence(symbols)
    }
}

pub fn sample_typical_uniform<R: Rng + ?Sized>(
    p: &FinitePmf,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Sequence, TypicalityError> {
    Ok(TypicalSampler::new(p, n, sigma)?.sample(rng))
}

/// Concentration constants bounding the probability of atypical behaviour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationConstants {
    /// Bound on `P[X^n not sigma1-typical]`.
    pub kappa_x: f64,
    /// Bound from covering a sigma1-typical `x^n` at sigma2 with a sigma1-typical `U`-sequence.
    pub kappa_ux: f64,
    /// Markov-lemma bound, one per state.
    pub kappa_uxy: Vec<f64>,
    pub c_x: f64,
    pub c_ux: f64,
    pub c_uxy: Vec<f64>,
}

impl ConcentrationConstants {
    /// Largest Markov-lemma constant over states, and the state attaining it.
    pub fn kappa_uxy_max(&self) -> (usize, f64) {
        self.kappa_uxy
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (s, k)| {
                if k > best.1 {
                    (s, k)
                } else {
                    best
                }
            })
    }
}

/// `2|X| exp(-2 n sigma1 c_X^2)`.
pub fn kappa_x(px: &FinitePmf, n: f64, s1: f64) -> Result<f64, TypicalityError> {
    let c = px.min_mass();
    if c <= 0.0 {
        return Err(TypicalityError::ZeroSupport { which: "P_X" });
    }
    Ok(2.0 * px.len() as f64 * (-2.0 * n * s1 * c * c).exp())
}

/// `2|U||X| exp(-2n (1-sigma1) ((sigma2-sigma1)/(1+sigma1))^2 c_{U,X}^2 n)`; the
/// blocklength enters twice, as printed.
pub fn kappa_ux(pux: &JointPmf, n: f64, s1: f64, s2: f64) -> Result<f64, TypicalityError> {
    let c = pux.min_mass();
    if c <= 0.0 {
        return Err(TypicalityError::ZeroSupport { which: "P_{U,X}" });
    }
    let ratio = (s2 - s1) / (1.0 + s1);
    let size = (pux.n_rows() * pux.n_cols()) as f64;
    Ok(2.0 * size * (-2.0 * n * (1.0 - s1) * ratio * ratio * c * c * n).exp())
}

/// `2|U||X||Y| exp(-2 (1-sigma2) ((sigma3-sigma2)/(1+sigma2))^2 c_{U,X,Y}^2 n)`.
pub fn kappa_uxy(puxy: &JointPmf, n: f64, s2: f64, s3: f64) -> Result<f64, TypicalityError> {
    let c = puxy.min_mass();
    if c <= 0.0 {
        return Err(TypicalityError::ZeroSupport { which: "P_{U,X,Y}" });
    }
    let ratio = (s3 - s2) / (1.0 + s2);
    let size = (puxy.n_rows() * puxy.n_cols()) as f64;
    Ok(2.0 * size * (-2.0 * (1.0 - s2) * ratio * ratio * c * c * n).exp())
}

pub fn concentration_constants(
    px: &FinitePmf,
    pux: &JointPmf,
    puxy: &[JointPmf],
    n: f64,
    sigmas: Sigmas,
) -> Result<ConcentrationConstants, TypicalityError> {
    sigmas.validate()?;
    let kappa_uxy = puxy
        .iter()
        .map(|j| kappa_uxy(j, n, sigmas.s2, sigmas.s3))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConcentrationConstants {
        kappa_x: kappa_x(px, n, sigmas.s1)?,
        kappa_ux: kappa_ux(pux, n, sigmas.s1, sigmas.s2)?,
        kappa_uxy,
        c_x: px.min_mass(),
        c_ux: pux.min_mass(),
        c_uxy: puxy.iter().map(JointPmf::min_mass).collect(),
    })
}
