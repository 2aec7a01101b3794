//! Permutations of `[N]`, induced subpermutations, the Kendall tau and
//! rectangular distances, and seeded sampling.
//!
//! All public indices and values are 1-based.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub(crate) type SeededRng = rand_xoshiro::SplitMix64;

pub(crate) fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// A bijection on `[N]`, `N >= 1`, stored as its image sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Validates that `images` is a bijection on `[N]`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::NotABijection("empty image sequence".into()));
        }
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &v in &images {
            if v == 0 || v > n {
                return Err(Error::NotABijection(format!("value {v} outside 1..={n}")));
            }
            if seen[v] {
                return Err(Error::NotABijection(format!("value {v} repeated")));
            }
            seen[v] = true;
        }
        Ok(Permutation { images })
    }

    /// Accepts arbitrary signed input, rejecting anything that is not a bijection.
    pub fn from_signed(images: &[i64]) -> Result<Self> {
        let conv: Option<Vec<usize>> = images
            .iter()
            .map(|&v| usize::try_from(v).ok())
            .collect();
        match conv {
            Some(v) => Permutation::new(v),
            None => Err(Error::NotABijection("negative value".into())),
        }
    }

    /// Overwrites `self` with the standardization of `values`.
    pub(crate) fn set_standardized(&mut self, values: &[usize]) {
        self.images.resize(values.len(), 0);
        standardize_into(values, &mut self.images);
    }

    pub(crate) fn from_images_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(images.clone()).is_ok());
        Permutation { images }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "order must be positive");
        Permutation {
            images: (1..=n).collect(),
        }
    }

    pub fn reverse(n: usize) -> Self {
        assert!(n >= 1, "order must be positive");
        Permutation {
            images: (1..=n).rev().collect(),
        }
    }

    /// Cyclic shift `i -> ((i - 1 + shift) mod n) + 1`.
    pub fn shifted(n: usize, shift: usize) -> Self {
        assert!(n >= 1, "order must be positive");
        Permutation {
            images: (0..n).map(|i| (i + shift) % n + 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    /// Always false; kept for the usual `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Images of `1..=N` in order.
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `π(i)` for `1 <= i <= N`.
    pub fn at(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// Number of pairs `i < j` with `π(i) > π(j)`.
    pub fn inversions(&self) -> u64 {
        let mut count = 0;
        for (i, &a) in self.images.iter().enumerate() {
            for &b in &self.images[i + 1..] {
                if a > b {
                    count += 1;
                }
            }
        }
        count
    }

    /// `π↾X` for a strictly increasing, non-empty, 1-based index set `X`.
    pub fn subpermutation(&self, indices: &[usize]) -> Result<Permutation> {
        if indices.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let n = self.len();
        let mut prev = 0;
        for &x in indices {
            if x == 0 || x > n {
                return Err(Error::IndexOutOfRange { index: x, bound: n });
            }
            if x <= prev {
                return Err(Error::PreconditionViolated(
                    "index set must be strictly increasing".into(),
                ));
            }
            prev = x;
        }
        let values: Vec<usize> = indices.iter().map(|&x| self.images[x - 1]).collect();
        Ok(Permutation {
            images: standardize(&values),
        })
    }
}

/// Replaces distinct values by their ranks `1..=len`.
pub(crate) fn standardize(values: &[usize]) -> Vec<usize> {
    let mut out = vec![0; values.len()];
    standardize_into(values, &mut out);
    out
}

pub(crate) fn standardize_into(values: &[usize], out: &mut [usize]) {
    let n = values.len();
    if n <= 16 {
        for i in 0..n {
            let v = values[i];
            out[i] = 1 + values.iter().filter(|&&w| w < v).count();
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&i| values[i]);
        for (rank, &i) in order.iter().enumerate() {
            out[i] = rank + 1;
        }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// One line of whitespace-separated images.
    fn from_str(s: &str) -> Result<Self> {
        let line = s.trim();
        if line.contains('\n') {
            return Err(Error::NotABijection("more than one line".into()));
        }
        let mut images = Vec::new();
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::NotABijection(format!("token {tok:?} is not an integer")))?;
            images.push(v);
        }
        Permutation::from_signed(&images)
    }
}

fn binom2(n: usize) -> BigInt {
    let n = n as u64;
    BigInt::from(n * (n - 1) / 2)
}

/// Fraction of discordant pairs.
pub fn kendall_tau(pi: &Permutation, sigma: &Permutation) -> Result<Rational> {
    let n = pi.len();
    if n != sigma.len() {
        return Err(Error::OrderMismatch(n, sigma.len()));
    }
    if n < 2 {
        return Err(Error::OrderTooSmall(n));
    }
    let (p, s) = (pi.images(), sigma.images());
    let mut discordant: u64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            if (p[i] < p[j]) != (s[i] < s[j]) {
                discordant += 1;
            }
        }
    }
    Ok(Rational::new(BigInt::from(discordant), binom2(n)))
}

/// `max_{S,T} | |π(S)∩T| - |σ(S)∩T| | / N` over integer intervals `S, T`.
///
/// For a fixed `S` the discrepancy over `T = [c, d]` is `F(d) - F(c-1)` where
/// `F` is a prefix sum over values, so the best `T` is `max F - min F`. A
/// segment tree over the value axis keeps both extremes as `S` grows.
pub fn rectangular(pi: &Permutation, sigma: &Permutation) -> Result<Rational> {
    let n = pi.len();
    if n != sigma.len() {
        return Err(Error::OrderMismatch(n, sigma.len()));
    }
    Ok(Rational::new(
        BigInt::from(rectangular_count(pi.images(), sigma.images())),
        BigInt::from(n),
    ))
}

/// Numerator of the rectangular distance for equal-length image slices.
pub(crate) fn rectangular_count(p: &[usize], s: &[usize]) -> i64 {
    let n = p.len();
    let mut tree = PrefixExtremes::new(n);
    let mut best: i64 = 0;
    for a in 0..n {
        tree.clear();
        for b in a..n {
            if p[b] != s[b] {
                tree.add(p[b] - 1, 1);
                tree.add(s[b] - 1, -1);
            }
            best = best.max(tree.spread());
        }
    }
    best
}

/// Reference scan of every `(S, T)` pair with 2-D prefix counts, `O(N^4)`.
pub fn rectangular_exhaustive(pi: &Permutation, sigma: &Permutation) -> Result<Rational> {
    let n = pi.len();
    if n != sigma.len() {
        return Err(Error::OrderMismatch(n, sigma.len()));
    }
    let pa = prefix_counts(pi);
    let pb = prefix_counts(sigma);
    let rect = |pc: &Vec<Vec<i64>>, a: usize, b: usize, c: usize, d: usize| {
        pc[b][d] - pc[a - 1][d] - pc[b][c - 1] + pc[a - 1][c - 1]
    };
    let mut best = 0;
    for a in 1..=n {
        for b in a..=n {
            for c in 1..=n {
                for d in c..=n {
                    let diff = (rect(&pa, a, b, c, d) - rect(&pb, a, b, c, d)).abs();
                    best = best.max(diff);
                }
            }
        }
    }
    Ok(Rational::new(BigInt::from(best), BigInt::from(n)))
}

fn prefix_counts(pi: &Permutation) -> Vec<Vec<i64>> {
    let n = pi.len();
    let mut pc = vec![vec![0i64; n + 1]; n + 1];
    for x in 1..=n {
        for t in 1..=n {
            let hit = i64::from(pi.at(x) == t);
            pc[x][t] = pc[x - 1][t] + pc[x][t - 1] - pc[x - 1][t - 1] + hit;
        }
    }
    pc
}

/// Point-update segment tree reporting the max and min prefix sums
/// (the empty prefix included).
struct PrefixExtremes {
    size: usize,
    sum: Vec<i64>,
    hi: Vec<i64>,
    lo: Vec<i64>,
}

impl PrefixExtremes {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two();
        PrefixExtremes {
            size,
            sum: vec![0; 2 * size],
            hi: vec![0; 2 * size],
            lo: vec![0; 2 * size],
        }
    }

    fn clear(&mut self) {
        self.sum.fill(0);
        self.hi.fill(0);
        self.lo.fill(0);
    }

    fn add(&mut self, pos: usize, delta: i64) {
        let mut i = pos + self.size;
        self.sum[i] += delta;
        self.hi[i] = self.sum[i].max(0);
        self.lo[i] = self.sum[i].min(0);
        while i > 1 {
            i /= 2;
            let (l, r) = (2 * i, 2 * i + 1);
            self.sum[i] = self.sum[l] + self.sum[r];
            self.hi[i] = self.hi[l].max(self.sum[l] + self.hi[r]);
            self.lo[i] = self.lo[l].min(self.sum[l] + self.lo[r]);
        }
    }

    fn spread(&self) -> i64 {
        self.hi[1] - self.lo[1]
    }
}

/// Uniform permutation of order `n`, a pure function of `seed`.
pub fn random_permutation(n: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::NotABijection("order must be positive".into()));
    }
    let mut images: Vec<usize> = (1..=n).collect();
    images.shuffle(&mut seeded_rng(seed));
    Ok(Permutation { images })
}

/// Uniform `m`-subset of `[n]`, sorted ascending.
pub fn random_index_subset(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::SubsetTooLarge { n, m });
    }
    if m == 0 {
        return Err(Error::EmptyIndexSet);
    }
    let mut rng = seeded_rng(seed);
    Ok(sample_sorted(&mut rng, n, m))
}

pub(crate) fn sample_sorted(rng: &mut SeededRng, n: usize, m: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(m);
    sample_sorted_into(rng, n, m, &mut out);
    out
}

/// Uniform `m`-subset of `[n]` into `out`, ascending. Floyd's algorithm on a
/// bitmask when `n <= 64`.
pub(crate) fn sample_sorted_into(rng: &mut SeededRng, n: usize, m: usize, out: &mut Vec<usize>) {
    out.clear();
    if n <= 64 {
        let mut mask = 0u64;
        for j in n - m..n {
            let bit = 1u64 << rng.gen_range(0..=j);
            mask |= if mask & bit == 0 { bit } else { 1u64 << j };
        }
        while mask != 0 {
            out.push(mask.trailing_zeros() as usize + 1);
            mask &= mask - 1;
        }
        return;
    }
    out.extend(rand::seq::index::sample(rng, n, m).into_iter().map(|i| i + 1));
    out.sort_unstable();
}
