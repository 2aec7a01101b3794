//! Hereditary properties: pattern containment, avoidance classes, pluggable
//! oracles, exhaustive enumeration and brute-force distance to a property.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::perm::Permutation;
use crate::rational::Rational;

/// Largest order `brute_distance` enumerates by default (8! candidates).
pub const DEFAULT_BRUTE_FORCE_GUARD: usize = 8;

/// True iff some `|τ|`-subset of positions of `π` induces `τ`.
///
/// Backtracks over increasing positions; each candidate value must fall in
/// the open interval fixed by the already chosen values that `τ` ranks just
/// below and just above it.
pub fn occurs(tau: &Permutation, pi: &Permutation) -> bool {
    let k = tau.len();
    let n = pi.len();
    if k > n {
        return false;
    }
    if k == 2 {
        let p = pi.images();
        return if tau.images()[0] < tau.images()[1] {
            p.windows(2).any(|w| w[0] < w[1])
        } else {
            p.windows(2).any(|w| w[0] > w[1])
        };
    }
    let mut stack = [0usize; 16];
    let mut heap = Vec::new();
    let chosen = if k <= stack.len() {
        &mut stack[..k]
    } else {
        heap.resize(k, 0);
        &mut heap[..]
    };
    occurs_from(tau.images(), pi.images(), 0, 0, chosen)
}

fn occurs_from(
    tau: &[usize],
    pi: &[usize],
    t: usize,
    start: usize,
    chosen: &mut [usize],
) -> bool {
    let k = tau.len();
    if t == k {
        return true;
    }
    let (mut lo, mut hi) = (0usize, usize::MAX);
    for s in 0..t {
        if tau[s] < tau[t] {
            lo = lo.max(chosen[s]);
        } else {
            hi = hi.min(chosen[s]);
        }
    }
    let last = pi.len() - (k - t);
    for p in start..=last {
        let v = pi[p];
        if v > lo && v < hi {
            chosen[t] = v;
            if occurs_from(tau, pi, t + 1, p + 1, chosen) {
                return true;
            }
        }
    }
    false
}

/// Containment by trying every `|τ|`-subset of positions. Test oracle for [`occurs`].
pub fn occurs_exhaustive(tau: &Permutation, pi: &Permutation) -> bool {
    let k = tau.len();
    let n = pi.len();
    if k > n {
        return false;
    }
    let mut idx: Vec<usize> = (1..=k).collect();
    loop {
        if pi.subpermutation(&idx).expect("valid index set") == *tau {
            return true;
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// A reduced set of forbidden patterns: no pattern contains another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    forbidden: Vec<Permutation>,
}

impl Basis {
    /// Drops duplicates and every pattern that contains another basis pattern.
    pub fn new(patterns: impl IntoIterator<Item = Permutation>) -> Self {
        let mut all: Vec<Permutation> = patterns.into_iter().collect();
        all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        all.dedup();
        let mut forbidden: Vec<Permutation> = Vec::new();
        for p in all {
            if !forbidden.iter().any(|q| occurs(q, &p)) {
                forbidden.push(p);
            }
        }
        Basis { forbidden }
    }

    pub fn patterns(&self) -> &[Permutation] {
        &self.forbidden
    }

    /// One permutation per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            patterns.push(line.parse::<Permutation>()?);
        }
        Ok(Basis::new(patterns))
    }

    pub fn to_text(&self) -> String {
        self.forbidden.iter().map(|p| format!("{p}\n")).collect()
    }
}

type MemberFn = dyn Fn(&Permutation) -> bool + Send + Sync;

/// Membership decision procedure for a (presumed) hereditary property.
///
/// The hereditary contract is not checked here; see [`verify_hereditary`].
#[derive(Clone)]
pub struct PropertyOracle {
    name: String,
    member: Arc<MemberFn>,
    max_certified_order: Option<usize>,
    basis: Option<Basis>,
}

impl fmt::Debug for PropertyOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropertyOracle")
            .field("name", &self.name)
            .field("max_certified_order", &self.max_certified_order)
            .finish()
    }
}

impl PropertyOracle {
    /// `Av(basis)`.
    pub fn avoiding(basis: Basis) -> Self {
        let name = if basis.patterns().is_empty() {
            "Av()".to_string()
        } else {
            let parts: Vec<String> = basis
                .patterns()
                .iter()
                .map(|p| p.images().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(""))
                .collect();
            format!("Av({})", parts.join(","))
        };
        let patterns = basis.patterns().to_vec();
        PropertyOracle {
            name,
            member: Arc::new(move |pi: &Permutation| !patterns.iter().any(|t| occurs(t, pi))),
            max_certified_order: None,
            basis: Some(basis),
        }
    }

    /// Convenience for `Av` of patterns given as image lists.
    pub fn avoiding_images(patterns: &[&[usize]]) -> Result<Self> {
        let perms = patterns
            .iter()
            .map(|p| Permutation::new(p.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PropertyOracle::avoiding(Basis::new(perms)))
    }

    pub fn all() -> Self {
        PropertyOracle {
            name: "all".into(),
            member: Arc::new(|_| true),
            max_certified_order: None,
            basis: Some(Basis::new([])),
        }
    }

    pub fn custom<F>(name: impl Into<String>, member: F) -> Self
    where
        F: Fn(&Permutation) -> bool + Send + Sync + 'static,
    {
        PropertyOracle {
            name: name.into(),
            member: Arc::new(member),
            max_certified_order: None,
            basis: None,
        }
    }

    pub fn with_max_certified_order(mut self, order: usize) -> Self {
        self.max_certified_order = Some(order);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn max_certified_order(&self) -> Option<usize> {
        self.max_certified_order
    }

    /// The forbidden patterns, when the oracle is an avoidance class.
    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    pub fn member(&self, pi: &Permutation) -> bool {
        (self.member)(pi)
    }
}

/// Parses a built-in property name: `all`, or `av:<p>,<p>,...` where each
/// pattern is written as its digits (orders up to 9) or space-separated.
impl FromStr for PropertyOracle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(PropertyOracle::all());
        }
        let Some(list) = s.strip_prefix("av:") else {
            return Err(Error::Parse(format!("unknown property {s:?}")));
        };
        let mut patterns = Vec::new();
        for part in list.split(',') {
            let part = part.trim();
            let pattern = if part.contains(' ') {
                part.parse::<Permutation>()?
            } else {
                let digits: Option<Vec<usize>> = part
                    .chars()
                    .map(|c| c.to_digit(10).map(|d| d as usize))
                    .collect();
                let digits =
                    digits.ok_or_else(|| Error::Parse(format!("bad pattern {part:?}")))?;
                Permutation::new(digits)?
            };
            patterns.push(pattern);
        }
        Ok(PropertyOracle::avoiding(Basis::new(patterns)))
    }
}

/// All permutations of order `n` in lexicographic order of image sequences.
pub fn enumerate_all(n: usize) -> AllPermutations {
    assert!(n >= 1, "order must be positive");
    AllPermutations {
        next: Some((1..=n).collect()),
    }
}

pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation::from_images_unchecked(current))
    }
}

/// Advances to the next permutation in lexicographic order; false at the last.
pub(crate) fn next_lexicographic(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Kendall,
    Rectangular,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kendall" => Ok(Metric::Kendall),
            "rectangular" => Ok(Metric::Rectangular),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Kendall => "kendall",
            Metric::Rectangular => "rectangular",
        })
    }
}

impl Metric {
    pub fn distance(self, pi: &Permutation, sigma: &Permutation) -> Result<Rational> {
        match self {
            Metric::Kendall => crate::perm::kendall_tau(pi, sigma),
            Metric::Rectangular => crate::perm::rectangular(pi, sigma),
        }
    }

    /// Integer numerator over the fixed per-order denominator.
    fn numerator(self, pi: &Permutation, sigma: &Permutation) -> u64 {
        match self {
            Metric::Kendall => {
                let (p, s) = (pi.images(), sigma.images());
                let n = p.len();
                let mut count = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if (p[i] < p[j]) != (s[i] < s[j]) {
                            count += 1;
                        }
                    }
                }
                count
            }
            Metric::Rectangular => {
                crate::perm::rectangular_count(pi.images(), sigma.images()) as u64
            }
        }
    }

    fn denominator(self, n: usize) -> u64 {
        let n = n as u64;
        match self {
            Metric::Kendall => n * (n - 1) / 2,
            Metric::Rectangular => n,
        }
    }
}

/// `min_{σ ∈ P, |σ| = |π|} dist(π, σ)` by enumerating every permutation of
/// order `|π|`, guarded at [`DEFAULT_BRUTE_FORCE_GUARD`].
pub fn brute_distance(pi: &Permutation, oracle: &PropertyOracle, metric: Metric) -> Result<Rational> {
    brute_distance_with(pi, oracle, metric, DEFAULT_BRUTE_FORCE_GUARD, Execution::default())
}

pub fn brute_distance_with(
    pi: &Permutation,
    oracle: &PropertyOracle,
    metric: Metric,
    guard: usize,
    exec: Execution,
) -> Result<Rational> {
    let n = pi.len();
    if n > guard {
        return Err(Error::OrderTooLargeForBruteForce { order: n, guard });
    }
    if n == 1 {
        return if oracle.member(pi) {
            Ok(Rational::from_integer(BigInt::from(0)))
        } else {
            Err(Error::EmptyPropertyAtOrder(1))
        };
    }
    if oracle.member(pi) {
        return Ok(Rational::from_integer(BigInt::from(0)));
    }
    let candidates: Vec<Permutation> = enumerate_all(n).collect();
    let chunks: Vec<&[Permutation]> = candidates.chunks(256).collect();
    let best = map_slice(exec, &chunks, |chunk| {
        chunk
            .iter()
            .filter(|s| oracle.member(s))
            .map(|s| metric.numerator(pi, s))
            .min()
    })
    .into_iter()
    .flatten()
    .min();
    match best {
        Some(num) => Ok(Rational::new(
            BigInt::from(num),
            BigInt::from(metric.denominator(n)),
        )),
        None => Err(Error::EmptyPropertyAtOrder(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HereditaryCheck {
    Ok,
    /// `pi` is a member but `pi↾indices` is not.
    Counterexample { pi: Permutation, indices: Vec<usize> },
}

/// Exhaustively checks single-element deletions of every member up to `n_max`.
pub fn verify_hereditary(oracle: &PropertyOracle, n_max: usize) -> HereditaryCheck {
    for n in 2..=n_max {
        for pi in enumerate_all(n) {
            if !oracle.member(&pi) {
                continue;
            }
            for skip in 1..=n {
                let indices: Vec<usize> = (1..=n).filter(|&x| x != skip).collect();
                let sub = pi.subpermutation(&indices).expect("valid index set");
                if !oracle.member(&sub) {
                    return HereditaryCheck::Counterexample { pi, indices };
                }
            }
        }
    }
    HereditaryCheck::Ok
}
