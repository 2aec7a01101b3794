//! k-patterns and their m-expansions, the badness decision with its order,
//! reductions and scores.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{standardize_into, Permutation};
use crate::property::PropertyOracle;

/// A non-empty sequence of non-empty subsets of `[k]`.
///
/// Sets are stored sorted; indices into the sequence are 1-based in the
/// public methods.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr", into = "PatternRepr")]
pub struct KPattern {
    k: usize,
    sets: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PatternRepr {
    k: usize,
    sets: Vec<Vec<usize>>,
}

impl TryFrom<PatternRepr> for KPattern {
    type Error = Error;
    fn try_from(r: PatternRepr) -> Result<Self> {
        KPattern::new(r.k, r.sets)
    }
}

impl From<KPattern> for PatternRepr {
    fn from(p: KPattern) -> Self {
        PatternRepr { k: p.k, sets: p.sets }
    }
}

impl KPattern {
    pub fn new(k: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::PreconditionViolated("alphabet size k must be positive".into()));
        }
        if sets.is_empty() {
            return Err(Error::PreconditionViolated("pattern must have at least one set".into()));
        }
        let mut clean = Vec::with_capacity(sets.len());
        for mut s in sets {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::PreconditionViolated("pattern sets must be non-empty".into()));
            }
            if s[0] == 0 || *s.last().unwrap() > k {
                return Err(Error::PreconditionViolated(format!(
                    "set {s:?} is not a subset of [{k}]"
                )));
            }
            clean.push(s);
        }
        Ok(KPattern { k, sets: clean })
    }

    /// The single set `[k]`.
    pub fn basic(k: usize) -> Self {
        assert!(k >= 1);
        KPattern {
            k,
            sets: vec![(1..=k).collect()],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Length `|A|`.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// `A_i`, 1-based.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i - 1]
    }

    /// `|A|_i = |A_1| + ... + |A_i|`, with `|A|_0 = 0`.
    pub fn prefix_size(&self, i: usize) -> usize {
        self.sets[..i].iter().map(Vec::len).sum()
    }

    /// `|A|_{|A|}`.
    pub fn total_size(&self) -> usize {
        self.prefix_size(self.len())
    }

    pub fn is_basic(&self) -> bool {
        self.sets.len() == 1 && self.sets[0].len() == self.k
    }

    pub fn is_simple(&self) -> bool {
        self.sets.iter().all(|s| s.len() == 1)
    }

    /// Every element of an earlier set is below every element of a later one.
    pub fn is_monotone(&self) -> bool {
        self.sets
            .windows(2)
            .all(|w| w[0].last().unwrap() < w[1].first().unwrap())
    }

    /// Number of sets containing `symbol`.
    pub fn multiplicity(&self, symbol: usize) -> usize {
        self.sets.iter().filter(|s| s.binary_search(&symbol).is_ok()).count()
    }

    /// `(m_1, ..., m_k)` where `m_i` counts the sets of size `k + 1 - i`.
    pub fn score(&self) -> Vec<usize> {
        let mut score = vec![0; self.k];
        for s in &self.sets {
            score[self.k - s.len()] += 1;
        }
        score
    }

    /// `g^{A,m}(j)` for `1 <= j <= m·|A|_{|A|}`.
    pub fn g_value(&self, m: usize, j: usize) -> Result<usize> {
        let bound = m * self.total_size();
        if j == 0 || j > bound {
            return Err(Error::IndexOutOfRange { index: j, bound });
        }
        let mut before = 0;
        for set in &self.sets {
            let end = before + m * set.len();
            if j <= end {
                let offset = j - before;
                // `a mod b` lands in [b], not [0, b)
                let r = (offset - 1) % set.len() + 1;
                return Ok(set[r - 1]);
            }
            before = end;
        }
        unreachable!("j within bound")
    }

    /// The whole sequence `g^{A,m}(1), ..., g^{A,m}(m·|A|_{|A|})`.
    pub fn g_sequence(&self, m: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(m * self.total_size());
        for set in &self.sets {
            for _ in 0..m {
                out.extend_from_slice(set);
            }
        }
        out
    }
}

impl fmt::Display for KPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.sets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (t, v) in s.iter().enumerate() {
                if t > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}

/// All-pairs check of the expansion definition.
pub fn is_expansion(pi: &Permutation, pattern: &KPattern, m: usize) -> bool {
    if pi.len() != m * pattern.total_size() {
        return false;
    }
    let g = pattern.g_sequence(m);
    let v = pi.images();
    for j in 0..g.len() {
        for jj in 0..g.len() {
            if g[j] < g[jj] && v[j] >= v[jj] {
                return false;
            }
        }
    }
    true
}

/// `∏_v (m·mult(v))!`.
pub fn count_expansions(pattern: &KPattern, m: usize) -> BigUint {
    let mut total = BigUint::one();
    for v in 1..=pattern.k() {
        for f in 2..=m * pattern.multiplicity(v) {
            total *= BigUint::from(f);
        }
    }
    total
}

/// Streams every m-expansion of `pattern`, refusing when there are more than `cap`.
pub fn enumerate_expansions(pattern: &KPattern, m: usize, cap: u64) -> Result<Expansions> {
    let count = count_expansions(pattern, m);
    if count > BigUint::from(cap) {
        return Err(Error::CapExceeded {
            count: count.to_string(),
            cap,
        });
    }
    let g = pattern.g_sequence(m);
    let k = pattern.k();
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (p, &v) in g.iter().enumerate() {
        positions[v].push(p);
    }
    // symbol v owns the values just above all smaller symbols' blocks
    let mut blocks = Vec::new();
    let mut offset = 0;
    for pos in positions.into_iter().skip(1) {
        if pos.is_empty() {
            continue;
        }
        let order: Vec<usize> = (offset + 1..=offset + pos.len()).collect();
        offset += pos.len();
        blocks.push(SymbolBlock {
            positions: pos,
            values: order,
        });
    }
    Ok(Expansions {
        len: g.len(),
        blocks,
        done: false,
    })
}

struct SymbolBlock {
    positions: Vec<usize>,
    values: Vec<usize>,
}

pub struct Expansions {
    len: usize,
    blocks: Vec<SymbolBlock>,
    done: bool,
}

impl Iterator for Expansions {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if self.done {
            return None;
        }
        let mut images = vec![0; self.len];
        for b in &self.blocks {
            for (&p, &v) in b.positions.iter().zip(&b.values) {
                images[p] = v;
            }
        }
        // odometer: advance the last block, carrying on wrap-around
        let mut i = self.blocks.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            let vals = &mut self.blocks[i].values;
            if crate::property::next_lexicographic(vals) {
                break;
            }
            vals.sort_unstable();
        }
        Some(Permutation::from_images_unchecked(images))
    }
}

/// Searches for an m-expansion of `pattern` inside the property.
///
/// Positions are filled left to right, each from its symbol's value block.
/// A prefix whose induced pattern is not a member is abandoned: for a
/// hereditary property no completion of it can be a member. Returns
/// `Ok(None)` only after the search space is exhausted; running out of
/// `node_budget` is an error.
pub fn find_member_expansion(
    pattern: &KPattern,
    m: usize,
    oracle: &PropertyOracle,
    node_budget: u64,
) -> Result<Option<Permutation>> {
    let g = pattern.g_sequence(m);
    let n = g.len();
    let k = pattern.k();
    let mut block_start = vec![0usize; k + 2];
    let mut sizes = vec![0usize; k + 1];
    for &v in &g {
        sizes[v] += 1;
    }
    for v in 1..=k {
        block_start[v + 1] = block_start[v] + sizes[v];
    }
    let mut nodes = 0u64;
    if let Some(sigma) = monotone_member(&g, &block_start, &sizes, oracle, node_budget, &mut nodes)? {
        return Ok(Some(sigma));
    }
    let mut search = MemberSearch {
        g: &g,
        block_start: &block_start,
        oracle,
        used: vec![false; n + 1],
        values: vec![0; n],
        scratch: vec![0; n],
        nodes,
        budget: node_budget,
    };
    if search.extend(0)? {
        Ok(Some(Permutation::from_images_unchecked(search.values)))
    } else {
        Ok(None)
    }
}

/// Tries the expansions whose symbol blocks are each filled monotonically
/// before falling back to the full search.
fn monotone_member(
    g: &[usize],
    block_start: &[usize],
    sizes: &[usize],
    oracle: &PropertyOracle,
    budget: u64,
    nodes: &mut u64,
) -> Result<Option<Permutation>> {
    let symbols: Vec<usize> = (1..sizes.len()).filter(|&v| sizes[v] > 0).collect();
    if symbols.len() > 10 {
        return Ok(None);
    }
    let mut next = vec![0usize; sizes.len()];
    let mut descending = vec![false; sizes.len()];
    let mut values = vec![0usize; g.len()];
    for mask in 0u32..1 << symbols.len() {
        *nodes += 1;
        if *nodes > budget {
            return Err(Error::BudgetExhausted(budget));
        }
        for (bit, &v) in symbols.iter().enumerate() {
            descending[v] = mask >> bit & 1 == 1;
            next[v] = if descending[v] { block_start[v + 1] } else { block_start[v] + 1 };
        }
        for (pos, &v) in g.iter().enumerate() {
            values[pos] = next[v];
            if descending[v] {
                next[v] -= 1;
            } else {
                next[v] += 1;
            }
        }
        let candidate = Permutation::from_images_unchecked(values.clone());
        if oracle.member(&candidate) {
            return Ok(Some(candidate));
        }
    }
    Ok(None)
}

struct MemberSearch<'a> {
    g: &'a [usize],
    block_start: &'a [usize],
    oracle: &'a PropertyOracle,
    used: Vec<bool>,
    values: Vec<usize>,
    scratch: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl MemberSearch<'_> {
    fn extend(&mut self, pos: usize) -> Result<bool> {
        if pos == self.g.len() {
            return Ok(true);
        }
        let v = self.g[pos];
        for value in self.block_start[v] + 1..=self.block_start[v + 1] {
            if self.used[value] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExhausted(self.budget));
            }
            self.values[pos] = value;
            self.used[value] = true;
            standardize_into(&self.values[..=pos], &mut self.scratch[..=pos]);
            let prefix = Permutation::from_images_unchecked(self.scratch[..=pos].to_vec());
            if self.oracle.member(&prefix) && self.extend(pos + 1)? {
                return Ok(true);
            }
            self.used[value] = false;
        }
        Ok(false)
    }
}

/// Outcome of the budgeted badness decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadnessVerdict {
    /// No m-expansion is a member; the payload is the least such m.
    Bad(usize),
    /// Member expansions exist for every m up to the payload.
    GoodUpTo(usize),
}

impl BadnessVerdict {
    pub fn is_bad(self) -> bool {
        matches!(self, BadnessVerdict::Bad(_))
    }

    /// The property order for bad patterns.
    pub fn order(self) -> Option<usize> {
        match self {
            BadnessVerdict::Bad(m) => Some(m),
            BadnessVerdict::GoodUpTo(_) => None,
        }
    }
}

/// Scans `m = 1, 2, ..., m_max`; the first m without a member expansion is
/// the exact order, since a member m-expansion contains a member
/// (m-1)-expansion.
pub fn decide_pattern(
    pattern: &KPattern,
    oracle: &PropertyOracle,
    m_max: usize,
    node_budget: u64,
) -> Result<BadnessVerdict> {
    for m in 1..=m_max {
        if find_member_expansion(pattern, m, oracle, node_budget)?.is_none() {
            return Ok(BadnessVerdict::Bad(m));
        }
    }
    Ok(BadnessVerdict::GoodUpTo(m_max))
}

/// Number of children before deduplication:
/// `Σ_i Σ_{L=1}^{|A_i|·order} (2^{|A_i|} - 2)^L` over sets with `|A_i| >= 2`.
pub fn reduction_count_bound(pattern: &KPattern, order: usize) -> BigUint {
    let mut total = BigUint::from(0u32);
    for s in pattern.sets() {
        if s.len() < 2 {
            continue;
        }
        let choices = (BigUint::one() << s.len()) - BigUint::from(2u32);
        let mut power = BigUint::one();
        for _ in 0..s.len() * order {
            power *= &choices;
            total += &power;
        }
    }
    total
}

/// Every pattern obtained by replacing one set `A_i` with `1..=|A_i|·order`
/// proper non-empty subsets of it (repeats allowed), each distinct result
/// once, in a fixed order: by position, then length, then lexicographically
/// over subsets ordered by bitmask.
pub fn reductions(pattern: &KPattern, order: usize) -> Reductions {
    let slots = pattern
        .sets()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(i, s)| {
            let subsets = proper_subsets(s);
            ReductionSlot {
                index: i,
                subsets,
                max_len: s.len() * order,
            }
        })
        .collect();
    Reductions {
        pattern: pattern.clone(),
        slots,
        slot: 0,
        odometer: vec![0],
        seen: HashSet::new(),
    }
}

fn proper_subsets(set: &[usize]) -> Vec<Vec<usize>> {
    let full = (1u64 << set.len()) - 1;
    (1..full)
        .map(|mask| {
            set.iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

struct ReductionSlot {
    index: usize,
    subsets: Vec<Vec<usize>>,
    max_len: usize,
}

pub struct Reductions {
    pattern: KPattern,
    slots: Vec<ReductionSlot>,
    slot: usize,
    odometer: Vec<usize>,
    seen: HashSet<KPattern>,
}

impl Reductions {
    fn advance(&mut self) {
        let slot = &self.slots[self.slot];
        let base = slot.subsets.len();
        let mut i = self.odometer.len();
        while i > 0 {
            i -= 1;
            self.odometer[i] += 1;
            if self.odometer[i] < base {
                return;
            }
            self.odometer[i] = 0;
        }
        if self.odometer.len() < slot.max_len {
            self.odometer = vec![0; self.odometer.len() + 1];
        } else {
            self.slot += 1;
            self.odometer = vec![0];
        }
    }
}

impl Iterator for Reductions {
    type Item = KPattern;

    fn next(&mut self) -> Option<KPattern> {
        while self.slot < self.slots.len() {
            let slot = &self.slots[self.slot];
            let mut sets = Vec::with_capacity(self.pattern.len() + self.odometer.len());
            sets.extend_from_slice(&self.pattern.sets[..slot.index]);
            sets.extend(self.odometer.iter().map(|&c| slot.subsets[c].clone()));
            sets.extend_from_slice(&self.pattern.sets[slot.index + 1..]);
            let child = KPattern {
                k: self.pattern.k,
                sets,
            };
            self.advance();
            if self.seen.insert(child.clone()) {
                return Some(child);
            }
        }
        None
    }
}
