//! The one-sided subpermutation tester, its theoretical constants, witness
//! extraction, and the repair construction that maps a permutation with a
//! good approximate structure to a nearby member.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::branching::{walk_parameters, BranchingTree};
use crate::decomposition::{self, GridDecomposition};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::pattern::{is_expansion, KPattern};
use crate::perm::{sample_sorted_into, seeded_rng, Permutation};
use crate::property::PropertyOracle;
use crate::rational::{ceil_nonneg, format_rational, Rational};

/// Constants of the testing and continuity arguments for one `ε₀`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoreticalConstants {
    pub epsilon0: Rational,
    /// Row count `k = ⌈10/ε₀⌉`.
    pub k: BigUint,
    /// Column count `K` from the branching.
    pub columns: BigUint,
    /// Minimum order `M` for the witnessing dichotomy.
    pub m: BigUint,
    /// Least `M` with `(1 - ε′/(K+1))^M <= ε₀/(kK)`.
    pub miss_bound_exponent: BigUint,
    pub m0_testing: BigUint,
    pub m0_continuity: BigUint,
    pub epsilon: Rational,
    pub epsilon_prime: Rational,
    pub delta0: Rational,
    pub tree: TreeSummary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSummary {
    pub property: String,
    pub k: usize,
    pub depth: usize,
    pub root_weight: BigUint,
    pub m_max: usize,
}

fn big(v: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(v.clone()))
}

fn to_biguint(v: BigInt) -> BigUint {
    v.to_biguint().expect("non-negative")
}

pub fn theoretical_constants(
    epsilon0: &Rational,
    tree: &BranchingTree,
) -> Result<TheoreticalConstants> {
    let one = Rational::one();
    if !epsilon0.is_positive() || *epsilon0 >= one {
        return Err(Error::PreconditionViolated("epsilon0 must lie in (0, 1)".into()));
    }
    let ten = Rational::from_integer(BigInt::from(10));
    let k = to_biguint(ceil_nonneg(&(&ten / epsilon0)));
    if BigUint::from(tree.k) != k {
        return Err(Error::TreeMismatch {
            tree_k: tree.k,
            needed_k: k.to_string(),
        });
    }
    let kr = big(&k);
    let epsilon = epsilon0 / &ten;
    let epsilon_prime = epsilon0 / (&ten * &kr + &ten);
    let columns = walk_parameters(tree, &epsilon)?.columns;
    let kk = big(&columns);

    let m = [
        &k * (&k + 1u32) * &columns,
        to_biguint(ceil_nonneg(&(&ten * &kr / epsilon0))),
        to_biguint(ceil_nonneg(&(&ten * &kk / epsilon0))),
    ]
    .into_iter()
    .max()
    .unwrap();

    let k1 = &kk + &one;
    let ratio = (&k1 - &epsilon_prime) / &k1;
    let target = epsilon0 / (&kr * &kk);
    let miss_bound_exponent = least_power_at_most(&ratio, &target)?;

    let m0_testing = [m.clone(), &columns * (&columns + 1u32), miss_bound_exponent.clone()]
        .into_iter()
        .max()
        .unwrap();
    let m0_continuity = m.clone().max(&columns + 1u32);
    let delta0 = (one / big(&m0_continuity)).min(&epsilon_prime / (Rational::from_integer(BigInt::from(4)) * &kk));

    Ok(TheoreticalConstants {
        epsilon0: epsilon0.clone(),
        k,
        columns,
        m,
        miss_bound_exponent,
        m0_testing,
        m0_continuity,
        epsilon,
        epsilon_prime,
        delta0,
        tree: TreeSummary {
            property: tree.property.clone(),
            k: tree.k,
            depth: tree.depth,
            root_weight: tree.root_weight.clone(),
            m_max: tree.m_max,
        },
    })
}

/// Least integer `e >= 1` with `ratio^e <= target`, for `0 < ratio < 1` and
/// `0 < target < 1`.
///
/// A double-precision estimate proposes the answer. Comparisons are done by
/// exact big-integer powering while the powers stay below a few million
/// bits; beyond that, in the log domain when the gap clearly exceeds the
/// rounding error, and by exact powering otherwise.
pub fn least_power_at_most(ratio: &Rational, target: &Rational) -> Result<BigUint> {
    let one = Rational::one();
    if !ratio.is_positive() || *ratio >= one || !target.is_positive() || *target >= one {
        return Err(Error::PreconditionViolated("need 0 < ratio, target < 1".into()));
    }
    let shortfall = (&one - ratio).to_f64().unwrap_or(f64::NAN);
    let per_step = -(-shortfall).ln_1p();
    let goal = -target.to_f64().unwrap_or(f64::NAN).ln();
    if !(per_step.is_finite() && goal.is_finite() && per_step > 0.0) {
        return Err(Error::ConstantOutOfRange("logarithms not representable".into()));
    }
    let estimate = goal / per_step;
    if estimate > (1u64 << 50) as f64 {
        return Err(Error::ConstantOutOfRange(format!("exponent near {estimate:e}")));
    }
    let bits_per_step = ratio.denom().bits().max(target.denom().bits());
    let holds = |e: u64| -> bool {
        if e.saturating_mul(bits_per_step) <= EXACT_BIT_LIMIT {
            return exact_power_at_most(ratio, target, e);
        }
        let gap = e as f64 * per_step - goal;
        let tolerance = 1e-12 * (e as f64 * per_step + goal) + 1e-300;
        if gap.abs() > tolerance {
            return gap >= 0.0;
        }
        exact_power_at_most(ratio, target, e)
    };
    let mut e = (estimate.ceil() as u64).max(1);
    while !holds(e) {
        e += 1;
    }
    while e > 1 && holds(e - 1) {
        e -= 1;
    }
    Ok(BigUint::from(e))
}

const EXACT_BIT_LIMIT: u64 = 1 << 22;

/// `ratio^e <= target` by exact powering.
pub fn exact_power_at_most(ratio: &Rational, target: &Rational, e: u64) -> bool {
    let e = u32::try_from(e).expect("exponent fits in u32 for exact powering");
    let lhs = ratio.numer().pow(e) * target.denom();
    let rhs = target.numer() * ratio.denom().pow(e);
    lhs <= rhs
}

fn magnitude(v: &BigUint) -> String {
    let digits = v.to_string().len();
    if digits <= 12 {
        v.to_string()
    } else {
        format!("{v} (about 10^{})", digits - 1)
    }
}

impl fmt::Display for TheoreticalConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "epsilon0 = {}", format_rational(&self.epsilon0))?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "K = {}", magnitude(&self.columns))?;
        writeln!(f, "M = {}", magnitude(&self.m))?;
        writeln!(f, "miss_bound_exponent = {}", magnitude(&self.miss_bound_exponent))?;
        writeln!(f, "M0_testing = {}", magnitude(&self.m0_testing))?;
        writeln!(f, "M0_continuity = {}", magnitude(&self.m0_continuity))?;
        writeln!(f, "epsilon = {}", format_rational(&self.epsilon))?;
        writeln!(f, "epsilon_prime = {}", format_rational(&self.epsilon_prime))?;
        writeln!(f, "delta0 = {}", format_rational(&self.delta0))?;
        write!(
            f,
            "tree = {} k={} depth={} root_weight={} m_max={}",
            self.tree.property, self.tree.k, self.tree.depth, self.tree.root_weight, self.tree.m_max
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accept,
    Reject,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        })
    }
}

fn check_sample(pi: &Permutation, sample_size: usize) -> Result<()> {
    if sample_size == 0 {
        return Err(Error::EmptyIndexSet);
    }
    if sample_size > pi.len() {
        return Err(Error::SampleTooLarge {
            sample: sample_size,
            order: pi.len(),
        });
    }
    Ok(())
}

/// Accepts iff the subpermutation induced by a uniform `sample_size`-subset
/// of positions is a member.
pub fn test_once(
    pi: &Permutation,
    oracle: &PropertyOracle,
    sample_size: usize,
    seed: u64,
) -> Result<Verdict> {
    check_sample(pi, sample_size)?;
    let mut scratch = Scratch::new(sample_size);
    Ok(run_trial(pi, oracle, sample_size, seed, &mut scratch))
}

struct Scratch {
    picks: Vec<usize>,
    values: Vec<usize>,
    sub: Permutation,
}

impl Scratch {
    fn new(size: usize) -> Self {
        Scratch {
            picks: Vec::with_capacity(size),
            values: Vec::with_capacity(size),
            sub: Permutation::identity(size),
        }
    }
}

fn run_trial(
    pi: &Permutation,
    oracle: &PropertyOracle,
    sample_size: usize,
    seed: u64,
    scratch: &mut Scratch,
) -> Verdict {
    let mut rng = seeded_rng(seed);
    sample_sorted_into(&mut rng, pi.len(), sample_size, &mut scratch.picks);
    scratch.values.clear();
    scratch.values.extend(scratch.picks.iter().map(|&x| pi.at(x)));
    scratch.sub.set_standardized(&scratch.values);
    if oracle.member(&scratch.sub) {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

/// Seed of trial `index` under a master seed (SplitMix64 finalizer).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct TestReport {
    pub verdicts: Vec<Verdict>,
    pub trials: usize,
    pub rejections: usize,
    pub rate: Rational,
    pub seed: u64,
    pub sample_size: usize,
    pub order: usize,
    pub elapsed: Duration,
}

impl TestReport {
    /// `trial,seed,verdict` per trial, then `summary,<master seed>,<rate>`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "seed", "verdict"]).expect("in-memory write");
        for (t, v) in self.verdicts.iter().enumerate() {
            w.write_record([
                t.to_string(),
                trial_seed(self.seed, t as u64).to_string(),
                v.to_string(),
            ])
            .expect("in-memory write");
        }
        w.write_record(["summary".to_string(), self.seed.to_string(), format_rational(&self.rate)])
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
    }
}

const TRIAL_CHUNK: usize = 4096;

pub fn rejection_rate(
    pi: &Permutation,
    oracle: &PropertyOracle,
    sample_size: usize,
    trials: usize,
    seed: u64,
) -> Result<TestReport> {
    rejection_rate_with(pi, oracle, sample_size, trials, seed, Execution::default())
}

/// Runs `trials` independent tests; trial `t` uses `trial_seed(seed, t)`, so
/// the verdicts do not depend on scheduling.
pub fn rejection_rate_with(
    pi: &Permutation,
    oracle: &PropertyOracle,
    sample_size: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<TestReport> {
    check_sample(pi, sample_size)?;
    if trials == 0 {
        return Err(Error::PreconditionViolated("trials must be positive".into()));
    }
    let start = Instant::now();
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let verdicts: Vec<Verdict> = map_range(exec, chunks, |c| {
        let mut scratch = Scratch::new(sample_size);
        let lo = c * TRIAL_CHUNK;
        let hi = (lo + TRIAL_CHUNK).min(trials);
        (lo..hi)
            .map(|t| run_trial(pi, oracle, sample_size, trial_seed(seed, t as u64), &mut scratch))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let rejections = verdicts.iter().filter(|v| **v == Verdict::Reject).count();
    Ok(TestReport {
        rate: Rational::new(BigInt::from(rejections), BigInt::from(trials)),
        verdicts,
        trials,
        rejections,
        seed,
        sample_size,
        order: pi.len(),
        elapsed: start.elapsed(),
    })
}

/// Picks the smallest position of each witnessing cell
/// `R_{x_j, g^{A,order}(j)}` and returns the induced subpermutation, an
/// `order`-expansion of `A`.
pub fn extract_witness(
    pi: &Permutation,
    pattern: &KPattern,
    indices: &[usize],
    g: &GridDecomposition,
) -> Result<Permutation> {
    let per_round = pattern.total_size();
    if indices.is_empty() || !indices.len().is_multiple_of(per_round) {
        return Err(Error::PreconditionViolated(format!(
            "{} witness columns for a pattern of total size {per_round}",
            indices.len()
        )));
    }
    if g.order() != pi.len() {
        return Err(Error::OrderMismatch(g.order(), pi.len()));
    }
    let order = indices.len() / per_round;
    let symbols = pattern.g_sequence(order);
    let mut positions = Vec::with_capacity(indices.len());
    for (&column, &row) in indices.iter().zip(&symbols) {
        if column == 0 || column > g.columns() {
            return Err(Error::IndexOutOfRange { index: column, bound: g.columns() });
        }
        let &first = g
            .cell(column, row)
            .first()
            .ok_or(Error::EmptyWitnessCell { column, row })?;
        positions.push(first);
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::PreconditionViolated("witness columns are not increasing".into()));
    }
    pi.subpermutation(&positions)
}

/// Column index of position `x` in `[N/K]`.
fn column_of(x: usize, n: usize, columns: usize) -> usize {
    ((x - 1) / (n / columns) + 1).min(columns + 1)
}

/// The block of `B` that position `x` is assigned to: with `x` in column
/// `i`, take the first `j` with `i < min(B_j)` (or `|B| + 1`) and return
/// `max(1, j - 1)`. Non-decreasing in `x`, and equal to `j` whenever
/// `i ∈ B_j`.
pub fn block_index(x: usize, blocks: &KPattern, n: usize, columns: usize) -> usize {
    let i = column_of(x, n, columns);
    let j = blocks
        .sets()
        .iter()
        .position(|s| i < s[0])
        .map_or(blocks.len() + 1, |p| p + 1);
    j.saturating_sub(1).max(1)
}

/// Rank of `x`'s row inside `A_{f_B(x)}` when `x` sits in a dense cell of a
/// covered column; 1 otherwise.
pub fn part_rank(
    x: usize,
    pi: &Permutation,
    g: &GridDecomposition,
    pattern: &KPattern,
    blocks: &KPattern,
    threshold: &Rational,
) -> usize {
    let b = block_index(x, blocks, g.order(), g.columns());
    let i = g.column_of(x);
    let row = g.row_of(pi.at(x));
    if blocks.set(b).binary_search(&i).is_ok() && row <= g.rows() && g.is_dense(i, row, threshold) {
        pattern.set(b).iter().filter(|&&a| a <= row).count()
    } else {
        1
    }
}

fn check_repair_inputs(
    pi: &Permutation,
    pattern: &KPattern,
    blocks: &KPattern,
    g: &GridDecomposition,
    threshold: &Rational,
) -> Result<()> {
    let bad = |msg: &str| Err(Error::PreconditionViolated(msg.into()));
    if pattern.len() != blocks.len() {
        return bad("|A| != |B|");
    }
    if g.order() != pi.len() {
        return bad("grid was built for a different permutation");
    }
    if !decomposition::is_approximate(g, pattern, blocks, g.columns(), threshold) {
        return bad("B is not approximate for A");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repair {
    /// `z_1 < ... < z_N`, positions inside the expansion.
    pub z: Vec<usize>,
    pub repaired: Permutation,
}

/// Embeds `π` into the member expansion `σ`: position `x` goes to
/// `z_x = |A|_{f_B(x)-1}·N + (x-1)·|A_{f_B(x)}| + f_A(x)`, and the result is
/// `σ↾{z_1, ..., z_N}`.
pub fn repair(
    pi: &Permutation,
    pattern: &KPattern,
    blocks: &KPattern,
    sigma: &Permutation,
    columns: usize,
    rows: usize,
    threshold: &Rational,
) -> Result<Repair> {
    let n = pi.len();
    let g = decomposition::grid(pi, columns, rows)?;
    check_repair_inputs(pi, pattern, blocks, &g, threshold)?;
    if !is_expansion(sigma, pattern, n) {
        return Err(Error::PreconditionViolated(
            "sigma is not an N-expansion of A".into(),
        ));
    }
    let mut z = Vec::with_capacity(n);
    for x in 1..=n {
        let b = block_index(x, blocks, n, columns);
        let rank = part_rank(x, pi, &g, pattern, blocks, threshold);
        let zx = pattern.prefix_size(b - 1) * n + (x - 1) * pattern.set(b).len() + rank;
        if rank == 0 || z.last().is_some_and(|&prev| zx <= prev) {
            return Err(Error::NonMonotoneZ(x));
        }
        z.push(zx);
    }
    if *z.last().unwrap() > n * pattern.total_size() {
        return Err(Error::NonMonotoneZ(n));
    }
    let repaired = sigma.subpermutation(&z)?;
    Ok(Repair { z, repaired })
}

/// [`repair`] with `σ` found by searching the property for a member
/// `N`-expansion of `A`. The result is checked for membership.
#[allow(clippy::too_many_arguments)]
pub fn repair_with_oracle(
    pi: &Permutation,
    pattern: &KPattern,
    blocks: &KPattern,
    oracle: &PropertyOracle,
    columns: usize,
    rows: usize,
    threshold: &Rational,
    node_budget: u64,
) -> Result<Repair> {
    let sigma = crate::pattern::find_member_expansion(pattern, pi.len(), oracle, node_budget)?
        .ok_or_else(|| {
            Error::PreconditionViolated(format!("{pattern} has no member {}-expansion", pi.len()))
        })?;
    let out = repair(pi, pattern, blocks, &sigma, columns, rows, threshold)?;
    if !oracle.member(&out.repaired) {
        return Err(Error::InternalContradiction(
            "repaired permutation is not a member; the oracle is not hereditary".into(),
        ));
    }
    Ok(out)
}

/// Type flags of a pair `(x, x')`, bit `t - 1` for Type `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairTypes(u8);

impl PairTypes {
    pub fn has(self, t: usize) -> bool {
        self.0 >> (t - 1) & 1 == 1
    }

    pub fn is_untyped(self) -> bool {
        self.0 == 0
    }

    fn set(&mut self, t: usize) {
        self.0 |= 1 << (t - 1);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairLedger {
    /// Pairs carrying Types I..V (index 0..5); a pair may count under several.
    pub by_type: [u64; 5],
    pub untyped: u64,
    pub total: u64,
}

impl PairLedger {
    pub fn typed(&self) -> u64 {
        self.total - self.untyped
    }
}

/// Classifies pairs of positions by the five error types of the repair.
pub struct PairClassifier<'a> {
    pi: &'a Permutation,
    g: &'a GridDecomposition,
    blocks: &'a KPattern,
    threshold: &'a Rational,
}

impl<'a> PairClassifier<'a> {
    pub fn new(
        pi: &'a Permutation,
        g: &'a GridDecomposition,
        blocks: &'a KPattern,
        threshold: &'a Rational,
    ) -> Self {
        PairClassifier { pi, g, blocks, threshold }
    }

    pub fn types(&self, x: usize, xp: usize) -> PairTypes {
        let (columns, rows) = (self.g.columns(), self.g.rows());
        let (i, ip) = (self.g.column_of(x), self.g.column_of(xp));
        let (j, jp) = (self.g.row_of(self.pi.at(x)), self.g.row_of(self.pi.at(xp)));
        let mut t = PairTypes::default();
        let type1 = i == columns + 1 || ip == columns + 1;
        let type2 = j == rows + 1 || jp == rows + 1;
        if type1 {
            t.set(1);
        }
        if type2 {
            t.set(2);
        }
        if !type1 {
            let covered = |pos: usize, col: usize| {
                let b = block_index(pos, self.blocks, self.g.order(), columns);
                self.blocks.set(b).binary_search(&col).is_ok()
            };
            if !covered(x, i) || !covered(xp, ip) {
                t.set(3);
            }
        }
        if !type1 && !type2 && (!self.g.is_dense(i, j, self.threshold) || !self.g.is_dense(ip, jp, self.threshold)) {
            t.set(4);
        }
        if !type2 && j == jp {
            t.set(5);
        }
        t
    }

    pub fn ledger(&self) -> PairLedger {
        let n = self.pi.len();
        let mut ledger = PairLedger::default();
        for x in 1..=n {
            for xp in x + 1..=n {
                let t = self.types(x, xp);
                ledger.total += 1;
                if t.is_untyped() {
                    ledger.untyped += 1;
                }
                for (ty, count) in ledger.by_type.iter_mut().enumerate() {
                    if t.has(ty + 1) {
                        *count += 1;
                    }
                }
            }
        }
        ledger
    }
}

pub fn classify_pairs(
    pi: &Permutation,
    _pattern: &KPattern,
    blocks: &KPattern,
    g: &GridDecomposition,
    threshold: &Rational,
) -> PairLedger {
    PairClassifier::new(pi, g, blocks, threshold).ledger()
}

/// `typed pairs / C(N, 2)`, the bound the repair distance must respect.
pub fn typed_fraction(ledger: &PairLedger) -> Rational {
    if ledger.total.is_zero() {
        return Rational::zero();
    }
    Rational::new(BigInt::from(ledger.typed()), BigInt::from(ledger.total))
}
