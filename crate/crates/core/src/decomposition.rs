//! Grid decompositions of a permutation: `K` column parts of the domain,
//! `k` row parts of the range, exact cell densities, and the refinement walk
//! down a branching that ends in either an approximate or a witnessing
//! K-pattern.

use std::ops::Range;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::branching::{walk_parameters, BranchingNode, BranchingTree};
use crate::error::{Error, Result};
use crate::pattern::{BadnessVerdict, KPattern};
use crate::perm::Permutation;
use crate::rational::{floor_nonneg, Rational};

/// `[a/b]_i` as a half-open range of 1-based integers.
///
/// Parts `1..=b` have `⌊a/b⌋` elements each; part `b + 1` holds the
/// remaining `a - b⌊a/b⌋ <= b - 1` integers and may be empty.
pub fn interval_part(a: usize, b: usize, i: usize) -> Result<Range<usize>> {
    if b == 0 || b > a {
        return Err(Error::DimensionError(format!("need 1 <= b <= a, got a = {a}, b = {b}")));
    }
    if i == 0 || i > b + 1 {
        return Err(Error::IndexOutOfRange { index: i, bound: b + 1 });
    }
    let w = a / b;
    if i <= b {
        Ok((i - 1) * w + 1..i * w + 1)
    } else {
        Ok(b * w + 1..a + 1)
    }
}

/// The `R_{i,j}` cells and `ρ_{i,j}` densities of a permutation for fixed
/// `(K, k)`. Column and row `K + 1` / `k + 1` are the overflow parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridDecomposition {
    n: usize,
    columns: usize,
    rows: usize,
    column_width: usize,
    row_height: usize,
    cells: Vec<Vec<usize>>,
}

pub fn grid(pi: &Permutation, columns: usize, rows: usize) -> Result<GridDecomposition> {
    let n = pi.len();
    if rows == 0 || rows > columns || columns > n {
        return Err(Error::DimensionError(format!(
            "need 1 <= k <= K <= N, got k = {rows}, K = {columns}, N = {n}"
        )));
    }
    let column_width = n / columns;
    let row_height = n / rows;
    let mut g = GridDecomposition {
        n,
        columns,
        rows,
        column_width,
        row_height,
        cells: vec![Vec::new(); (columns + 1) * (rows + 1)],
    };
    for x in 1..=n {
        let (i, j) = (g.column_of(x), g.row_of(pi.at(x)));
        let idx = g.index(i, j);
        g.cells[idx].push(x);
    }
    Ok(g)
}

impl GridDecomposition {
    fn index(&self, i: usize, j: usize) -> usize {
        assert!((1..=self.columns + 1).contains(&i) && (1..=self.rows + 1).contains(&j));
        (i - 1) * (self.rows + 1) + (j - 1)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// `K`.
    pub fn columns(&self) -> usize {
        self.columns
    }

    /// `k`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `⌊N/K⌋`, the density denominator.
    pub fn column_width(&self) -> usize {
        self.column_width
    }

    /// The part `i` of `[N/K]` containing position `x`.
    pub fn column_of(&self, x: usize) -> usize {
        ((x - 1) / self.column_width + 1).min(self.columns + 1)
    }

    /// The part `j` of `[N/k]` containing value `v`.
    pub fn row_of(&self, v: usize) -> usize {
        ((v - 1) / self.row_height + 1).min(self.rows + 1)
    }

    /// `R_{i,j}`, ascending.
    pub fn cell(&self, i: usize, j: usize) -> &[usize] {
        &self.cells[self.index(i, j)]
    }

    pub fn count(&self, i: usize, j: usize) -> usize {
        self.cell(i, j).len()
    }

    /// `ρ_{i,j} = |R_{i,j}| / ⌊N/K⌋`.
    pub fn density(&self, i: usize, j: usize) -> Rational {
        Rational::new(BigInt::from(self.count(i, j)), BigInt::from(self.column_width))
    }

    /// `ρ_{i,j} >= threshold`, without building the rational.
    pub fn is_dense(&self, i: usize, j: usize, threshold: &Rational) -> bool {
        BigInt::from(self.count(i, j)) * threshold.denom()
            >= threshold.numer() * BigInt::from(self.column_width)
    }

    /// CSV dump with header `i,j,count,density`, overflow parts included.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "j", "count", "density"]).expect("in-memory write");
        for i in 1..=self.columns + 1 {
            for j in 1..=self.rows + 1 {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    self.count(i, j).to_string(),
                    crate::rational::format_rational(&self.density(i, j)),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
    }
}

/// Smallest row `y` with `ρ_{x,y} >= threshold`.
pub fn dense_symbol_exists(g: &GridDecomposition, x: usize, threshold: &Rational) -> Result<usize> {
    if x == 0 || x > g.columns {
        return Err(Error::IndexOutOfRange { index: x, bound: g.columns });
    }
    (1..=g.rows)
        .find(|&y| g.is_dense(x, y, threshold))
        .ok_or(Error::NoDenseCell(x))
}

/// `B` is `(A, slack, threshold)`-approximate: same length, monotone, covers
/// all but `slack` columns, and every dense cell in a column of `B_i` has its
/// row in `A_i`.
pub fn is_approximate(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    slack: usize,
    threshold: &Rational,
) -> bool {
    a.len() == b.len()
        && a.k() == g.rows
        && b.k() == g.columns
        && b.is_monotone()
        && b.total_size() + slack >= g.columns
        && dense_rows_inside(g, a, b, threshold)
}

fn dense_rows_inside(g: &GridDecomposition, a: &KPattern, b: &KPattern, threshold: &Rational) -> bool {
    a.sets().iter().zip(b.sets()).all(|(allowed, cols)| {
        cols.iter().all(|&x| {
            (1..=g.rows)
                .filter(|y| allowed.binary_search(y).is_err())
                .all(|y| !g.is_dense(x, y, threshold))
        })
    })
}

/// Greedy left-to-right search for witnessing columns
/// `x_1 < ... < x_{|A|_{|A|}·order}`.
///
/// Taking the smallest feasible column at each step is complete: feasibility
/// of a later step only depends on the previous column being small.
pub fn find_witnessing(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    threshold: &Rational,
    order: usize,
) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    let mut out = Vec::with_capacity(a.total_size() * order);
    let mut last = 0;
    for (set, cols) in a.sets().iter().zip(b.sets()) {
        for _ in 0..order {
            for &y in set {
                let x = *cols
                    .iter()
                    .find(|&&x| x > last && x <= g.columns && g.is_dense(x, y, threshold))?;
                out.push(x);
                last = x;
            }
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refinement {
    AlreadyWitnessing(Vec<usize>),
    Refined { pattern: KPattern, blocks: KPattern },
}

/// One refinement step: either `B` already witnesses `A`, or one failing
/// block `B_j` is cut at the greedy witness columns into gaps, gaps smaller
/// than `m` are dropped, and `A_j` is replaced by the dense-row sets of the
/// surviving gaps.
///
/// The approximate slack is not an input; it is `K - |B|_{|B|}`, which the
/// caller increases by at most `m·k·order` per step.
pub fn refine(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    threshold: &Rational,
    m: usize,
    order: usize,
) -> Result<Refinement> {
    let bad = |msg: String| Err(Error::PreconditionViolated(msg));
    let k = g.rows;
    if a.len() != b.len() {
        return bad(format!("|A| = {} but |B| = {}", a.len(), b.len()));
    }
    if a.k() != k || b.k() != g.columns {
        return bad("pattern alphabets do not match the grid".into());
    }
    if !b.is_monotone() {
        return bad("B is not monotone".into());
    }
    let limit = Rational::new(BigInt::from(1), BigInt::from(k + 1));
    if *threshold <= Rational::from_integer(BigInt::from(0)) || *threshold > limit {
        return bad(format!("threshold must lie in (0, 1/{}]", k + 1));
    }
    if m == 0 || order == 0 {
        return bad("m and the order must be positive".into());
    }
    if !dense_rows_inside(g, a, b, threshold) {
        return bad("B is not approximate for A".into());
    }
    if let Some(indices) = find_witnessing(g, a, b, threshold, order) {
        return Ok(Refinement::AlreadyWitnessing(indices));
    }
    let need = m * k * order;
    if let Some(i) = b.sets().iter().position(|s| s.len() < need) {
        return bad(format!("|B_{}| = {} < m·k·order = {need}", i + 1, b.set(i + 1).len()));
    }

    // smallest block without its own witness tuple
    let (j, picks) = (1..=a.len())
        .find_map(|j| {
            let picks = block_greedy(g, a, b, threshold, order, j);
            (picks.len() < a.set(j).len() * order).then_some((j, picks))
        })
        .ok_or_else(|| {
            Error::InternalContradiction("no block fails although B is not witnessing".into())
        })?;
    if a.set(j).len() == 1 {
        return bad(format!(
            "block {j} has a single symbol yet lacks dense columns; the permutation is too short for the grid"
        ));
    }

    let cols = b.set(j);
    let mut bounds = Vec::with_capacity(picks.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(&picks);
    bounds.push(g.columns + 1);
    let gaps: Vec<Vec<usize>> = bounds
        .windows(2)
        .map(|w| cols.iter().copied().filter(|&x| x > w[0] && x < w[1]).collect())
        .filter(|gap: &Vec<usize>| gap.len() >= m)
        .collect();
    if gaps.is_empty() {
        return bad(format!("block {j} leaves no gap of size >= {m}"));
    }
    let mut dense_sets = Vec::with_capacity(gaps.len());
    for gap in &gaps {
        let rows: Vec<usize> = (1..=k)
            .filter(|&y| gap.iter().any(|&x| g.is_dense(x, y, threshold)))
            .collect();
        if rows.is_empty() {
            return bad(format!(
                "column {} has no dense cell; the permutation is too short for the grid",
                gap[0]
            ));
        }
        if rows.len() >= a.set(j).len() || !rows.iter().all(|y| a.set(j).contains(y)) {
            return Err(Error::InternalContradiction(format!(
                "dense rows {rows:?} are not a proper subset of A_{j}"
            )));
        }
        dense_sets.push(rows);
    }

    let splice = |p: &KPattern, replacement: Vec<Vec<usize>>, alphabet: usize| {
        let mut sets: Vec<Vec<usize>> = p.sets()[..j - 1].to_vec();
        sets.extend(replacement);
        sets.extend_from_slice(&p.sets()[j..]);
        KPattern::new(alphabet, sets).expect("non-empty subsets")
    };
    Ok(Refinement::Refined {
        pattern: splice(a, dense_sets, k),
        blocks: splice(b, gaps, g.columns),
    })
}

/// Greedy dense columns inside `B_j` for the symbols of block `j` of
/// `g^{A,order}`; stops at the first symbol with no column available.
pub fn block_greedy(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    threshold: &Rational,
    order: usize,
    j: usize,
) -> Vec<usize> {
    let mut picks = Vec::new();
    let mut last = 0;
    for _ in 0..order {
        for &y in a.set(j) {
            match b.set(j).iter().find(|&&x| x > last && g.is_dense(x, y, threshold)) {
                Some(&x) => {
                    picks.push(x);
                    last = x;
                }
                None => return picks,
            }
        }
    }
    picks
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkOutcome {
    Witnessing {
        pattern: KPattern,
        blocks: KPattern,
        order: usize,
        indices: Vec<usize>,
    },
    Approximate {
        pattern: KPattern,
        blocks: KPattern,
        slack: usize,
    },
}

impl WalkOutcome {
    pub fn pattern(&self) -> &KPattern {
        match self {
            WalkOutcome::Witnessing { pattern, .. } | WalkOutcome::Approximate { pattern, .. } => {
                pattern
            }
        }
    }

    pub fn blocks(&self) -> &KPattern {
        match self {
            WalkOutcome::Witnessing { blocks, .. } | WalkOutcome::Approximate { blocks, .. } => {
                blocks
            }
        }
    }
}

/// A completed walk together with the grid it ran on.
#[derive(Debug, Clone)]
pub struct Walk {
    pub grid: GridDecomposition,
    pub outcome: WalkOutcome,
    /// Patterns of the visited nodes, root first.
    pub path: Vec<KPattern>,
}

/// Walks from the root of `tree`, refining the basic K-pattern at each bad
/// node until it witnesses a bad pattern or reaches a good leaf.
///
/// `K = ⌈d·w₀/ε⌉`; requires `threshold <= 1/(k+1)` and `|π| >= k(k+1)K`.
pub fn walk(
    pi: &Permutation,
    tree: &BranchingTree,
    epsilon: &Rational,
    threshold: &Rational,
) -> Result<Walk> {
    let params = walk_parameters(tree, epsilon)?;
    let columns = params
        .columns
        .to_usize()
        .ok_or_else(|| Error::PreconditionViolated("column count K does not fit in memory".into()))?;
    let k = tree.k;
    let limit = Rational::new(BigInt::from(1), BigInt::from(k + 1));
    if *threshold <= Rational::from_integer(BigInt::from(0)) || *threshold > limit {
        return Err(Error::PreconditionViolated(format!(
            "threshold must lie in (0, 1/{}]",
            k + 1
        )));
    }
    let need = k * (k + 1) * columns;
    if pi.len() < need {
        return Err(Error::PreconditionViolated(format!(
            "order {} below k(k+1)K = {need}",
            pi.len()
        )));
    }
    let g = grid(pi, columns, k)?;
    let w0 = params
        .root_weight
        .to_usize()
        .ok_or_else(|| Error::PreconditionViolated("root weight too large".into()))?;

    let contradiction = |msg: String| Err(Error::InternalContradiction(msg));
    let mut node: &BranchingNode = &tree.root;
    let mut blocks = KPattern::basic(columns);
    let mut path = vec![node.pattern.clone()];
    for step in 0.. {
        if !is_approximate(&g, &node.pattern, &blocks, step * w0, threshold) {
            return contradiction(format!("loop invariant lost at step {step}"));
        }
        let order = match node.verdict {
            BadnessVerdict::GoodUpTo(_) => {
                let scaled = epsilon * Rational::from_integer(BigInt::from(columns));
                let slack = floor_nonneg(&scaled).to_usize().expect("slack <= K");
                if !is_approximate(&g, &node.pattern, &blocks, slack, threshold) {
                    return contradiction(format!(
                        "good leaf {} reached with more than {slack} uncovered columns",
                        node.pattern
                    ));
                }
                let outcome = WalkOutcome::Approximate {
                    pattern: node.pattern.clone(),
                    blocks,
                    slack,
                };
                return Ok(Walk { grid: g, outcome, path });
            }
            BadnessVerdict::Bad(order) => order,
        };
        if let Some(indices) = find_witnessing(&g, &node.pattern, &blocks, threshold, order) {
            let outcome = WalkOutcome::Witnessing {
                pattern: node.pattern.clone(),
                blocks,
                order,
                indices,
            };
            return Ok(Walk { grid: g, outcome, path });
        }
        if node.is_leaf() {
            return contradiction(format!(
                "bad simple leaf {} has no witnessing columns",
                node.pattern
            ));
        }
        let m = node
            .max_child_weight()
            .to_usize()
            .ok_or_else(|| Error::PreconditionViolated("child weight too large".into()))?;
        match refine(&g, &node.pattern, &blocks, threshold, m, order)? {
            Refinement::AlreadyWitnessing(_) => {
                return contradiction("refine found witnesses the walk missed".into())
            }
            Refinement::Refined {
                pattern,
                blocks: next,
            } => match node.child_with_pattern(&pattern) {
                Some(child) => {
                    node = child;
                    blocks = next;
                    path.push(pattern);
                }
                None => {
                    return contradiction(format!(
                        "reduction {pattern} is not a child of {}",
                        node.pattern
                    ))
                }
            },
        }
    }
    unreachable!("the branching is finite")
}
