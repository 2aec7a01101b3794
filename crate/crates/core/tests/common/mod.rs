#![allow(dead_code)]

use num_bigint::BigUint;
use permtest::branching::{build_branching, BranchingLimits, BranchingNode, BranchingTree};
use permtest::decomposition::{walk, GridDecomposition, WalkOutcome};
use permtest::pattern::{reductions, BadnessVerdict, KPattern};
use permtest::perm::Permutation;
use permtest::property::PropertyOracle;
use permtest::Rational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub type TestRng = rand::rngs::StdRng;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

pub fn perm(images: &[usize]) -> Permutation {
    Permutation::new(images.to_vec()).unwrap()
}

pub fn pat(k: usize, sets: &[&[usize]]) -> KPattern {
    KPattern::new(k, sets.iter().map(|s| s.to_vec()).collect()).unwrap()
}

pub fn av(patterns: &[&[usize]]) -> PropertyOracle {
    PropertyOracle::avoiding_images(patterns).unwrap()
}

pub fn inversions(images: &[usize]) -> usize {
    let n = images.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| images[i] > images[j])
        .count()
}

/// Heap's algorithm, independent of the library's lexicographic enumerator.
pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<usize> = (1..=n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// All `m`-subsets of `1..=n`, each ascending.
pub fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for x in start..=n {
            cur.push(x);
            go(x + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, m, &mut Vec::new(), &mut out);
    out
}

/// Ranks of `values` by sorting.
pub fn pattern_of(values: &[usize]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    values
        .iter()
        .map(|v| sorted.binary_search(v).unwrap() + 1)
        .collect()
}

pub fn contains_naive(pi: &[usize], tau: &[usize]) -> bool {
    subsets(pi.len(), tau.len()).iter().any(|x| {
        let vals: Vec<usize> = x.iter().map(|&i| pi[i - 1]).collect();
        pattern_of(&vals) == tau
    })
}

/// Random member of Av(231): popping a stack fed with 1..n at random
/// moments yields a member of Av(312), whose inverse avoids 231.
pub fn random_av231(n: usize, r: &mut TestRng) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut stack = Vec::new();
    let mut next = 1;
    while out.len() < n {
        let push = next <= n && (stack.is_empty() || r.gen_bool(0.5));
        if push {
            stack.push(next);
            next += 1;
        } else {
            out.push(stack.pop().unwrap());
        }
    }
    let mut inv = vec![0; n];
    for (i, &v) in out.iter().enumerate() {
        inv[v - 1] = i + 1;
    }
    inv
}

pub fn random_perm(n: usize, r: &mut TestRng) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=n).collect();
    v.shuffle(r);
    v
}

/// g^{A,m} straight from the definition: inside block i the symbols of A_i
/// cycle, with `mod` taking values in `1..=b`.
pub fn g_naive(a: &KPattern, m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut before = 0;
    for set in a.sets() {
        let b = set.len();
        for j in before * m + 1..=(before + b) * m {
            let r = (j - before * m - 1) % b + 1;
            out.push(set[r - 1]);
        }
        before += b;
    }
    out
}

/// Exhaustive search over all increasing column tuples for a witness.
pub fn witnessing_exhaustive(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    threshold: &Rational,
    order: usize,
) -> bool {
    let symbols = g_naive(a, order);
    let mut blocks = Vec::new();
    for (i, set) in a.sets().iter().enumerate() {
        blocks.extend(std::iter::repeat_n(i, set.len() * order));
    }
    let columns = g.columns();
    subsets(columns, symbols.len()).iter().any(|xs| {
        xs.iter().enumerate().all(|(j, &x)| {
            b.set(blocks[j] + 1).contains(&x) && g.density(x, symbols[j]) >= *threshold
        })
    })
}

/// The witnessing definition checked term by term.
pub fn indices_witness(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    threshold: &Rational,
    order: usize,
    indices: &[usize],
) -> bool {
    let symbols = g_naive(a, order);
    if indices.len() != symbols.len() || indices.windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    let mut j = 0;
    for (i, set) in a.sets().iter().enumerate() {
        for _ in 0..set.len() * order {
            let x = indices[j];
            if !b.set(i + 1).contains(&x) || g.density(x, symbols[j]) < *threshold {
                return false;
            }
            j += 1;
        }
    }
    true
}

/// Approximate-pattern definition from the density table.
pub fn approximate_naive(
    g: &GridDecomposition,
    a: &KPattern,
    b: &KPattern,
    slack: usize,
    threshold: &Rational,
) -> bool {
    let flat: Vec<usize> = b.sets().iter().flatten().copied().collect();
    a.len() == b.len()
        && flat.windows(2).all(|w| w[0] < w[1])
        && flat.len() + slack >= g.columns()
        && a.sets().iter().zip(b.sets()).all(|(allowed, cols)| {
            cols.iter().all(|&x| {
                (1..=g.rows()).all(|y| allowed.contains(&y) || g.density(x, y) < *threshold)
            })
        })
}

/// Outcome of replaying the walk by hand with every refinement checked.
pub struct RefineAudit {
    pub calls: usize,
    pub refined: usize,
    pub violations: Vec<String>,
    pub ended_witnessing: bool,
}

/// Follows the tree from the root, calling `refine` with `m` = largest
/// child weight and checking each result against the refinement contract.
pub fn audit_refinements(
    pi: &permtest::Permutation,
    tree: &permtest::BranchingTree,
    columns: usize,
    threshold: &Rational,
) -> RefineAudit {
    use permtest::decomposition::{grid, refine, Refinement};
    use permtest::pattern::{reductions, BadnessVerdict};
    use num_traits::ToPrimitive;

    let g = grid(pi, columns, tree.k).unwrap();
    let k = tree.k;
    let mut node = &tree.root;
    let mut b = KPattern::basic(columns);
    let mut audit = RefineAudit { calls: 0, refined: 0, violations: Vec::new(), ended_witnessing: false };
    loop {
        let order = match node.verdict {
            BadnessVerdict::Bad(order) => order,
            BadnessVerdict::GoodUpTo(_) => return audit,
        };
        if node.children.is_empty() {
            audit.ended_witnessing = true;
            return audit;
        }
        let m = node.children.iter().map(|c| c.weight.to_usize().unwrap()).max().unwrap();
        let slack = columns - b.total_size();
        let a = &node.pattern;
        let out = match refine(&g, a, &b, threshold, m, order) {
            Ok(out) => out,
            Err(e) => {
                audit.violations.push(format!("refine failed on {a}: {e}"));
                return audit;
            }
        };
        audit.calls += 1;
        match out {
            Refinement::AlreadyWitnessing(indices) => {
                if !indices_witness(&g, a, &b, threshold, order, &indices) {
                    audit.violations.push(format!("bogus witness for {a}"));
                }
                audit.ended_witnessing = true;
                return audit;
            }
            Refinement::Refined { pattern, blocks } => {
                audit.refined += 1;
                if !approximate_naive(&g, &pattern, &blocks, slack + m * k * order, threshold) {
                    audit.violations.push(format!("{pattern} / {blocks} not approximate"));
                }
                if !reductions(a, order).any(|c| c == pattern) {
                    audit.violations.push(format!("{pattern} is not a reduction of {a}"));
                }
                if blocks.sets().iter().any(|s| s.len() < m) {
                    audit.violations.push(format!("a block of {blocks} is smaller than {m}"));
                }
                if b.total_size() - blocks.total_size() + 1 > m * k * order {
                    audit.violations.push(format!("refinement of {b} lost too many columns"));
                }
                match node.child_with_pattern(&pattern) {
                    Some(child) => node = child,
                    None => {
                        audit.violations.push(format!("{pattern} is not a child"));
                        return audit;
                    }
                }
                b = blocks;
            }
        }
    }
}

/// Identity with `swaps` random transpositions of positions at most
/// `reach` apart.
pub fn noisy_identity(n: usize, swaps: usize, reach: usize, r: &mut TestRng) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=n).collect();
    for _ in 0..swaps {
        let i = r.gen_range(0..n);
        let j = (i + r.gen_range(1..=reach)).min(n - 1);
        v.swap(i, j);
    }
    v
}

/// Increasing runs over value bands visited in a random order.
pub fn banded(n: usize, bands: usize, r: &mut TestRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..bands).collect();
    order.shuffle(r);
    let width = n / bands;
    let mut v = Vec::with_capacity(n);
    for &band in &order {
        let lo = band * width;
        let hi = if band == bands - 1 { n } else { lo + width };
        v.extend(lo + 1..=hi);
    }
    v
}

pub fn tree(basis: &str, k: usize) -> BranchingTree {
    let o: PropertyOracle = basis.parse().unwrap();
    build_branching(&o, k, BranchingLimits::default()).unwrap()
}

/// Every k-pattern over `[k]` with between 1 and `len` sets.
pub fn all_patterns(k: usize, len: usize) -> Vec<KPattern> {
    let subsets: Vec<Vec<usize>> = (1u32..1 << k)
        .map(|mask| (1..=k).filter(|&v| mask >> (v - 1) & 1 == 1).collect())
        .collect();
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for seq in &frontier {
            for s in &subsets {
                let mut longer = seq.clone();
                longer.push(s.clone());
                out.push(KPattern::new(k, longer.clone()).unwrap());
                next.push(longer);
            }
        }
        frontier = next;
    }
    out
}

pub fn walk_nodes<'a>(n: &'a BranchingNode, out: &mut Vec<&'a BranchingNode>) {
    out.push(n);
    for c in &n.children {
        walk_nodes(c, out);
    }
}

/// Weights recomputed bottom-up from the verdicts alone.
pub fn weight_naive(n: &BranchingNode, k: usize) -> BigUint {
    match n.verdict {
        BadnessVerdict::GoodUpTo(_) => BigUint::from(1u32),
        BadnessVerdict::Bad(m) if n.children.is_empty() => BigUint::from(k * m),
        BadnessVerdict::Bad(m) => {
            let best = n.children.iter().map(|c| weight_naive(c, k)).max().unwrap();
            best * BigUint::from(k * m)
        }
    }
}

pub fn check_structure(t: &BranchingTree) {
    t.check_invariants().unwrap();
    assert!(t.root.pattern.is_basic());
    let mut nodes = Vec::new();
    walk_nodes(&t.root, &mut nodes);
    for n in &nodes {
        assert_eq!(n.weight, weight_naive(n, t.k));
        let leaf = matches!(n.verdict, BadnessVerdict::GoodUpTo(_)) || n.pattern.is_simple();
        assert_eq!(n.children.is_empty(), leaf, "{}", n.pattern);
        if let BadnessVerdict::Bad(m) = n.verdict {
            if !n.children.is_empty() {
                let expected: Vec<KPattern> = reductions(&n.pattern, m).collect();
                let got: Vec<KPattern> = n.children.iter().map(|c| c.pattern.clone()).collect();
                assert_eq!(got, expected);
            }
        }
        for c in &n.children {
            assert!(c.pattern.score() < n.pattern.score());
            assert!(c.weight <= n.weight);
        }
    }
    assert_eq!(t.root.weight, t.root_weight);
    fn depth(n: &BranchingNode) -> usize {
        1 + n.children.iter().map(depth).max().unwrap_or(0)
    }
    assert_eq!(depth(&t.root), t.depth);
}

pub fn check_walk(pi: &Permutation, t: &BranchingTree, eps: &Rational, threshold: &Rational) -> WalkOutcome {
    let w = walk(pi, t, eps, threshold).unwrap();
    let g = &w.grid;
    assert_eq!(w.path.first(), Some(&t.root.pattern));
    let mut node = &t.root;
    for p in &w.path[1..] {
        node = node.child_with_pattern(p).expect("path follows the tree");
    }
    assert_eq!(&node.pattern, w.outcome.pattern());
    match &w.outcome {
        WalkOutcome::Witnessing { pattern, blocks, order, indices } => {
            assert_eq!(node.verdict, BadnessVerdict::Bad(*order));
            assert!(indices_witness(g, pattern, blocks, threshold, *order, indices));
        }
        WalkOutcome::Approximate { pattern, blocks, slack } => {
            assert!(!node.verdict.is_bad());
            assert!(approximate_naive(g, pattern, blocks, *slack, threshold));
            let floor = (eps * Rational::from_integer(g.columns().into())).floor();
            assert_eq!(Rational::from_integer((*slack).into()), floor);
        }
    }
    w.outcome
}
