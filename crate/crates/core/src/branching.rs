//! The k-branching of a hereditary property: a finite tree of patterns
//! rooted at the basic k-pattern, with verdicts and integer weights.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::pattern::{decide_pattern, reduction_count_bound, reductions, BadnessVerdict, KPattern};
use crate::property::PropertyOracle;
use crate::rational::{ceil_nonneg, is_unit_interval, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingNode {
    pub pattern: KPattern,
    pub verdict: BadnessVerdict,
    #[serde(with = "decimal")]
    pub weight: BigUint,
    pub children: Vec<BranchingNode>,
}

impl BranchingNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Largest weight among the children; zero for a leaf.
    pub fn max_child_weight(&self) -> BigUint {
        self.children
            .iter()
            .map(|c| c.weight.clone())
            .max()
            .unwrap_or_else(BigUint::zero)
    }

    pub fn child_with_pattern(&self, pattern: &KPattern) -> Option<&BranchingNode> {
        self.children.iter().find(|c| &c.pattern == pattern)
    }

    fn node_count(&self) -> usize {
        1 + self.children.iter().map(BranchingNode::node_count).sum::<usize>()
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().map(BranchingNode::depth).max().unwrap_or(0)
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a BranchingNode>) {
        out.push(self);
        for c in &self.children {
            c.visit(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingTree {
    pub k: usize,
    /// Largest expansion order tried before a pattern is treated as good.
    pub m_max: usize,
    /// Vertices (not edges) on the longest root-to-leaf path.
    pub depth: usize,
    #[serde(with = "decimal")]
    pub root_weight: BigUint,
    pub property: String,
    pub root: BranchingNode,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchingLimits {
    pub m_max: usize,
    /// Search nodes allowed per `find_member_expansion` call.
    pub node_budget: u64,
    /// Maximum number of tree nodes.
    pub node_cap: usize,
}

impl Default for BranchingLimits {
    fn default() -> Self {
        BranchingLimits {
            m_max: 4,
            node_budget: 1_000_000,
            node_cap: 100_000,
        }
    }
}

pub fn build_branching(
    oracle: &PropertyOracle,
    k: usize,
    limits: BranchingLimits,
) -> Result<BranchingTree> {
    build_branching_with(oracle, k, limits, Execution::default())
}

pub fn build_branching_with(
    oracle: &PropertyOracle,
    k: usize,
    limits: BranchingLimits,
    exec: Execution,
) -> Result<BranchingTree> {
    if k == 0 {
        return Err(Error::PreconditionViolated("k must be positive".into()));
    }
    let builder = Builder {
        oracle,
        limits,
        exec,
        nodes: AtomicUsize::new(0),
    };
    let root = builder.build(KPattern::basic(k))?;
    Ok(BranchingTree {
        k,
        m_max: limits.m_max,
        depth: root.depth(),
        root_weight: root.weight.clone(),
        property: oracle.name().to_string(),
        root,
    })
}

struct Builder<'a> {
    oracle: &'a PropertyOracle,
    limits: BranchingLimits,
    exec: Execution,
    nodes: AtomicUsize,
}

impl Builder<'_> {
    fn reserve(&self, count: usize) -> Result<()> {
        let before = self.nodes.fetch_add(count, Ordering::Relaxed);
        if before + count > self.limits.node_cap {
            return Err(Error::NodeCapExceeded(self.limits.node_cap));
        }
        Ok(())
    }

    fn build(&self, pattern: KPattern) -> Result<BranchingNode> {
        self.reserve(1)?;
        let verdict = decide_pattern(
            &pattern,
            self.oracle,
            self.limits.m_max,
            self.limits.node_budget,
        )?;
        let k = BigUint::from(pattern.k());
        let order = match verdict {
            BadnessVerdict::GoodUpTo(_) => {
                return Ok(BranchingNode {
                    pattern,
                    verdict,
                    weight: BigUint::one(),
                    children: Vec::new(),
                })
            }
            BadnessVerdict::Bad(order) => order,
        };
        if pattern.is_simple() {
            return Ok(BranchingNode {
                pattern,
                verdict,
                weight: k * BigUint::from(order),
                children: Vec::new(),
            });
        }
        let bound = reduction_count_bound(&pattern, order);
        if bound > BigUint::from(self.limits.node_cap) {
            return Err(Error::NodeCapExceeded(self.limits.node_cap));
        }
        let parent_score = pattern.score();
        let kids: Vec<KPattern> = reductions(&pattern, order).collect();
        for kid in &kids {
            if kid.score() >= parent_score {
                return Err(Error::InternalContradiction(format!(
                    "reduction {kid} of {pattern} does not decrease the score"
                )));
            }
        }
        let children = map_slice(self.exec, &kids, |kid| self.build(kid.clone()))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let max_child = children.iter().map(|c| &c.weight).max().cloned().unwrap_or_default();
        Ok(BranchingNode {
            pattern,
            verdict,
            weight: BigUint::from(order) * k * max_child,
            children,
        })
    }
}

impl BranchingTree {
    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn nodes(&self) -> Vec<&BranchingNode> {
        let mut out = Vec::new();
        self.root.visit(&mut out);
        out
    }

    /// Re-checks the structural invariants of a built or loaded tree.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InternalContradiction(msg));
        if !self.root.pattern.is_basic() || self.root.pattern.k() != self.k {
            return fail("root is not the basic k-pattern".into());
        }
        if self.depth != self.root.depth() || self.root_weight != self.root.weight {
            return fail("recorded depth or root weight is stale".into());
        }
        let k = BigUint::from(self.k);
        for node in self.nodes() {
            let leaf_expected =
                !node.verdict.is_bad() || node.pattern.is_simple();
            if leaf_expected != node.is_leaf() {
                return fail(format!("leaf status of {} is wrong", node.pattern));
            }
            let expected_weight = match node.verdict {
                BadnessVerdict::GoodUpTo(_) => BigUint::one(),
                BadnessVerdict::Bad(m) if node.is_leaf() => &k * BigUint::from(m),
                BadnessVerdict::Bad(m) => BigUint::from(m) * &k * node.max_child_weight(),
            };
            if node.weight != expected_weight {
                return fail(format!("weight of {} is wrong", node.pattern));
            }
            for child in &node.children {
                if child.pattern.score() >= node.pattern.score() {
                    return fail(format!("score does not decrease at {}", child.pattern));
                }
                if child.weight > node.weight {
                    return fail(format!("child {} outweighs its parent", child.pattern));
                }
            }
            if let BadnessVerdict::Bad(m) = node.verdict {
                if !node.is_leaf() {
                    let expected: Vec<KPattern> = reductions(&node.pattern, m).collect();
                    let actual: Vec<KPattern> =
                        node.children.iter().map(|c| c.pattern.clone()).collect();
                    if expected != actual {
                        return fail(format!("children of {} are not its reductions", node.pattern));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkParameters {
    pub depth: usize,
    pub root_weight: BigUint,
    /// Column count `⌈d·w₀/ε⌉`.
    pub columns: BigUint,
}

pub fn walk_parameters(tree: &BranchingTree, epsilon: &Rational) -> Result<WalkParameters> {
    if !is_unit_interval(epsilon) {
        return Err(Error::PreconditionViolated("epsilon must lie in (0, 1]".into()));
    }
    let dw = Rational::from_integer(BigInt::from(tree.depth) * BigInt::from(tree.root_weight.clone()));
    let columns = ceil_nonneg(&(dw / epsilon))
        .to_biguint()
        .expect("non-negative");
    Ok(WalkParameters {
        depth: tree.depth,
        root_weight: tree.root_weight.clone(),
        columns,
    })
}

/// Big integers as decimal strings in the tree dump.
mod decimal {
    use num_bigint::BigUint;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(de::Error::custom)
    }
}
