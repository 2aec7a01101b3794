//! Property testing of hereditary permutation properties.
//!
//! Permutations are 1-indexed image sequences. Properties are membership
//! oracles, usually pattern-avoidance classes `Av(B)`. The crate builds
//! k-branchings of patterns, grid decompositions that either certify
//! far-ness or approximate a permutation by a good pattern, and a one-sided
//! tester that samples random subpermutations.

pub mod branching;
pub mod decomposition;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod pattern;
pub mod perm;
pub mod property;
pub mod rational;
pub mod tester;

pub use branching::{build_branching, BranchingLimits, BranchingNode, BranchingTree};
pub use decomposition::{grid, walk, GridDecomposition, Refinement, WalkOutcome};
pub use error::{Error, Result};
pub use exec::Execution;
pub use experiment::{generate_far, run_experiment, ExperimentSpec, PermutationSource};
pub use pattern::{BadnessVerdict, KPattern};
pub use perm::{kendall_tau, rectangular, Permutation};
pub use property::{brute_distance, Basis, Metric, PropertyOracle};
pub use rational::Rational;
pub use tester::{rejection_rate, test_once, theoretical_constants, TestReport, TheoreticalConstants, Verdict};
