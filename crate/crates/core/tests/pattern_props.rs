mod common;

use std::collections::BTreeSet;

use common::*;
use num_bigint::BigUint;
use permtest::pattern::{
    count_expansions, decide_pattern, enumerate_expansions, find_member_expansion, is_expansion, reduction_count_bound,
    reductions, BadnessVerdict, KPattern,
};
use permtest::perm::Permutation;
use permtest::property::PropertyOracle;
use proptest::prelude::*;

fn expansion_naive(v: &[usize], a: &KPattern, m: usize) -> bool {
    let g = g_naive(a, m);
    v.len() == g.len()
        && (0..g.len()).all(|j| (0..g.len()).all(|jj| g[j] >= g[jj] || v[j] < v[jj]))
}

fn member_naive(v: &[usize], basis: &[&[usize]]) -> bool {
    basis.iter().all(|t| !contains_naive(v, t))
}

const BASES: &[&[&[usize]]] = &[
    &[&[2, 1]],
    &[&[2, 3, 1]],
    &[&[3, 2, 1]],
    &[&[1, 3, 2], &[2, 1, 3]],
];

#[test]
fn g_function_worked_example() {
    let a = pat(4, &[&[1, 2, 3], &[1, 4], &[3]]);
    let expected = [1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 4, 1, 4, 1, 4, 1, 4, 3, 3, 3, 3];
    assert_eq!(a.g_sequence(4), expected);
    assert_eq!(g_naive(&a, 4), expected);
    for (j, &v) in expected.iter().enumerate() {
        assert_eq!(a.g_value(4, j + 1).unwrap(), v);
    }
    assert!(a.g_value(4, 25).is_err());
    assert!(a.g_value(4, 0).is_err());
}

#[test]
fn counts_match_enumeration() {
    for k in 1..=3 {
        for a in all_patterns(k, 2) {
            for m in 1..=2 {
                let listed: Vec<Permutation> = enumerate_expansions(&a, m, 1_000_000).unwrap().collect();
                assert_eq!(BigUint::from(listed.len()), count_expansions(&a, m), "{a} m={m}");
                let distinct: BTreeSet<Vec<usize>> = listed.iter().map(|p| p.images().to_vec()).collect();
                assert_eq!(distinct.len(), listed.len());
                assert!(listed.iter().all(|p| expansion_naive(p.images(), &a, m)));
            }
        }
    }
}

#[test]
fn enumeration_equals_filter() {
    for k in 1..=3 {
        for a in all_patterns(k, 3) {
            for m in 1..=3 {
                let order = m * a.total_size();
                if order > 6 {
                    continue;
                }
                let listed: BTreeSet<Vec<usize>> = enumerate_expansions(&a, m, 1_000_000)
                    .unwrap()
                    .map(|p| p.images().to_vec())
                    .collect();
                let filtered: BTreeSet<Vec<usize>> =
                    all_perms(order).into_iter().filter(|v| expansion_naive(v, &a, m)).collect();
                assert_eq!(listed, filtered, "{a} m={m}");
                for v in all_perms(order) {
                    assert_eq!(is_expansion(&perm(&v), &a, m), filtered.contains(&v));
                }
            }
        }
    }
}

#[test]
fn enumeration_cap() {
    let a = pat(2, &[&[1, 2]]);
    assert!(matches!(
        enumerate_expansions(&a, 4, 100),
        Err(permtest::Error::CapExceeded { cap: 100, .. })
    ));
}

#[test]
fn member_search_is_monotone_and_sound() {
    for basis in BASES {
        let o = PropertyOracle::avoiding_images(basis).unwrap();
        for k in 1..=3 {
            for a in all_patterns(k, 2) {
                let mut previous = true;
                for m in 1..=3 {
                    if m * a.total_size() > 9 {
                        break;
                    }
                    let found = find_member_expansion(&a, m, &o, 10_000_000).unwrap();
                    if let Some(p) = &found {
                        assert!(expansion_naive(p.images(), &a, m));
                        assert!(member_naive(p.images(), basis));
                        assert!(previous, "{a}: member at m={m} but not at m-1");
                    }
                    previous = found.is_some();
                }
            }
        }
    }
}

#[test]
fn budget_exhaustion_is_an_error() {
    let o = PropertyOracle::avoiding_images(&[&[2, 1]]).unwrap();
    let a = pat(3, &[&[1, 2, 3]]);
    assert!(matches!(
        find_member_expansion(&a, 4, &o, 5),
        Err(permtest::Error::BudgetExhausted(5))
    ));
}

#[test]
fn verdicts_rechecked_by_brute_force() {
    for basis in BASES {
        let o = PropertyOracle::avoiding_images(basis).unwrap();
        for k in 1..=3 {
            for a in all_patterns(k, 2) {
                let verdict = decide_pattern(&a, &o, 3, 10_000_000).unwrap();
                let has_member = |m: usize| {
                    all_perms(m * a.total_size())
                        .into_iter()
                        .any(|v| expansion_naive(&v, &a, m) && member_naive(&v, basis))
                };
                match verdict {
                    BadnessVerdict::Bad(m) => {
                        if m * a.total_size() <= 8 {
                            assert!(!has_member(m), "{a} Bad({m})");
                        }
                        if m > 1 && (m - 1) * a.total_size() <= 8 {
                            assert!(has_member(m - 1), "{a} Bad({m})");
                        }
                    }
                    BadnessVerdict::GoodUpTo(mm) => {
                        assert_eq!(mm, 3);
                        for m in 1..=mm {
                            if m * a.total_size() <= 8 {
                                assert!(has_member(m), "{a} GoodUpTo");
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Children by direct construction: replace one non-singleton set by a
/// sequence of 1..=|A_i|·order proper non-empty subsets.
fn reductions_naive(a: &KPattern, order: usize) -> BTreeSet<KPattern> {
    let mut out = BTreeSet::new();
    for (i, set) in a.sets().iter().enumerate() {
        if set.len() < 2 {
            continue;
        }
        let proper: Vec<Vec<usize>> = (1u32..(1 << set.len()) - 1)
            .map(|mask| (0..set.len()).filter(|&b| mask >> b & 1 == 1).map(|b| set[b]).collect())
            .collect();
        let mut seqs: Vec<Vec<Vec<usize>>> = vec![vec![]];
        for _ in 0..set.len() * order {
            seqs = seqs
                .iter()
                .flat_map(|s| proper.iter().map(move |p| [s.clone(), vec![p.clone()]].concat()))
                .collect();
            for s in &seqs {
                let mut sets = a.sets()[..i].to_vec();
                sets.extend(s.iter().cloned());
                sets.extend_from_slice(&a.sets()[i + 1..]);
                out.insert(KPattern::new(a.k(), sets).unwrap());
            }
        }
    }
    out
}

#[test]
fn reductions_match_direct_construction() {
    for k in 1..=3 {
        for a in all_patterns(k, 2) {
            for order in 1..=2 {
                if BigUint::from(100_000u32) < reduction_count_bound(&a, order) {
                    continue;
                }
                let kids: Vec<KPattern> = reductions(&a, order).collect();
                let set: BTreeSet<KPattern> = kids.iter().cloned().collect();
                assert_eq!(set.len(), kids.len(), "duplicate child of {a}");
                assert_eq!(set, reductions_naive(&a, order), "{a} order {order}");
                for child in &kids {
                    assert!(child.score() < a.score(), "{child} vs {a}");
                }
                if a.is_simple() {
                    assert!(kids.is_empty());
                }
            }
        }
    }
}

#[test]
fn reduction_worked_example() {
    let a = pat(3, &[&[1], &[2, 3], &[1, 3]]);
    let target = pat(3, &[&[1], &[2], &[2], &[3], &[1, 3]]);
    assert!(reductions(&a, 2).any(|c| c == target));
    assert_eq!(reductions(&pat(2, &[&[1, 2]]), 2).count(), 30);
}

#[test]
fn scores() {
    assert_eq!(pat(2, &[&[1, 2]]).score(), vec![1, 0]);
    assert_eq!(pat(3, &[&[1], &[2], &[2], &[3], &[1, 3]]).score(), vec![0, 1, 4]);
    assert_eq!(KPattern::basic(5).score(), vec![1, 0, 0, 0, 0]);
}

fn arb_pattern() -> impl Strategy<Value = KPattern> {
    (1usize..=5).prop_flat_map(|k| {
        proptest::collection::vec(1u32..(1 << k), 1..=5).prop_map(move |masks| {
            let sets = masks
                .iter()
                .map(|m| (1..=k).filter(|&v| m >> (v - 1) & 1 == 1).collect())
                .collect();
            KPattern::new(k, sets).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn g_value_matches_definition(a in arb_pattern(), m in 1usize..=4) {
        let naive = g_naive(&a, m);
        prop_assert_eq!(a.g_sequence(m), naive.clone());
        for (j, v) in naive.iter().enumerate() {
            prop_assert_eq!(a.g_value(m, j + 1).unwrap(), *v);
        }
    }

    #[test]
    fn pattern_json_round_trip(a in arb_pattern()) {
        let text = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<KPattern>(&text).unwrap(), a);
    }

    #[test]
    fn enumerated_expansions_pass_the_check(a in arb_pattern(), m in 1usize..=2) {
        prop_assume!(count_expansions(&a, m) <= BigUint::from(2000u32));
        for p in enumerate_expansions(&a, m, 2000).unwrap() {
            prop_assert!(is_expansion(&p, &a, m));
            prop_assert!(expansion_naive(p.images(), &a, m));
        }
    }
}
