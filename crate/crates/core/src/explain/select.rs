//! Subset-selection procedures over an abstract evaluation function.
//!
//! `v` maps a candidate subset to the confidence of the explained class; the
//! procedures only ever compare its value against `tau`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sample::{NodeId, NodeSet};

/// Starts from the empty set and repeatedly adds the candidate with the largest
/// `v(S + c)` until `v(S) >= tau`. Ties go to the lowest id.
pub fn greedy_add<F>(candidates: &[NodeId], v: &mut F, tau: f64) -> Result<NodeSet>
where
    F: FnMut(&NodeSet) -> f64,
{
    let mut s = NodeSet::new();
    if v(&s) >= tau {
        return Ok(s);
    }
    let mut remaining: Vec<NodeId> = candidates.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in remaining.iter().enumerate() {
            s.insert(c);
            let value = v(&s);
            s.remove(&c);
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((i, value));
            }
        }
        let (i, value) = best.expect("non-empty candidates");
        s.insert(remaining.remove(i));
        if value >= tau {
            return Ok(s);
        }
    }
    Err(Error::Unreachable)
}

/// Adds nodes in the given order until `v(S) >= tau`, evaluating once per
/// added node. An empty order yields the empty set without evaluation.
pub fn heuristic_add<F>(order: &[NodeId], v: &mut F, tau: f64) -> Result<NodeSet>
where
    F: FnMut(&NodeSet) -> f64,
{
    let mut s = NodeSet::new();
    if order.is_empty() {
        return Ok(s);
    }
    for &c in order {
        s.insert(c);
        if v(&s) >= tau {
            return Ok(s);
        }
    }
    Err(Error::Unreachable)
}

/// Shuffled single-node removal passes, repeated until a full pass removes
/// nothing. The result is 1-minimal.
pub fn random_removal<F, R>(s: &NodeSet, v: &mut F, tau: f64, rng: &mut R) -> NodeSet
where
    F: FnMut(&NodeSet) -> f64,
    R: Rng + ?Sized,
{
    let mut s = s.clone();
    loop {
        let mut order: Vec<NodeId> = s.iter().copied().collect();
        order.shuffle(rng);
        let mut removed = false;
        for x in order {
            s.remove(&x);
            if v(&s) >= tau {
                removed = true;
            } else {
                s.insert(x);
            }
        }
        if !removed {
            return s;
        }
    }
}

/// Oscillating refinement: add `l` elements greedily, then drop the least
/// damaging elements while `v` stays at or above `tau`. A strictly smaller
/// result is kept and `l` resets to 1; otherwise the step is undone and `l`
/// grows, until it exceeds `min(5, 2|S|)`.
pub fn fine_tune<F>(s: &NodeSet, candidates: &[NodeId], v: &mut F, tau: f64) -> NodeSet
where
    F: FnMut(&NodeSet) -> f64,
{
    let mut pool: Vec<NodeId> = candidates.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let mut s = s.clone();
    let mut l = 1;
    while l <= 5.min(2 * s.len()) {
        let mut t = s.clone();
        for _ in 0..l {
            let mut best: Option<(NodeId, f64)> = None;
            for &c in &pool {
                if !t.insert(c) {
                    continue;
                }
                let value = v(&t);
                t.remove(&c);
                if best.is_none_or(|(_, b)| value > b) {
                    best = Some((c, value));
                }
            }
            match best {
                Some((c, _)) => {
                    t.insert(c);
                }
                None => break,
            }
        }
        loop {
            // Ties prefer dropping a node that predates this swing.
            let mut best: Option<(NodeId, f64, bool)> = None;
            for &x in &t {
                let mut without = t.clone();
                without.remove(&x);
                let value = v(&without);
                let old = s.contains(&x);
                if best.is_none_or(|(_, b, b_old)| value > b || (value == b && old && !b_old)) {
                    best = Some((x, value, old));
                }
            }
            match best {
                Some((x, value, _)) if value >= tau => {
                    t.remove(&x);
                }
                _ => break,
            }
        }
        if t.len() < s.len() {
            s = t;
            l = 1;
        } else {
            l += 1;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    fn additive(weights: &[(NodeId, f64)]) -> impl FnMut(&NodeSet) -> f64 {
        let w: BTreeMap<NodeId, f64> = weights.iter().copied().collect();
        move |s: &NodeSet| s.iter().map(|i| w.get(i).copied().unwrap_or(0.0)).sum()
    }

    fn dictator(a: NodeId) -> impl FnMut(&NodeSet) -> f64 {
        move |s: &NodeSet| if s.contains(&a) { 1.0 } else { 0.0 }
    }

    #[test]
    fn greedy_on_a_modular_function() {
        let mut evals = Vec::new();
        let mut inner = additive(&[(1, 0.6), (2, 0.3), (3, 0.2)]);
        let mut v = |s: &NodeSet| {
            evals.push(s.clone());
            inner(s)
        };
        let s = greedy_add(&[1, 2, 3], &mut v, 0.8).unwrap();
        assert_eq!(s, set(&[1, 2]));
        assert_eq!(evals[0], NodeSet::new());
        assert_eq!(evals[1..4], [set(&[1]), set(&[2]), set(&[3])]);
    }

    #[test]
    fn greedy_returns_empty_when_already_consistent() {
        let s = greedy_add(&[1, 2], &mut |_: &NodeSet| 0.5, 0.5).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn greedy_ties_go_to_the_lowest_id() {
        let s = greedy_add(
            &[4, 2, 7],
            &mut additive(&[(2, 1.0), (4, 1.0), (7, 1.0)]),
            1.0,
        )
        .unwrap();
        assert_eq!(s, set(&[2]));
    }

    #[test]
    fn greedy_signals_a_broken_evaluation() {
        assert!(matches!(
            greedy_add(&[1, 2], &mut |_: &NodeSet| 0.0, 1.0),
            Err(Error::Unreachable)
        ));
    }

    #[test]
    fn heuristic_follows_the_order() {
        let mut count = 0;
        let mut inner = additive(&[(1, 0.5), (2, 0.5)]);
        let mut v = |s: &NodeSet| {
            count += 1;
            inner(s)
        };
        assert_eq!(
            heuristic_add(&[1, 2, 3], &mut v, 0.9).unwrap(),
            set(&[1, 2])
        );
        assert_eq!(count, 2);
        assert_eq!(
            heuristic_add(&[5, 1, 2], &mut dictator(5), 0.9).unwrap(),
            set(&[5])
        );
    }

    #[test]
    fn heuristic_with_random_order_and_dictator() {
        let n = 9;
        let ids: Vec<NodeId> = (1..=n).collect();
        let trials = 2000;
        let mut total = 0;
        for seed in 0..trials {
            let mut order = ids.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            total += heuristic_add(&order, &mut dictator(4), 0.5).unwrap().len();
        }
        let mean = total as f64 / trials as f64;
        let expected = (n as f64 + 1.0) / 2.0;
        assert!((mean - expected).abs() <= 0.2 * expected, "{mean}");
    }

    #[test]
    fn removal_reaches_the_dictator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            random_removal(&set(&[1, 2, 3]), &mut dictator(1), 0.5, &mut rng),
            set(&[1])
        );
        let minimal = set(&[1, 2]);
        let mut v = additive(&[(1, 0.5), (2, 0.5)]);
        assert_eq!(random_removal(&minimal, &mut v, 1.0, &mut rng), minimal);
    }

    #[test]
    fn removal_output_is_one_minimal() {
        // Majority of three among five nodes.
        let mut v = |s: &NodeSet| {
            if s.iter().filter(|&&i| i <= 5).count() >= 3 {
                1.0
            } else {
                0.0
            }
        };
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_removal(&set(&[1, 2, 3, 4, 5, 6]), &mut v, 1.0, &mut rng);
            assert!(v(&r) >= 1.0);
            for &x in &r {
                let mut smaller = r.clone();
                smaller.remove(&x);
                assert!(v(&smaller) < 1.0);
            }
        }
    }

    #[test]
    fn fine_tune_swaps_a_pair_for_the_dictator() {
        let mut v = |s: &NodeSet| {
            if s.contains(&1) || (s.contains(&2) && s.contains(&3)) {
                1.0
            } else {
                0.0
            }
        };
        assert_eq!(
            fine_tune(&set(&[2, 3]), &[1, 2, 3, 4], &mut v, 1.0),
            set(&[1])
        );
    }

    #[test]
    fn fine_tune_keeps_a_global_minimum() {
        let mut v = dictator(3);
        assert_eq!(fine_tune(&set(&[3]), &[1, 2, 3, 4], &mut v, 0.5), set(&[3]));
        assert!(fine_tune(&NodeSet::new(), &[1, 2], &mut |_: &NodeSet| 1.0, 0.5).is_empty());
    }
}
