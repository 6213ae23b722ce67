//! Fragment containment with injective list-item matching.

use serde_json::Value;

use crate::value::AtomicValue;

use super::Step;

fn same_atomic(a: &Value, b: &Value) -> bool {
    match (AtomicValue::from_json(a), AtomicValue::from_json(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Whether `sample` contains `fragment`: dictionary keys map to the same keys,
/// fragment list items map injectively to sample items of the same list, and
/// atomic values are equal.
pub fn contains_subtree(sample: &Value, fragment: &Value) -> bool {
    match (sample, fragment) {
        (Value::Object(s), Value::Object(f)) => f
            .iter()
            .all(|(k, fv)| s.get(k).is_some_and(|sv| contains_subtree(sv, fv))),
        (Value::Array(s), Value::Array(f)) => {
            let adj: Vec<Vec<usize>> = f
                .iter()
                .map(|fi| {
                    (0..s.len())
                        .filter(|&j| contains_subtree(&s[j], fi))
                        .collect()
                })
                .collect();
            max_matching(&adj, s.len()).0 == f.len()
        }
        (Value::Object(_) | Value::Array(_), _) | (_, Value::Object(_) | Value::Array(_)) => false,
        (s, f) => same_atomic(s, f),
    }
}

/// Kuhn's augmenting paths. Returns the matching size and, per right vertex,
/// its left partner.
fn max_matching(adj: &[Vec<usize>], right: usize) -> (usize, Vec<Option<usize>>) {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; right];
        if augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    (size, owner)
}

/// Sample locations of the fragment's leaves under one containment witness.
pub(super) fn witness(sample: &Value, fragment: &Value) -> Option<Vec<Vec<Step>>> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    collect_witness(sample, fragment, &mut prefix, &mut out).then_some(out)
}

fn collect_witness(
    sample: &Value,
    fragment: &Value,
    prefix: &mut Vec<Step>,
    out: &mut Vec<Vec<Step>>,
) -> bool {
    match (sample, fragment) {
        (Value::Object(s), Value::Object(f)) => f.iter().all(|(k, fv)| {
            let Some(sv) = s.get(k) else { return false };
            prefix.push(Step::Key(k.clone()));
            let ok = collect_witness(sv, fv, prefix, out);
            prefix.pop();
            ok
        }),
        (Value::Array(s), Value::Array(f)) => {
            let adj: Vec<Vec<usize>> = f
                .iter()
                .map(|fi| {
                    (0..s.len())
                        .filter(|&j| contains_subtree(&s[j], fi))
                        .collect()
                })
                .collect();
            let (size, owner) = max_matching(&adj, s.len());
            if size < f.len() {
                return false;
            }
            for (j, partner) in owner.iter().enumerate() {
                if let Some(u) = *partner {
                    prefix.push(Step::Index(j));
                    collect_witness(&s[j], &f[u], prefix, out);
                    prefix.pop();
                }
            }
            true
        }
        (Value::Object(_) | Value::Array(_), _) | (_, Value::Object(_) | Value::Array(_)) => false,
        (s, f) => {
            let ok = same_atomic(s, f);
            if ok {
                out.push(prefix.clone());
            }
            ok
        }
    }
}

/// Number of atomic values in a document.
pub fn atomic_leaf_count(v: &Value) -> usize {
    match v {
        Value::Object(m) => m.values().map(atomic_leaf_count).sum(),
        Value::Array(a) => a.iter().map(atomic_leaf_count).sum(),
        Value::Null => 0,
        _ => 1,
    }
}

/// Largest number of fragment leaves that a partial, injective embedding of
/// `fragment` into `doc` can match.
pub fn matched_leaves(doc: &Value, fragment: &Value) -> usize {
    match (doc, fragment) {
        (Value::Object(d), Value::Object(f)) => f
            .iter()
            .filter_map(|(k, fv)| d.get(k).map(|dv| matched_leaves(dv, fv)))
            .sum(),
        (Value::Array(d), Value::Array(f)) => {
            let w: Vec<Vec<usize>> = d
                .iter()
                .map(|di| f.iter().map(|fi| matched_leaves(di, fi)).collect())
                .collect();
            best_assignment(&w, f.len())
        }
        (Value::Object(_) | Value::Array(_), _) | (_, Value::Object(_) | Value::Array(_)) => 0,
        (d, f) => usize::from(same_atomic(d, f)),
    }
}

/// Maximum-weight injective assignment of fragment items (columns) to document
/// items (rows), by dynamic programming over subsets of fragment items.
fn best_assignment(w: &[Vec<usize>], cols: usize) -> usize {
    if cols == 0 || w.is_empty() {
        return 0;
    }
    if cols > 16 {
        // Greedy fallback for unusually wide fragments.
        let mut used = vec![false; cols];
        let mut total = 0;
        for row in w {
            if let Some((c, &best)) = row
                .iter()
                .enumerate()
                .filter(|(c, _)| !used[*c])
                .max_by_key(|(_, &x)| x)
            {
                if best > 0 {
                    used[c] = true;
                    total += best;
                }
            }
        }
        return total;
    }
    let full = 1usize << cols;
    let mut dp: Vec<Option<usize>> = vec![None; full];
    dp[0] = Some(0);
    for row in w {
        let prev = dp.clone();
        for (mask, value) in prev.iter().enumerate() {
            let Some(value) = *value else { continue };
            for (c, &gain) in row.iter().enumerate() {
                if mask & (1 << c) == 0 && gain > 0 {
                    let next = mask | (1 << c);
                    if dp[next].is_none_or(|d| d < value + gain) {
                        dp[next] = Some(value + gain);
                    }
                }
            }
        }
    }
    dp.into_iter().flatten().max().unwrap_or(0)
}

/// Leaves of the pruned explanation document not accounted for by the
/// planted fragment.
pub fn excess_leaves(explanation: &Value, inserted: &Value) -> usize {
    atomic_leaf_count(explanation) - matched_leaves(explanation, inserted)
}
