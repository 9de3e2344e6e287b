//! Variable interchangeability by colour refinement.
//!
//! Constraints are compared by a signature (kind, and for tables polarity,
//! arity and the sorted tuple set). Each variable plays a role in a
//! constraint: all positions of alldifferent/disequality are equivalent, and
//! table positions are grouped by the column transpositions that map the
//! tuple set onto itself.

use std::collections::{BTreeMap, HashSet};

use crate::csp::{ConstraintKind, CspInstance, Polarity};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Signature {
    AllDiff(usize),
    Diseq,
    Table(Polarity, usize, Vec<Vec<i64>>),
}

/// Interns keys to dense ids in key order, so ids are deterministic.
fn intern<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut ids: BTreeMap<&K, usize> = keys.iter().map(|k| (k, 0)).collect();
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    keys.iter().map(|k| ids[k]).collect()
}

/// Role of each table column: the smallest column in its orbit.
fn table_roles(tuples: &[Vec<i64>], arity: usize) -> Vec<usize> {
    let set: HashSet<&[i64]> = tuples.iter().map(Vec::as_slice).collect();
    let mut role: Vec<usize> = (0..arity).collect();
    for i in 0..arity {
        for j in i + 1..arity {
            if role[j] != j {
                continue;
            }
            let swaps = tuples.iter().all(|t| {
                let mut s = t.clone();
                s.swap(i, j);
                set.contains(s.as_slice())
            });
            if swaps {
                role[j] = role[i];
            }
        }
    }
    role
}

/// Sorted domain plus sorted (constraint signature, role) occurrences.
type InitialKey = (Vec<i64>, Vec<(usize, usize)>);

/// Partition of the variables into colour classes, as one colour id per variable.
pub fn refine_colours(instance: &CspInstance) -> Vec<usize> {
    let n = instance.num_variables();
    let cons = instance.constraints();

    let sigs: Vec<Signature> = cons
        .iter()
        .map(|c| match &c.kind {
            ConstraintKind::AllDifferent => Signature::AllDiff(c.arity()),
            ConstraintKind::Disequality => Signature::Diseq,
            ConstraintKind::Table(t) => {
                let mut tuples = t.tuples.clone();
                tuples.sort();
                tuples.dedup();
                Signature::Table(t.polarity, c.arity(), tuples)
            }
        })
        .collect();
    let sig_ids = intern(&sigs);
    let roles: Vec<Vec<usize>> = cons
        .iter()
        .map(|c| match &c.kind {
            ConstraintKind::Table(t) => table_roles(&t.tuples, c.arity()),
            _ => vec![0; c.arity()],
        })
        .collect();

    // (constraint, position) memberships per variable.
    let mut occurs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (ci, c) in cons.iter().enumerate() {
        for (pos, &v) in c.scope.iter().enumerate() {
            occurs[v].push((ci, pos));
        }
    }

    let initial: Vec<InitialKey> = (0..n)
        .map(|v| {
            let mut dom = instance.variables()[v].domain.clone();
            dom.sort_unstable();
            let mut kinds: Vec<(usize, usize)> = occurs[v]
                .iter()
                .map(|&(ci, pos)| (sig_ids[ci], roles[ci][pos]))
                .collect();
            kinds.sort_unstable();
            (dom, kinds)
        })
        .collect();
    let mut colour = intern(&initial);
    let mut classes = colour.iter().collect::<HashSet<_>>().len();

    loop {
        type Neighbourhood = Vec<(usize, usize, Vec<(usize, usize)>)>;
        let keys: Vec<(usize, Neighbourhood)> = (0..n)
            .map(|v| {
                let mut around: Neighbourhood = occurs[v]
                    .iter()
                    .map(|&(ci, pos)| {
                        let c = &cons[ci];
                        let mut others: Vec<(usize, usize)> = c
                            .scope
                            .iter()
                            .enumerate()
                            .filter(|&(p, _)| p != pos)
                            .map(|(p, &u)| (colour[u], roles[ci][p]))
                            .collect();
                        others.sort_unstable();
                        (sig_ids[ci], roles[ci][pos], others)
                    })
                    .collect();
                around.sort();
                (colour[v], around)
            })
            .collect();
        let next = intern(&keys);
        let count = next.iter().collect::<HashSet<_>>().len();
        colour = next;
        if count == classes {
            return colour;
        }
        classes = count;
    }
}

/// Fraction of variable pairs that fall in the same colour class.
pub fn symmetric_variable_proportion(instance: &CspInstance) -> f64 {
    let n = instance.num_variables();
    if n < 2 {
        return 0.0;
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for c in refine_colours(instance) {
        *sizes.entry(c).or_default() += 1;
    }
    let same: usize = sizes.values().map(|&s| s * (s - 1) / 2).sum();
    same as f64 / (n * (n - 1) / 2) as f64
}
