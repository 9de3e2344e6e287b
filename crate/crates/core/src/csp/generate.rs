//! Seeded synthetic instance families.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Constraint, CspInstance, Polarity, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// n+1 pigeons, n holes, one alldifferent. Always unsatisfiable.
    PigeonHole,
    /// n×n quasigroup completion with row and column alldifferents. Always satisfiable.
    LatinSquare,
    /// Planted colouring: disequality edges plus alldifferent over planted cliques.
    GraphColouring,
    /// Sparse random disequalities over loose domains plus a few small alldifferents.
    RandomBinaryDiseq,
    /// Random binary tables with one alldifferent.
    RandomTable,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::PigeonHole,
        Family::LatinSquare,
        Family::GraphColouring,
        Family::RandomBinaryDiseq,
        Family::RandomTable,
    ];

    /// Inclusive bounds on `size`.
    pub fn size_bounds(self) -> (usize, usize) {
        match self {
            Family::PigeonHole => (1, 12),
            Family::LatinSquare => (1, 10),
            Family::GraphColouring => (2, 60),
            Family::RandomBinaryDiseq => (2, 200),
            Family::RandomTable => (2, 40),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::PigeonHole => "pigeon-hole",
            Family::LatinSquare => "latin-square",
            Family::GraphColouring => "graph-colouring",
            Family::RandomBinaryDiseq => "random-binary-diseq",
            Family::RandomTable => "random-table",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown family `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("size {size} out of range for {family} (allowed {min}..={max})")]
pub struct GenerateError {
    pub family: Family,
    pub size: usize,
    pub min: usize,
    pub max: usize,
}

pub fn generate_instance(family: Family, size: usize, seed: u64) -> Result<CspInstance, GenerateError> {
    let (min, max) = family.size_bounds();
    if size < min || size > max {
        return Err(GenerateError { family, size, min, max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = format!("{family}-{size}-s{seed}");
    let (vars, cons) = match family {
        Family::PigeonHole => pigeon_hole(size),
        Family::LatinSquare => latin_square(size, &mut rng),
        Family::GraphColouring => graph_colouring(size, &mut rng),
        Family::RandomBinaryDiseq => random_binary_diseq(size, &mut rng),
        Family::RandomTable => random_table(size, &mut rng),
    };
    Ok(CspInstance::new(name, vars, cons).expect("generators build valid models"))
}

fn pigeon_hole(n: usize) -> (Vec<Variable>, Vec<Constraint>) {
    let domain: Vec<i64> = (1..=n as i64).collect();
    let vars = (1..=n + 1)
        .map(|i| Variable::new(format!("p{i}"), domain.clone()))
        .collect();
    (vars, vec![Constraint::all_different((0..=n).collect())])
}

fn latin_square(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Variable>, Vec<Constraint>) {
    // Hidden square from a cyclic one with shuffled rows, columns and symbols.
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut syms: Vec<i64> = (1..=n as i64).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    syms.shuffle(rng);
    let full: Vec<i64> = (1..=n as i64).collect();
    let mut vars = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let name = format!("l{r}_{c}");
            if rng.gen_bool(0.3) {
                vars.push(Variable::new(name, vec![syms[(rows[r] + cols[c]) % n]]));
            } else {
                vars.push(Variable::new(name, full.clone()));
            }
        }
    }
    let mut cons = Vec::with_capacity(2 * n);
    if n >= 2 {
        for r in 0..n {
            cons.push(Constraint::all_different((0..n).map(|c| r * n + c).collect()));
        }
        for c in 0..n {
            cons.push(Constraint::all_different((0..n).map(|r| r * n + c).collect()));
        }
    }
    (vars, cons)
}

fn graph_colouring(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Variable>, Vec<Constraint>) {
    let k = 3 + n / 8;
    let hidden: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let domain: Vec<i64> = (1..=k as i64).collect();
    let vars = (0..n).map(|i| Variable::new(format!("v{i}"), domain.clone())).collect();

    let mut cons = Vec::new();
    let mut covered = vec![vec![false; n]; n];
    // Planted cliques: vertices with pairwise distinct hidden colours.
    let cliques = 1 + n / 6;
    for _ in 0..cliques {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let want = rng.gen_range(3..=k.min(5));
        let mut clique: Vec<usize> = Vec::new();
        for v in order {
            if clique.iter().all(|&u| hidden[u] != hidden[v]) {
                clique.push(v);
                if clique.len() == want {
                    break;
                }
            }
        }
        if clique.len() >= 2 {
            clique.sort_unstable();
            for (i, &a) in clique.iter().enumerate() {
                for &b in &clique[i + 1..] {
                    covered[a][b] = true;
                }
            }
            cons.push(Constraint::all_different(clique));
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if hidden[a] != hidden[b] && !covered[a][b] && rng.gen_bool(0.2) {
                cons.push(Constraint::disequality(a, b));
            }
        }
    }
    (vars, cons)
}

fn random_binary_diseq(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Variable>, Vec<Constraint>) {
    let universe = n as i64 + 2;
    let vars: Vec<Variable> = (0..n)
        .map(|i| {
            let mut values: Vec<i64> = (1..=universe).collect();
            values.shuffle(rng);
            let keep = rng.gen_range((n / 2).max(2)..=universe as usize);
            let mut dom: Vec<i64> = values[..keep].to_vec();
            dom.sort_unstable();
            Variable::new(format!("x{i}"), dom)
        })
        .collect();
    let mut cons = Vec::new();
    let edges = n + n / 2;
    let mut seen = std::collections::HashSet::new();
    for _ in 0..edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            cons.push(Constraint::disequality(a.min(b), a.max(b)));
        }
    }
    let groups = 1 + n / 10;
    for _ in 0..groups {
        let width = rng.gen_range(2..=n.min(4));
        let mut pick: Vec<usize> = (0..n).collect();
        pick.shuffle(rng);
        let mut scope = pick[..width].to_vec();
        scope.sort_unstable();
        cons.push(Constraint::all_different(scope));
    }
    (vars, cons)
}

fn random_table(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Variable>, Vec<Constraint>) {
    let d = rng.gen_range(3..=5i64);
    let aux_from = n - n / 5;
    let vars: Vec<Variable> = (0..n)
        .map(|i| {
            let v = Variable::new(format!("t{i}"), (1..=d).collect());
            if i >= aux_from {
                v.aux()
            } else {
                v
            }
        })
        .collect();
    let mut cons = Vec::new();
    for _ in 0..n {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        if a == b {
            b = (a + 1) % n;
        }
        let looseness = rng.gen_range(0.4..0.9);
        let mut tuples = Vec::new();
        for x in 1..=d {
            for y in 1..=d {
                if rng.gen_bool(looseness) {
                    tuples.push(vec![x, y]);
                }
            }
        }
        let polarity = if rng.gen_bool(0.8) {
            Polarity::Allowed
        } else {
            Polarity::Disallowed
        };
        cons.push(Constraint::table(vec![a, b], polarity, tuples));
    }
    let width = (d as usize).min(n);
    if width >= 2 {
        let mut pick: Vec<usize> = (0..n).collect();
        pick.shuffle(rng);
        let mut scope = pick[..width].to_vec();
        scope.sort_unstable();
        cons.push(Constraint::all_different(scope));
    }
    (vars, cons)
}
