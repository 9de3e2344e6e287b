//! Propagators for the binary disequality and extensional constraints.

use std::collections::HashMap;

use super::store::{DomainStore, Wipeout};
use crate::csp::{Polarity, Table, VarId};

/// Largest cross product enumerated when turning a negative table into
/// its positive complement.
const MAX_COMPLEMENT: usize = 100_000;

/// Prunes the other side once either variable is fixed.
#[derive(Debug, Clone)]
pub(crate) struct Diseq {
    vars: [VarId; 2],
    /// `map[s][p]`: position in the other variable of value `p` of side `s`.
    map: [Vec<Option<usize>>; 2],
}

impl Diseq {
    pub(crate) fn new(a: VarId, b: VarId, store: &DomainStore) -> Self {
        let side = |from: VarId, to: VarId| -> Vec<Option<usize>> {
            let pos: HashMap<i64, usize> = store.initial(to).iter().enumerate().map(|(p, &x)| (x, p)).collect();
            store.initial(from).iter().map(|x| pos.get(x).copied()).collect()
        };
        Diseq {
            vars: [a, b],
            map: [side(a, b), side(b, a)],
        }
    }

    pub(crate) fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub(crate) fn propagate(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        for s in 0..2 {
            if let Some(p) = store.fixed_pos(self.vars[s]) {
                *ops += 1;
                if let Some(q) = self.map[s][p] {
                    store.remove(self.vars[1 - s], q)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum TableMode {
    /// Positive tuples as domain positions; GAC by support scan.
    Supports(Vec<Vec<usize>>),
    /// Negative table too large to complement: check once all but one variable is fixed.
    Forbidden { values: Vec<Vec<i64>>, forbidden: Table },
}

#[derive(Debug, Clone)]
pub(crate) struct TablePropagator {
    vars: Vec<VarId>,
    mode: TableMode,
}

impl TablePropagator {
    pub(crate) fn new(vars: Vec<VarId>, table: &Table, store: &DomainStore) -> Self {
        let positions: Vec<HashMap<i64, usize>> = vars
            .iter()
            .map(|&v| store.initial(v).iter().enumerate().map(|(p, &x)| (x, p)).collect())
            .collect();
        let to_positions = |tuple: &[i64]| -> Option<Vec<usize>> {
            tuple
                .iter()
                .zip(&positions)
                .map(|(x, pos)| pos.get(x).copied())
                .collect()
        };
        let product = vars
            .iter()
            .try_fold(1usize, |acc, &v| acc.checked_mul(store.initial(v).len()));
        let mode = match table.polarity {
            Polarity::Allowed => TableMode::Supports(table.tuples.iter().filter_map(|t| to_positions(t)).collect()),
            Polarity::Disallowed => match product {
                Some(n) if n <= MAX_COMPLEMENT => {
                    let mut supports = Vec::new();
                    let mut idx = vec![0usize; vars.len()];
                    let mut tuple = vec![0i64; vars.len()];
                    'outer: loop {
                        for (i, &v) in vars.iter().enumerate() {
                            tuple[i] = store.initial(v)[idx[i]];
                        }
                        if !table.contains(&tuple) {
                            supports.push(idx.clone());
                        }
                        let mut pos = vars.len();
                        loop {
                            if pos == 0 {
                                break 'outer;
                            }
                            pos -= 1;
                            idx[pos] += 1;
                            if idx[pos] < store.initial(vars[pos]).len() {
                                break;
                            }
                            idx[pos] = 0;
                        }
                    }
                    TableMode::Supports(supports)
                }
                _ => TableMode::Forbidden {
                    values: vars.iter().map(|&v| store.initial(v).to_vec()).collect(),
                    forbidden: table.clone(),
                },
            },
        };
        TablePropagator { vars, mode }
    }

    pub(crate) fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub(crate) fn propagate(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        match &self.mode {
            TableMode::Supports(tuples) => {
                let mut supported: Vec<Vec<bool>> =
                    self.vars.iter().map(|&v| vec![false; store.initial(v).len()]).collect();
                for t in tuples {
                    let mut valid = true;
                    for (i, &p) in t.iter().enumerate() {
                        *ops += 1;
                        if !store.is_alive(self.vars[i], p) {
                            valid = false;
                            break;
                        }
                    }
                    if valid {
                        for (i, &p) in t.iter().enumerate() {
                            supported[i][p] = true;
                        }
                    }
                }
                for (i, &v) in self.vars.iter().enumerate() {
                    for (p, &s) in supported[i].iter().enumerate() {
                        if !s {
                            store.remove(v, p)?;
                        }
                    }
                }
                Ok(())
            }
            TableMode::Forbidden { values, forbidden } => {
                let open: Vec<usize> = (0..self.vars.len()).filter(|&i| store.size(self.vars[i]) > 1).collect();
                if open.len() > 1 {
                    return Ok(());
                }
                let mut tuple: Vec<i64> = self
                    .vars
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| store.fixed_pos(v).map_or(0, |p| values[i][p]))
                    .collect();
                match open.first() {
                    None => {
                        *ops += 1;
                        if forbidden.contains(&tuple) {
                            return Err(Wipeout);
                        }
                    }
                    Some(&i) => {
                        let var = self.vars[i];
                        let alive: Vec<usize> = store.alive_positions(var).collect();
                        for p in alive {
                            *ops += 1;
                            tuple[i] = values[i][p];
                            if forbidden.contains(&tuple) {
                                store.remove(var, p)?;
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}
