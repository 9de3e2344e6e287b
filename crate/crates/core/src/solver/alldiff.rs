//! Alldifferent propagators: the pairwise decomposition and matching-based GAC.

use std::collections::{BTreeMap, HashMap};

use super::store::{DomainStore, Wipeout};
use super::{GacKnobs, SccScope};
use crate::csp::VarId;

/// Result of running a propagator on a standalone set of domains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pruned {
    pub domains: Vec<Vec<i64>>,
    pub op_count: u64,
}

/// Runs the pairwise-disequality propagator on `domains` (one alldifferent
/// over all of them) and returns the resulting domains.
pub fn propagate_naive_alldiff(domains: &[Vec<i64>]) -> Result<Pruned, Wipeout> {
    let mut store = DomainStore::new(domains.to_vec());
    let vars: Vec<VarId> = (0..domains.len()).collect();
    let mut prop = NaiveAllDiff::new(vars.clone(), &store);
    let mut ops = 0;
    prop.propagate(&mut store, &mut ops)?;
    Ok(Pruned {
        domains: vars.iter().map(|&v| store.current(v)).collect(),
        op_count: ops,
    })
}

/// Runs the GAC propagator with the given knobs on `domains`.
pub fn propagate_gac_alldiff(domains: &[Vec<i64>], knobs: GacKnobs) -> Result<Pruned, Wipeout> {
    let mut store = DomainStore::new(domains.to_vec());
    let vars: Vec<VarId> = (0..domains.len()).collect();
    let mut prop = GacAllDiff::new(vars.clone(), &store, knobs);
    let mut ops = 0;
    prop.propagate(&mut store, &mut ops)?;
    Ok(Pruned {
        domains: vars.iter().map(|&v| store.current(v)).collect(),
        op_count: ops,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct NaiveAllDiff {
    vars: Vec<VarId>,
    positions: Vec<HashMap<i64, usize>>,
}

impl NaiveAllDiff {
    pub(crate) fn new(vars: Vec<VarId>, store: &DomainStore) -> Self {
        let positions = vars
            .iter()
            .map(|&v| store.initial(v).iter().enumerate().map(|(p, &x)| (x, p)).collect())
            .collect();
        NaiveAllDiff { vars, positions }
    }

    pub(crate) fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub(crate) fn propagate(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        let k = self.vars.len();
        let mut done = vec![false; k];
        let mut work: Vec<usize> = (0..k).filter(|&i| store.size(self.vars[i]) == 1).collect();
        while let Some(i) = work.pop() {
            if done[i] {
                continue;
            }
            done[i] = true;
            let var = self.vars[i];
            let pos = store.fixed_pos(var).ok_or(Wipeout)?;
            let value = store.value(var, pos);
            for j in 0..k {
                if j == i {
                    continue;
                }
                *ops += 1;
                if let Some(&p) = self.positions[j].get(&value) {
                    if store.remove(self.vars[j], p)? && store.size(self.vars[j]) == 1 {
                        work.push(j);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Régin-style GAC propagator. The value graph edge lists, the matching and
/// scratch buffers persist across calls; the matching is only reused when
/// incremental matching is enabled.
#[derive(Debug, Clone)]
pub(crate) struct GacAllDiff {
    vars: Vec<VarId>,
    /// Per scope variable: (value id, domain position).
    edges: Vec<Vec<(usize, usize)>>,
    num_values: usize,
    var_match: Vec<Option<(usize, usize)>>,
    val_match: Vec<Option<usize>>,
    visited: Vec<u32>,
    stamp: u32,
    knobs: GacKnobs,
}

const UNSEEN: u32 = u32::MAX;

impl GacAllDiff {
    pub(crate) fn new(vars: Vec<VarId>, store: &DomainStore, knobs: GacKnobs) -> Self {
        let mut ids = BTreeMap::new();
        for &v in &vars {
            for &x in store.initial(v) {
                ids.entry(x).or_insert(0usize);
            }
        }
        for (i, id) in ids.values_mut().enumerate() {
            *id = i;
        }
        let edges = vars
            .iter()
            .map(|&v| store.initial(v).iter().enumerate().map(|(p, x)| (ids[x], p)).collect())
            .collect();
        let k = vars.len();
        let m = ids.len();
        GacAllDiff {
            vars,
            edges,
            num_values: m,
            var_match: vec![None; k],
            val_match: vec![None; m],
            visited: vec![0; m],
            stamp: 0,
            knobs,
        }
    }

    pub(crate) fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub(crate) fn knobs(&self) -> GacKnobs {
        self.knobs
    }

    pub(crate) fn propagate(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        self.repair_matching(store, ops)?;
        self.prune(store, ops)
    }

    fn repair_matching(&mut self, store: &DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        let k = self.vars.len();
        if self.knobs.incremental_matching {
            for i in 0..k {
                *ops += 1;
                if let Some((v, p)) = self.var_match[i] {
                    if !store.is_alive(self.vars[i], p) {
                        self.var_match[i] = None;
                        self.val_match[v] = None;
                    }
                }
            }
        } else {
            self.var_match.iter_mut().for_each(|m| *m = None);
            self.val_match.iter_mut().for_each(|m| *m = None);
        }
        for i in 0..k {
            if self.var_match[i].is_none() {
                self.stamp = self.stamp.wrapping_add(1);
                if self.stamp == 0 {
                    self.visited.iter_mut().for_each(|s| *s = 0);
                    self.stamp = 1;
                }
                if !self.augment(i, store, ops) {
                    return Err(Wipeout);
                }
            }
        }
        Ok(())
    }

    fn augment(&mut self, i: usize, store: &DomainStore, ops: &mut u64) -> bool {
        let var = self.vars[i];
        for e in 0..self.edges[i].len() {
            let (v, p) = self.edges[i][e];
            *ops += 1;
            if !store.is_alive(var, p) || self.visited[v] == self.stamp {
                continue;
            }
            self.visited[v] = self.stamp;
            let free = match self.val_match[v] {
                None => true,
                Some(j) => self.augment(j, store, ops),
            };
            if free {
                self.var_match[i] = Some((v, p));
                self.val_match[v] = Some(i);
                return true;
            }
        }
        false
    }

    /// Removes every edge that is unmatched, joins two different SCCs of the
    /// residual graph, and is unreachable from a free value.
    fn prune(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        let k = self.vars.len();
        let m = self.num_values;
        let n = k + m;
        // Matched edges point var -> value, unmatched ones value -> var.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut present = vec![false; m];
        for i in 0..k {
            let matched = self.var_match[i].map(|(v, _)| v);
            for &(v, p) in &self.edges[i] {
                *ops += 1;
                if !store.is_alive(self.vars[i], p) {
                    continue;
                }
                present[v] = true;
                if Some(v) == matched {
                    adj[i].push(k + v);
                } else {
                    adj[k + v].push(i);
                }
            }
        }

        let groups: Vec<Vec<usize>> = match self.knobs.scc_pruning {
            SccScope::Full => vec![(0..k).chain((0..m).filter(|&v| present[v]).map(|v| k + v)).collect()],
            SccScope::PerComponent => self.components(store, &present, ops),
        };

        let mut reach = vec![false; n];
        let mut comp = vec![usize::MAX; n];
        let mut tarjan = Tarjan::new(n);
        let mut check = vec![false; k];
        for nodes in &groups {
            let mut queue: Vec<usize> = nodes
                .iter()
                .copied()
                .filter(|&x| x >= k && self.val_match[x - k].is_none())
                .collect();
            for &x in &queue {
                reach[x] = true;
            }
            while let Some(x) = queue.pop() {
                for &y in &adj[x] {
                    *ops += 1;
                    if !reach[y] {
                        reach[y] = true;
                        queue.push(y);
                    }
                }
            }
            for &x in nodes {
                if x < k {
                    check[x] = true;
                }
                if tarjan.index[x] == UNSEEN {
                    tarjan.run(x, &adj, &mut comp, ops);
                }
            }
        }

        for i in (0..k).filter(|&i| check[i]) {
            let matched = self.var_match[i].map(|(v, _)| v);
            for e in 0..self.edges[i].len() {
                let (v, p) = self.edges[i][e];
                if Some(v) == matched || !store.is_alive(self.vars[i], p) {
                    continue;
                }
                *ops += 1;
                if !reach[k + v] && comp[i] != comp[k + v] {
                    store.remove(self.vars[i], p)?;
                }
            }
        }
        Ok(())
    }

    /// Connected components of the value graph that contain at least two
    /// variables. A single-variable component needs no pruning: all its
    /// unmatched values are free.
    fn components(&self, store: &DomainStore, present: &[bool], ops: &mut u64) -> Vec<Vec<usize>> {
        let k = self.vars.len();
        let m = self.num_values;
        let mut parent: Vec<usize> = (0..k + m).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..k {
            for &(v, p) in &self.edges[i] {
                *ops += 1;
                if store.is_alive(self.vars[i], p) {
                    let a = find(&mut parent, i);
                    let b = find(&mut parent, k + v);
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut by_root: BTreeMap<usize, (usize, Vec<usize>)> = BTreeMap::new();
        for x in (0..k).chain((0..m).filter(|&v| present[v]).map(|v| k + v)) {
            let r = find(&mut parent, x);
            let entry = by_root.entry(r).or_default();
            if x < k {
                entry.0 += 1;
            }
            entry.1.push(x);
        }
        by_root
            .into_values()
            .filter(|(vars, _)| *vars >= 2)
            .map(|(_, nodes)| nodes)
            .collect()
    }
}

/// Iterative Tarjan SCC over a fixed adjacency list.
struct Tarjan {
    index: Vec<u32>,
    low: Vec<u32>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next_index: u32,
    next_comp: usize,
}

impl Tarjan {
    fn new(n: usize) -> Self {
        Tarjan {
            index: vec![UNSEEN; n],
            low: vec![0; n],
            on_stack: vec![false; n],
            stack: Vec::new(),
            next_index: 0,
            next_comp: 0,
        }
    }

    fn run(&mut self, root: usize, adj: &[Vec<usize>], comp: &mut [usize], ops: &mut u64) {
        let mut calls: Vec<(usize, usize)> = vec![(root, 0)];
        self.visit(root);
        while let Some(&mut (x, ref mut edge)) = calls.last_mut() {
            if *edge < adj[x].len() {
                let y = adj[x][*edge];
                *edge += 1;
                *ops += 1;
                if self.index[y] == UNSEEN {
                    self.visit(y);
                    calls.push((y, 0));
                } else if self.on_stack[y] {
                    self.low[x] = self.low[x].min(self.index[y]);
                }
            } else {
                calls.pop();
                if let Some(&(parent, _)) = calls.last() {
                    self.low[parent] = self.low[parent].min(self.low[x]);
                }
                if self.low[x] == self.index[x] {
                    loop {
                        let y = self.stack.pop().expect("tarjan stack underflow");
                        self.on_stack[y] = false;
                        comp[y] = self.next_comp;
                        if y == x {
                            break;
                        }
                    }
                    self.next_comp += 1;
                }
            }
        }
    }

    fn visit(&mut self, x: usize) {
        self.index[x] = self.next_index;
        self.low[x] = self.next_index;
        self.next_index += 1;
        self.stack.push(x);
        self.on_stack[x] = true;
    }
}
