use std::collections::VecDeque;
use std::time::Instant;

use super::alldiff::{GacAllDiff, NaiveAllDiff};
use super::store::{DomainStore, Wipeout};
use super::table::{Diseq, TablePropagator};
use super::{CostMode, RunRecord, SearchLimits, Status, Trigger, VariantId, OP_COST_SECONDS};
use crate::csp::{ConstraintKind, CspInstance, VarId};

/// Outcome of [`solve`]: the run record plus the first solution, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub record: RunRecord,
    pub assignment: Option<Vec<i64>>,
}

/// Solves `instance` to the first solution using `variant` for every
/// alldifferent constraint.
pub fn solve(instance: &CspInstance, variant: VariantId, limits: &SearchLimits) -> Solution {
    let start = Instant::now();
    let mut engine = Engine::new(instance, variant, limits, start);
    let outcome = engine.run();
    let elapsed = match limits.cost_mode {
        CostMode::Wallclock => start.elapsed().as_secs_f64(),
        CostMode::Deterministic => engine.ops as f64 * OP_COST_SECONDS,
    };
    let (status, assignment) = match outcome {
        Outcome::Sat if elapsed <= limits.time_limit => (Status::Sat, Some(engine.assignment())),
        Outcome::Fail if elapsed <= limits.time_limit => (Status::Unsat, None),
        _ => (Status::Timeout, None),
    };
    let cpu_time = if status == Status::Timeout {
        elapsed.max(limits.time_limit)
    } else {
        elapsed
    };
    Solution {
        record: RunRecord {
            instance: instance.name().to_string(),
            variant,
            status,
            cpu_time,
            nodes: engine.nodes,
            op_count: engine.ops,
        },
        assignment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Sat,
    Fail,
    Limit,
}

enum Prop {
    Diseq(Diseq),
    Table(TablePropagator),
    Naive(NaiveAllDiff),
    Gac(GacAllDiff),
}

impl Prop {
    fn vars(&self) -> &[VarId] {
        match self {
            Prop::Diseq(p) => p.vars(),
            Prop::Table(p) => p.vars(),
            Prop::Naive(p) => p.vars(),
            Prop::Gac(p) => p.vars(),
        }
    }

    fn propagate(&mut self, store: &mut DomainStore, ops: &mut u64) -> Result<(), Wipeout> {
        match self {
            Prop::Diseq(p) => p.propagate(store, ops),
            Prop::Table(p) => p.propagate(store, ops),
            Prop::Naive(p) => p.propagate(store, ops),
            Prop::Gac(p) => p.propagate(store, ops),
        }
    }

    fn wakes_on_assignment_only(&self) -> bool {
        matches!(self, Prop::Gac(p) if p.knobs().trigger == Trigger::AssignmentOnly)
    }
}

struct Engine<'a> {
    limits: &'a SearchLimits,
    start: Instant,
    store: DomainStore,
    props: Vec<Prop>,
    watchers: Vec<Vec<usize>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    deferred: Vec<bool>,
    ops: u64,
    nodes: u64,
}

impl<'a> Engine<'a> {
    fn new(instance: &CspInstance, variant: VariantId, limits: &'a SearchLimits, start: Instant) -> Self {
        let store = DomainStore::new(instance.variables().iter().map(|v| v.domain.clone()).collect());
        let props: Vec<Prop> = instance
            .constraints()
            .iter()
            .map(|c| match &c.kind {
                ConstraintKind::Disequality => Prop::Diseq(Diseq::new(c.scope[0], c.scope[1], &store)),
                ConstraintKind::Table(t) => Prop::Table(TablePropagator::new(c.scope.clone(), t, &store)),
                ConstraintKind::AllDifferent => match variant {
                    VariantId::Naive => Prop::Naive(NaiveAllDiff::new(c.scope.clone(), &store)),
                    VariantId::Gac(knobs) => Prop::Gac(GacAllDiff::new(c.scope.clone(), &store, knobs)),
                },
            })
            .collect();
        let mut watchers = vec![Vec::new(); instance.num_variables()];
        for (i, p) in props.iter().enumerate() {
            for &v in p.vars() {
                watchers[v].push(i);
            }
        }
        let n = props.len();
        Engine {
            limits,
            start,
            store,
            props,
            watchers,
            queue: VecDeque::with_capacity(n),
            queued: vec![false; n],
            deferred: vec![false; n],
            ops: 0,
            nodes: 0,
        }
    }

    fn run(&mut self) -> Outcome {
        for p in 0..self.props.len() {
            self.enqueue(p);
        }
        if self.propagate().is_err() {
            return Outcome::Fail;
        }
        self.dfs(0)
    }

    fn assignment(&self) -> Vec<i64> {
        (0..self.store.num_vars())
            .map(|v| {
                let p = self.store.fixed_pos(v).expect("solution leaves every variable fixed");
                self.store.value(v, p)
            })
            .collect()
    }

    fn out_of_budget(&self) -> bool {
        if self.limits.node_limit.is_some_and(|n| self.nodes >= n) {
            return true;
        }
        let spent = match self.limits.cost_mode {
            CostMode::Wallclock => self.start.elapsed().as_secs_f64(),
            CostMode::Deterministic => self.ops as f64 * OP_COST_SECONDS,
        };
        spent >= self.limits.time_limit
    }

    fn dfs(&mut self, depth: usize) -> Outcome {
        if depth == self.store.num_vars() {
            return Outcome::Sat;
        }
        let var = depth;
        let candidates: Vec<usize> = self.store.alive_positions(var).collect();
        for pos in candidates {
            if self.out_of_budget() {
                return Outcome::Limit;
            }
            self.nodes += 1;
            self.ops += 1;
            let mark = self.store.mark();
            let ok = self.store.assign(var, pos).is_ok() && {
                self.schedule(None);
                self.propagate().is_ok()
            };
            if ok {
                match self.dfs(depth + 1) {
                    Outcome::Fail => {}
                    other => return other,
                }
            }
            self.store.undo_to(mark);
        }
        Outcome::Fail
    }

    fn enqueue(&mut self, p: usize) {
        if !self.queued[p] {
            self.queued[p] = true;
            self.queue.push_back(p);
        }
    }

    /// Wakes the watchers of every variable touched since the last call.
    fn schedule(&mut self, source: Option<usize>) {
        for var in self.store.take_touched() {
            let fixed = self.store.size(var) == 1;
            for i in 0..self.watchers[var].len() {
                let w = self.watchers[var][i];
                if Some(w) == source {
                    continue;
                }
                if !fixed && self.props[w].wakes_on_assignment_only() {
                    self.deferred[w] = true;
                } else {
                    self.enqueue(w);
                }
            }
        }
    }

    fn propagate(&mut self) -> Result<(), Wipeout> {
        loop {
            while let Some(p) = self.queue.pop_front() {
                self.queued[p] = false;
                self.deferred[p] = false;
                if let Err(e) = self.props[p].propagate(&mut self.store, &mut self.ops) {
                    for q in self.queue.drain(..) {
                        self.queued[q] = false;
                    }
                    self.deferred.iter_mut().for_each(|d| *d = false);
                    self.store.clear_touched();
                    return Err(e);
                }
                self.schedule(Some(p));
            }
            let pending: Vec<usize> = (0..self.props.len()).filter(|&p| self.deferred[p]).collect();
            if pending.is_empty() {
                return Ok(());
            }
            for p in pending {
                self.deferred[p] = false;
                self.enqueue(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{generate_instance, parse_instance, Family};

    fn limits() -> SearchLimits {
        SearchLimits::new(60.0)
    }

    #[test]
    fn pigeon_hole_three() {
        let ph = generate_instance(Family::PigeonHole, 3, 0).unwrap();
        for v in VariantId::all() {
            let s = solve(&ph, v, &limits());
            assert_eq!(s.record.status, Status::Unsat, "{v}");
            if v.is_naive() {
                assert!(s.record.nodes > 0);
            } else {
                assert_eq!(s.record.nodes, 0, "{v}");
            }
        }
    }

    #[test]
    fn single_forced_assignment() {
        let inst = parse_instance("var x : 5\n").unwrap();
        let s = solve(&inst, VariantId::DEFAULT, &limits());
        assert_eq!(s.record.status, Status::Sat);
        assert_eq!(s.assignment, Some(vec![5]));
        assert_eq!(s.record.nodes, 1);
    }

    #[test]
    fn root_gac_prunes_third_variable() {
        // Root propagation fixes c to 3 before any branching.
        let inst = parse_instance("var a : 1 2\nvar b : 1 2\nvar c : 1 2 3\nalldiff a b c\n").unwrap();
        let s = solve(&inst, VariantId::DEFAULT, &limits());
        assert_eq!(s.assignment, Some(vec![1, 2, 3]));
        assert_eq!(s.record.nodes, 3);
    }

    #[test]
    fn finds_latin_square_solution() {
        let inst = generate_instance(Family::LatinSquare, 4, 3).unwrap();
        for v in VariantId::all() {
            let s = solve(&inst, v, &limits());
            assert_eq!(s.record.status, Status::Sat);
            assert!(inst.is_solution(s.assignment.as_ref().unwrap()));
        }
    }

    #[test]
    fn node_limit_times_out() {
        let ph = generate_instance(Family::PigeonHole, 7, 0).unwrap();
        let lim = SearchLimits::new(10.0).with_node_limit(5);
        let s = solve(&ph, VariantId::Naive, &lim);
        assert_eq!(s.record.status, Status::Timeout);
        assert!(s.record.cpu_time >= 10.0);
        assert_eq!(s.record.nodes, 5);
    }

    #[test]
    fn deterministic_mode_is_reproducible() {
        let inst = generate_instance(Family::RandomTable, 8, 11).unwrap();
        let lim = SearchLimits::deterministic(100.0);
        for v in VariantId::all() {
            let a = solve(&inst, v, &lim);
            let b = solve(&inst, v, &lim);
            assert_eq!(a, b);
            assert_eq!(a.record.cpu_time, a.record.op_count as f64 * OP_COST_SECONDS);
        }
    }

    #[test]
    fn deterministic_budget_exhaustion() {
        let ph = generate_instance(Family::PigeonHole, 8, 0).unwrap();
        let lim = SearchLimits::deterministic(0.001);
        let s = solve(&ph, VariantId::Naive, &lim);
        assert_eq!(s.record.status, Status::Timeout);
        assert!(s.record.cpu_time >= 0.001);
    }
}
