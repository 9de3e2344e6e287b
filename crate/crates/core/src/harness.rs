//! Runs every variant on every instance, aggregates repeated runs into a
//! runtime matrix, and derives per-instance labels and costs.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::CspInstance;
use crate::eval::{effective_time, penalty};
use crate::solver::{solve, CostMode, RunRecord, SearchLimits, Status, VariantId, OP_COST_SECONDS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("runs per cell must be odd and at least 1, got {0}")]
    RunsPerCell(usize),
    #[error("deterministic mode takes exactly one run per cell, got {0}")]
    DeterministicRuns(usize),
    #[error("invalid search limits: {0:?}")]
    Limits(SearchLimits),
    #[error("instance `{0}` appears twice in the corpus")]
    DuplicateInstance(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("matrix is missing cell ({instance}, {variant})")]
    MissingCell { instance: String, variant: VariantId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub runs_per_cell: usize,
    pub limits: SearchLimits,
    /// Seconds per counted operation, used in deterministic mode.
    pub op_cost_seconds: f64,
}

impl Protocol {
    pub fn time_limit(&self) -> f64 {
        self.limits.time_limit
    }

    pub fn cost_mode(&self) -> CostMode {
        self.limits.cost_mode
    }
}

/// One aggregated record per (instance, variant), instance-major with the
/// nine variants in their canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeMatrix {
    pub protocol: Protocol,
    instances: Vec<String>,
    cells: Vec<RunRecord>,
}

impl RuntimeMatrix {
    /// Assembles a matrix from aggregated cells in any order.
    pub fn from_cells(protocol: Protocol, cells: Vec<RunRecord>) -> Result<Self, HarnessError> {
        let mut instances: Vec<String> = Vec::new();
        let mut seen = HashSet::new();
        for c in &cells {
            if seen.insert(c.instance.clone()) {
                instances.push(c.instance.clone());
            }
        }
        let mut by_key: HashMap<(String, VariantId), RunRecord> = HashMap::new();
        for c in cells {
            by_key.insert((c.instance.clone(), c.variant), c);
        }
        let mut ordered = Vec::with_capacity(instances.len() * VariantId::COUNT);
        for name in &instances {
            for variant in VariantId::all() {
                let cell = by_key
                    .remove(&(name.clone(), variant))
                    .ok_or_else(|| HarnessError::MissingCell {
                        instance: name.clone(),
                        variant,
                    })?;
                ordered.push(cell);
            }
        }
        Ok(RuntimeMatrix {
            protocol,
            instances,
            cells: ordered,
        })
    }

    pub fn instances(&self) -> &[String] {
        &self.instances
    }

    pub fn cells(&self) -> &[RunRecord] {
        &self.cells
    }

    /// The nine cells of one instance, in variant order.
    pub fn cells_for(&self, instance: &str) -> Option<&[RunRecord]> {
        let i = self.instances.iter().position(|n| n == instance)?;
        Some(&self.cells[i * VariantId::COUNT..(i + 1) * VariantId::COUNT])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[RunRecord])> {
        self.instances
            .iter()
            .map(String::as_str)
            .zip(self.cells.chunks(VariantId::COUNT))
    }

    /// Copy with every cell time multiplied by `factor` and the limit scaled alike.
    pub fn scaled(&self, factor: f64) -> RuntimeMatrix {
        let mut m = self.clone();
        m.protocol.limits.time_limit *= factor;
        for c in &mut m.cells {
            c.cpu_time *= factor;
        }
        m
    }
}

/// Component-wise aggregate of repeated runs of one cell: median time,
/// nodes and op count; majority status (ties resolve to `Timeout`).
pub fn aggregate(runs: &[RunRecord]) -> RunRecord {
    assert!(!runs.is_empty(), "aggregate needs at least one run");
    fn median<T: Copy + PartialOrd>(mut xs: Vec<T>) -> T {
        xs.sort_by(|a, b| a.partial_cmp(b).expect("comparable run values"));
        xs[(xs.len() - 1) / 2]
    }
    let count = |s: Status| runs.iter().filter(|r| r.status == s).count();
    let (sat, unsat, timeout) = (count(Status::Sat), count(Status::Unsat), count(Status::Timeout));
    let status = if sat > unsat && sat > timeout {
        Status::Sat
    } else if unsat > sat && unsat > timeout {
        Status::Unsat
    } else {
        Status::Timeout
    };
    RunRecord {
        instance: runs[0].instance.clone(),
        variant: runs[0].variant,
        status,
        cpu_time: median(runs.iter().map(|r| r.cpu_time).collect()),
        nodes: median(runs.iter().map(|r| r.nodes).collect()),
        op_count: median(runs.iter().map(|r| r.op_count).collect()),
    }
}

/// Runs all nine variants `runs_per_cell` times on each instance. `jobs`
/// bounds the number of worker threads; the result does not depend on it.
pub fn benchmark(
    corpus: &[CspInstance],
    limits: &SearchLimits,
    runs_per_cell: usize,
    jobs: Option<usize>,
) -> Result<RuntimeMatrix, HarnessError> {
    if runs_per_cell == 0 || runs_per_cell.is_multiple_of(2) {
        return Err(HarnessError::RunsPerCell(runs_per_cell));
    }
    if limits.cost_mode == CostMode::Deterministic && runs_per_cell != 1 {
        return Err(HarnessError::DeterministicRuns(runs_per_cell));
    }
    if !limits.is_valid() {
        return Err(HarnessError::Limits(*limits));
    }
    let mut names = HashSet::new();
    for inst in corpus {
        if !names.insert(inst.name()) {
            return Err(HarnessError::DuplicateInstance(inst.name().to_string()));
        }
    }

    let jobs_list: Vec<(usize, VariantId)> = (0..corpus.len())
        .flat_map(|i| VariantId::all().into_iter().map(move |v| (i, v)))
        .collect();
    let run_cell = |&(i, v): &(usize, VariantId)| -> RunRecord {
        let runs: Vec<RunRecord> = (0..runs_per_cell)
            .map(|_| solve(&corpus[i], v, limits).record)
            .collect();
        aggregate(&runs)
    };
    let cells: Vec<RunRecord> = match jobs {
        Some(1) => jobs_list.iter().map(run_cell).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?
            .install(|| jobs_list.par_iter().map(run_cell).collect()),
        None => jobs_list.par_iter().map(run_cell).collect(),
    };
    RuntimeMatrix::from_cells(
        Protocol {
            runs_per_cell,
            limits: *limits,
            op_cost_seconds: OP_COST_SECONDS,
        },
        cells,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Best(VariantId),
    DontKnow,
}

impl Label {
    pub fn variant(self) -> Option<VariantId> {
        match self {
            Label::Best(v) => Some(v),
            Label::DontKnow => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Best(v) => v.fmt(f),
            Label::DontKnow => f.write_str("dont-know"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "dont-know" {
            Ok(Label::DontKnow)
        } else {
            s.parse().map(Label::Best)
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostedLabel {
    pub label: Label,
    /// Largest misclassification penalty over the nine variants, in seconds.
    pub cost: f64,
}

/// Labels one instance from its nine aggregated cells.
///
/// The naive variant wins if it solved the instance strictly faster than
/// every other variant that solved it. Otherwise the solving GAC variant with
/// the highest node rate wins; equal rates go to the lower time, then to the
/// earlier variant.
pub fn label_instance(cells: &[RunRecord], time_limit: f64) -> CostedLabel {
    let solved: Vec<&RunRecord> = cells.iter().filter(|c| c.status.solved()).collect();
    if solved.is_empty() {
        return CostedLabel {
            label: Label::DontKnow,
            cost: 0.0,
        };
    }
    let naive = solved.iter().find(|c| c.variant.is_naive());
    let naive_wins = naive.is_some_and(|n| {
        solved
            .iter()
            .filter(|c| !c.variant.is_naive())
            .all(|c| n.cpu_time < c.cpu_time)
    });
    let label = if naive_wins {
        Label::Best(VariantId::Naive)
    } else {
        let mut best: Option<&RunRecord> = None;
        let mut gac: Vec<&&RunRecord> = solved.iter().filter(|c| !c.variant.is_naive()).collect();
        gac.sort_by_key(|c| c.variant);
        for c in gac {
            best = match best {
                None => Some(c),
                Some(b) => {
                    // c.nodes / c.time vs b.nodes / b.time without dividing by zero.
                    let lhs = c.nodes as f64 * b.cpu_time;
                    let rhs = b.nodes as f64 * c.cpu_time;
                    if lhs > rhs || (lhs == rhs && c.cpu_time < b.cpu_time) {
                        Some(c)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        // Only the naive variant solved it but was not strictly fastest:
        // impossible, since every other variant timed out.
        Label::Best(best.map_or(VariantId::Naive, |b| b.variant))
    };
    let cost = VariantId::all()
        .into_iter()
        .map(|v| penalty(v, cells, time_limit))
        .fold(0.0, f64::max)
        .min(time_limit);
    CostedLabel { label, cost }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLabel {
    pub instance: String,
    pub label: Label,
    pub cost: f64,
}

pub fn label_matrix(matrix: &RuntimeMatrix) -> Vec<InstanceLabel> {
    matrix
        .rows()
        .map(|(name, cells)| {
            let CostedLabel { label, cost } = label_instance(cells, matrix.protocol.time_limit());
            InstanceLabel {
                instance: name.to_string(),
                label,
                cost,
            }
        })
        .collect()
}

/// Effective times of the nine cells (timeouts charged the limit).
pub fn effective_times(cells: &[RunRecord], time_limit: f64) -> Vec<f64> {
    cells.iter().map(|c| effective_time(c, time_limit)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{generate_instance, Family};

    pub(crate) fn cell(variant: VariantId, status: Status, time: f64, nodes: u64) -> RunRecord {
        RunRecord {
            instance: "i".into(),
            variant,
            status,
            cpu_time: time,
            nodes,
            op_count: 0,
        }
    }

    fn cells(times: [f64; 9]) -> Vec<RunRecord> {
        VariantId::all()
            .into_iter()
            .zip(times)
            .map(|(v, t)| cell(v, Status::Sat, t, 100))
            .collect()
    }

    #[test]
    fn median_of_three() {
        let v = VariantId::Naive;
        let runs = [
            cell(v, Status::Sat, 1.0, 1),
            cell(v, Status::Sat, 9.0, 1),
            cell(v, Status::Sat, 2.0, 1),
        ];
        let agg = aggregate(&runs);
        assert_eq!(agg.cpu_time, 2.0);
        assert_eq!(agg.status, Status::Sat);
    }

    #[test]
    fn majority_timeout_keeps_limit_invariant() {
        let v = VariantId::Naive;
        let runs = [
            cell(v, Status::Timeout, 10.0, 1),
            cell(v, Status::Sat, 9.0, 1),
            cell(v, Status::Timeout, 10.5, 1),
        ];
        let agg = aggregate(&runs);
        assert_eq!(agg.status, Status::Timeout);
        assert!(agg.cpu_time >= 10.0);
    }

    #[test]
    fn naive_fastest_wins() {
        let c = cells([1.0, 2.0, 2.0, 2.5, 3.0, 2.0, 2.0, 2.0, 4.0]);
        let l = label_instance(&c, 3600.0);
        assert_eq!(l.label, Label::Best(VariantId::Naive));
        assert_eq!(l.cost, 3.0);
    }

    #[test]
    fn equal_nodes_pick_fastest_gac() {
        let c = cells([5.0, 2.0, 1.5, 3.0, 2.5, 2.2, 4.0, 3.3, 2.1]);
        let l = label_instance(&c, 3600.0);
        assert_eq!(l.label, Label::Best(VariantId::all()[2]));
    }

    #[test]
    fn naive_tie_is_not_a_win() {
        let c = cells([2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
        assert_eq!(label_instance(&c, 10.0).label, Label::Best(VariantId::all()[1]));
    }

    #[test]
    fn zero_node_runs_prefer_lower_time() {
        let mut c = cells([5.0, 2.0, 1.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
        c.iter_mut().for_each(|r| r.nodes = 0);
        assert_eq!(label_instance(&c, 10.0).label, Label::Best(VariantId::all()[2]));
    }

    #[test]
    fn all_timeouts_dont_know() {
        let c: Vec<RunRecord> = VariantId::all()
            .into_iter()
            .map(|v| cell(v, Status::Timeout, 3600.0, 7))
            .collect();
        let l = label_instance(&c, 3600.0);
        assert_eq!(l.label, Label::DontKnow);
        assert_eq!(l.cost, 0.0);
    }

    #[test]
    fn only_naive_solves() {
        let mut c: Vec<RunRecord> = VariantId::all()
            .into_iter()
            .map(|v| cell(v, Status::Timeout, 60.0, 7))
            .collect();
        c[0] = cell(VariantId::Naive, Status::Sat, 10.0, 3);
        let l = label_instance(&c, 60.0);
        assert_eq!(l.label, Label::Best(VariantId::Naive));
        assert_eq!(l.cost, 50.0);
    }

    #[test]
    fn benchmark_fills_all_cells() {
        let corpus = vec![
            generate_instance(Family::PigeonHole, 3, 0).unwrap(),
            generate_instance(Family::LatinSquare, 3, 1).unwrap(),
        ];
        let m = benchmark(&corpus, &SearchLimits::new(30.0), 3, Some(2)).unwrap();
        assert_eq!(m.cells().len(), 18);
        assert_eq!(m.instances().len(), 2);
        for (_, row) in m.rows() {
            for (c, v) in row.iter().zip(VariantId::all()) {
                assert_eq!(c.variant, v);
            }
        }
    }

    #[test]
    fn deterministic_benchmark_repeats() {
        let corpus: Vec<_> = (0..3)
            .map(|s| generate_instance(Family::RandomBinaryDiseq, 8, s).unwrap())
            .collect();
        let lim = SearchLimits::deterministic(5.0);
        let a = benchmark(&corpus, &lim, 1, Some(1)).unwrap();
        let b = benchmark(&corpus, &lim, 1, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(label_matrix(&a), label_matrix(&b));
    }

    #[test]
    fn protocol_errors() {
        let corpus = vec![generate_instance(Family::PigeonHole, 3, 0).unwrap()];
        assert_eq!(
            benchmark(&corpus, &SearchLimits::new(1.0), 2, None),
            Err(HarnessError::RunsPerCell(2))
        );
        assert_eq!(
            benchmark(&corpus, &SearchLimits::deterministic(1.0), 3, None),
            Err(HarnessError::DeterministicRuns(3))
        );
        let twice = vec![corpus[0].clone(), corpus[0].clone()];
        assert!(matches!(
            benchmark(&twice, &SearchLimits::new(1.0), 1, None),
            Err(HarnessError::DuplicateInstance(_))
        ));
    }

    #[test]
    fn label_serde() {
        for l in [
            Label::DontKnow,
            Label::Best(VariantId::Naive),
            Label::Best(VariantId::DEFAULT),
        ] {
            let s = serde_json::to_string(&l).unwrap();
            assert_eq!(serde_json::from_str::<Label>(&s).unwrap(), l);
        }
    }
}
