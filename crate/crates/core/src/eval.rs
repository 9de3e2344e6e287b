//! Misclassification penalties, baseline selectors and penalty reports.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::harness::RuntimeMatrix;
use crate::solver::{RunRecord, VariantId};

/// Floor applied to times when forming speedup ratios.
const MIN_TIME: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("instance `{0}` has no cells in the runtime matrix")]
    MissingInstance(String),
}

/// Run time if solved, the limit otherwise.
pub fn effective_time(cell: &RunRecord, time_limit: f64) -> f64 {
    if cell.status.solved() {
        cell.cpu_time
    } else {
        time_limit
    }
}

pub fn fastest_solved_time(cells: &[RunRecord]) -> Option<f64> {
    cells
        .iter()
        .filter(|c| c.status.solved())
        .map(|c| c.cpu_time)
        .min_by(f64::total_cmp)
}

/// Extra time spent by choosing `chosen` instead of the fastest variant. A
/// timed-out choice is charged the limit minus the fastest time; an instance
/// no variant solved costs nothing.
pub fn penalty(chosen: VariantId, cells: &[RunRecord], time_limit: f64) -> f64 {
    let Some(best) = fastest_solved_time(cells) else {
        return 0.0;
    };
    let cell = cells
        .iter()
        .find(|c| c.variant == chosen)
        .expect("cells cover every variant");
    (effective_time(cell, time_limit) - best).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance: String,
    /// `None` for rows that average over choices.
    pub chosen: Option<VariantId>,
    pub penalty: f64,
    /// Default-variant time over chosen-variant time.
    pub speedup: f64,
    /// As `speedup`, with feature and selection time added to the chosen time.
    pub speedup_with_overhead: f64,
    pub feature_time: f64,
    pub select_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub name: String,
    pub total: f64,
    pub instances: Vec<InstanceOutcome>,
}

impl PenaltyRow {
    fn from_outcomes(name: impl Into<String>, instances: Vec<InstanceOutcome>) -> Self {
        PenaltyRow {
            name: name.into(),
            total: instances.iter().map(|o| o.penalty).sum(),
            instances,
        }
    }

    pub fn mean_speedup(&self) -> f64 {
        mean(self.instances.iter().map(|o| o.speedup))
    }

    pub fn mean_speedup_with_overhead(&self) -> f64 {
        mean(self.instances.iter().map(|o| o.speedup_with_overhead))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// An instance to evaluate a selector on.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInstance {
    pub name: String,
    pub features: FeatureVector,
    /// Seconds spent extracting the features.
    pub feature_time: f64,
}

fn outcome(
    instance: &str,
    chosen: VariantId,
    cells: &[RunRecord],
    time_limit: f64,
    feature_time: f64,
    select_time: f64,
) -> InstanceOutcome {
    let pen = penalty(chosen, cells, time_limit);
    if fastest_solved_time(cells).is_none() {
        return InstanceOutcome {
            instance: instance.to_string(),
            chosen: Some(chosen),
            penalty: 0.0,
            speedup: 1.0,
            speedup_with_overhead: 1.0,
            feature_time,
            select_time,
        };
    }
    let time_of = |v: VariantId| {
        let c = cells
            .iter()
            .find(|c| c.variant == v)
            .expect("cells cover every variant");
        effective_time(c, time_limit)
    };
    let default = time_of(VariantId::DEFAULT).max(MIN_TIME);
    let picked = time_of(chosen);
    InstanceOutcome {
        instance: instance.to_string(),
        chosen: Some(chosen),
        penalty: pen,
        speedup: default / picked.max(MIN_TIME),
        speedup_with_overhead: default / (picked + feature_time + select_time).max(MIN_TIME),
        feature_time,
        select_time,
    }
}

/// Evaluates a selector over `instances`. With `measure_overhead` unset the
/// selection time is recorded as zero, which keeps reports reproducible.
pub fn evaluate<F>(
    name: &str,
    instances: &[EvalInstance],
    matrix: &RuntimeMatrix,
    measure_overhead: bool,
    mut selector: F,
) -> Result<PenaltyRow, EvalError>
where
    F: FnMut(&EvalInstance) -> VariantId,
{
    let limit = matrix.protocol.time_limit();
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        let cells = matrix
            .cells_for(&inst.name)
            .ok_or_else(|| EvalError::MissingInstance(inst.name.clone()))?;
        let start = Instant::now();
        let chosen = selector(inst);
        let select_time = if measure_overhead {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        out.push(outcome(
            &inst.name,
            chosen,
            cells,
            limit,
            inst.feature_time,
            select_time,
        ));
    }
    Ok(PenaltyRow::from_outcomes(name, out))
}

fn choose_row<F>(name: &str, names: &[String], matrix: &RuntimeMatrix, mut pick: F) -> Result<PenaltyRow, EvalError>
where
    F: FnMut(&[RunRecord]) -> VariantId,
{
    let limit = matrix.protocol.time_limit();
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let cells = matrix
            .cells_for(n)
            .ok_or_else(|| EvalError::MissingInstance(n.clone()))?;
        out.push(outcome(n, pick(cells), cells, limit, 0.0, 0.0));
    }
    Ok(PenaltyRow::from_outcomes(name, out))
}

fn extreme(cells: &[RunRecord], limit: f64, worst: bool) -> VariantId {
    let mut best = &cells[0];
    for c in &cells[1..] {
        let (t, b) = (effective_time(c, limit), effective_time(best, limit));
        if (worst && t > b) || (!worst && t < b) {
            best = c;
        }
    }
    best.variant
}

pub fn oracle_choice(cells: &[RunRecord], time_limit: f64) -> VariantId {
    extreme(cells, time_limit, false)
}

pub fn anti_oracle_choice(cells: &[RunRecord], time_limit: f64) -> VariantId {
    extreme(cells, time_limit, true)
}

/// Rows for always choosing each single variant, in variant order.
pub fn constant_rows(matrix: &RuntimeMatrix, names: &[String]) -> Result<Vec<PenaltyRow>, EvalError> {
    VariantId::all()
        .into_iter()
        .map(|v| choose_row(&format!("always {v}"), names, matrix, |_| v))
        .collect()
}

/// Oracle, anti-oracle, default, seeded random choice and the exact expected
/// penalty of a uniformly random choice.
pub fn baselines(matrix: &RuntimeMatrix, names: &[String], seed: u64) -> Result<Vec<PenaltyRow>, EvalError> {
    let limit = matrix.protocol.time_limit();
    let oracle = choose_row("oracle", names, matrix, |c| oracle_choice(c, limit))?;
    let anti = choose_row("anti-oracle", names, matrix, |c| anti_oracle_choice(c, limit))?;
    let default = choose_row("default decision", names, matrix, |_| VariantId::DEFAULT)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = VariantId::all();
    let random = choose_row("random decision", names, matrix, |_| all[rng.gen_range(0..all.len())])?;

    let mut expected = Vec::with_capacity(names.len());
    for n in names {
        let cells = matrix
            .cells_for(n)
            .ok_or_else(|| EvalError::MissingInstance(n.clone()))?;
        let per: Vec<InstanceOutcome> = all.iter().map(|&v| outcome(n, v, cells, limit, 0.0, 0.0)).collect();
        let k = per.len() as f64;
        expected.push(InstanceOutcome {
            instance: n.clone(),
            chosen: None,
            penalty: per.iter().map(|o| o.penalty).sum::<f64>() / k,
            speedup: per.iter().map(|o| o.speedup).sum::<f64>() / k,
            speedup_with_overhead: per.iter().map(|o| o.speedup_with_overhead).sum::<f64>() / k,
            feature_time: 0.0,
            select_time: 0.0,
        });
    }
    let expectation = PenaltyRow::from_outcomes("random (expected)", expected);
    Ok(vec![oracle, anti, default, random, expectation])
}

/// Aligned plain-text table of row totals.
pub fn format_table(title: &str, rows: &[PenaltyRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("classifier".len());
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<width$}  {:>16}  {:>12}  {:>16}",
        "classifier", "penalty [s]", "mean speedup", "incl. overhead"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 50));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>16.6}  {:>12.4}  {:>16.4}",
            r.name,
            r.total,
            r.mean_speedup(),
            r.mean_speedup_with_overhead()
        );
    }
    out
}

/// Per-instance CSV for one row.
pub fn instances_csv(row: &PenaltyRow) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance",
        "chosen",
        "penalty",
        "speedup",
        "speedup_with_overhead",
        "feature_time",
        "select_time",
    ])?;
    for o in &row.instances {
        w.write_record([
            o.instance.clone(),
            o.chosen.map_or_else(|| "-".to_string(), |v| v.to_string()),
            o.penalty.to_string(),
            o.speedup.to_string(),
            o.speedup_with_overhead.to_string(),
            o.feature_time.to_string(),
            o.select_time.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
