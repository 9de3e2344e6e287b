//! Depth-first CSP solver with a pluggable alldifferent propagator.
//!
//! Search is d-way branching in declaration order: the first undecided
//! variable is branched on, its remaining values are tried in declaration
//! order, and every value-assignment attempt counts as one node (counted
//! before propagation). Propagation runs to a fixpoint after each assignment
//! and once at the root. The solver stops at the first solution.
//!
//! There are nine propagator variants: the pairwise decomposition and eight
//! GAC implementations spanned by three knobs. All GAC variants reach the same
//! fixpoint, so they explore identical search trees and differ only in the
//! work they do, which `op_count` measures.

mod alldiff;
mod search;
mod store;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use alldiff::{propagate_gac_alldiff, propagate_naive_alldiff, Pruned};
pub use search::{solve, Solution};
pub use store::{DomainStore, Wipeout};

/// Simulated seconds charged per counted operation in deterministic mode.
pub const OP_COST_SECONDS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SccScope {
    /// One SCC decomposition over the whole residual graph.
    Full,
    /// Split the value graph into connected components first and skip
    /// components with a single variable.
    PerComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    /// Woken immediately by any domain change in the scope.
    AnyDomainChange,
    /// Woken immediately only when a scope variable becomes fixed; other
    /// changes are batched and handled once the rest of the queue is empty.
    AssignmentOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GacKnobs {
    pub incremental_matching: bool,
    pub scc_pruning: SccScope,
    pub trigger: Trigger,
}

/// One of the nine alldifferent implementations. The derived order puts
/// `Naive` first, then the GAC knobs lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantId {
    Naive,
    Gac(GacKnobs),
}

impl VariantId {
    pub const COUNT: usize = 9;

    /// The default GAC implementation: incremental matching, per-component
    /// SCC pruning, woken on any domain change.
    pub const DEFAULT: VariantId = VariantId::Gac(GacKnobs {
        incremental_matching: true,
        scc_pruning: SccScope::PerComponent,
        trigger: Trigger::AnyDomainChange,
    });

    /// All variants in their total order.
    pub fn all() -> [VariantId; 9] {
        let mut out = [VariantId::Naive; 9];
        let mut i = 1;
        for incremental_matching in [false, true] {
            for scc_pruning in [SccScope::Full, SccScope::PerComponent] {
                for trigger in [Trigger::AnyDomainChange, Trigger::AssignmentOnly] {
                    out[i] = VariantId::Gac(GacKnobs {
                        incremental_matching,
                        scc_pruning,
                        trigger,
                    });
                    i += 1;
                }
            }
        }
        out
    }

    /// Position in [`VariantId::all`].
    pub fn index(self) -> usize {
        match self {
            VariantId::Naive => 0,
            VariantId::Gac(k) => {
                1 + 4 * usize::from(k.incremental_matching)
                    + 2 * usize::from(k.scc_pruning == SccScope::PerComponent)
                    + usize::from(k.trigger == Trigger::AssignmentOnly)
            }
        }
    }

    pub fn from_index(i: usize) -> Option<VariantId> {
        VariantId::all().get(i).copied()
    }

    pub fn knobs(self) -> Option<GacKnobs> {
        match self {
            VariantId::Naive => None,
            VariantId::Gac(k) => Some(k),
        }
    }

    pub fn is_naive(self) -> bool {
        self == VariantId::Naive
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantId::Naive => f.write_str("naive"),
            VariantId::Gac(k) => write!(
                f,
                "gac-{}-{}-{}",
                if k.incremental_matching { "incr" } else { "scratch" },
                match k.scc_pruning {
                    SccScope::Full => "full",
                    SccScope::PerComponent => "comp",
                },
                match k.trigger {
                    Trigger::AnyDomainChange => "any",
                    Trigger::AssignmentOnly => "asg",
                }
            ),
        }
    }
}

impl FromStr for VariantId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariantId::all()
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

impl Serialize for VariantId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VariantId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Sat,
    Unsat,
    Timeout,
}

impl Status {
    pub fn solved(self) -> bool {
        !matches!(self, Status::Timeout)
    }
}

/// How run time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Elapsed time of the solve call.
    #[default]
    Wallclock,
    /// `op_count × OP_COST_SECONDS`; reproducible on any machine.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Seconds, measured according to `cost_mode`.
    pub time_limit: f64,
    pub node_limit: Option<u64>,
    #[serde(default)]
    pub cost_mode: CostMode,
}

impl SearchLimits {
    pub fn new(time_limit: f64) -> Self {
        SearchLimits {
            time_limit,
            node_limit: None,
            cost_mode: CostMode::Wallclock,
        }
    }

    pub fn deterministic(time_limit: f64) -> Self {
        SearchLimits {
            cost_mode: CostMode::Deterministic,
            ..SearchLimits::new(time_limit)
        }
    }

    pub fn with_node_limit(mut self, nodes: u64) -> Self {
        self.node_limit = Some(nodes);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.time_limit > 0.0 && self.time_limit.is_finite() && self.node_limit != Some(0)
    }
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits::new(3600.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub variant: VariantId,
    pub status: Status,
    /// Seconds. At least the time limit when `status` is `Timeout`.
    pub cpu_time: f64,
    pub nodes: u64,
    pub op_count: u64,
}
