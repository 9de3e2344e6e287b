//! Instance attributes used to predict the best alldifferent variant.
//!
//! The full set has 37 attributes. The cheap set drops the eight expensive
//! primal-graph attributes (everything graph-based except edge density) and
//! keeps the remaining 29.

mod graph;
mod stats;
mod symmetry;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::csp::{Constraint, ConstraintKind, CspInstance};

pub use graph::{
    build_primal_graph, clustering_coefficient, degree_features, edge_density, graph_width, ordering_width,
    width_of_graph, width_of_ordering, DegreeFeatures, PrimalGraph,
};
pub use stats::{quantile, scalar_stats, ScalarStats};
pub use symmetry::{refine_colours, symmetric_variable_proportion};

/// Random tuples drawn per constraint when estimating tightness.
pub const TIGHTNESS_SAMPLES: usize = 1000;

/// Canonical order of all 37 attributes.
pub const FEATURE_NAMES: [&str; 37] = [
    "edge_density",
    "clustering_coefficient",
    "norm_degree_min",
    "norm_degree_max",
    "norm_degree_mean",
    "norm_degree_median",
    "norm_degree_stddev",
    "width_of_ordering",
    "width_of_graph",
    "domain_size_min",
    "domain_size_q1",
    "domain_size_median",
    "domain_size_q3",
    "domain_size_max",
    "domain_size_mean",
    "arity_min",
    "arity_q1",
    "arity_median",
    "arity_q3",
    "arity_max",
    "arity_mean",
    "multiple_shared_variables",
    "norm_mean_constraints_per_variable",
    "aux_ratio",
    "tightness_min",
    "tightness_q1",
    "tightness_median",
    "tightness_q3",
    "tightness_max",
    "tightness_mean",
    "symmetric_variable_proportion",
    "alldiff_union_min",
    "alldiff_union_q1",
    "alldiff_union_median",
    "alldiff_union_q3",
    "alldiff_union_max",
    "alldiff_union_mean",
];

/// Attributes left out of the cheap set.
pub const EXPENSIVE_FEATURES: [&str; 8] = [
    "clustering_coefficient",
    "norm_degree_min",
    "norm_degree_max",
    "norm_degree_mean",
    "norm_degree_median",
    "norm_degree_stddev",
    "width_of_ordering",
    "width_of_graph",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Full,
    Cheap,
}

impl FeatureSet {
    pub fn names(self) -> Vec<&'static str> {
        match self {
            FeatureSet::Full => FEATURE_NAMES.to_vec(),
            FeatureSet::Cheap => FEATURE_NAMES
                .iter()
                .copied()
                .filter(|n| !EXPENSIVE_FEATURES.contains(n))
                .collect(),
        }
    }

    pub fn len(self) -> usize {
        match self {
            FeatureSet::Full => 37,
            FeatureSet::Cheap => 29,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Full => "full",
            FeatureSet::Cheap => "cheap",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(FeatureSet::Full),
            "cheap" => Ok(FeatureSet::Cheap),
            _ => Err(format!("unknown feature set `{s}` (expected full or cheap)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("feature set {set} expects {expected} values, got {found}")]
    Count {
        set: FeatureSet,
        expected: usize,
        found: usize,
    },
    #[error("feature `{0}` is not part of the set")]
    UnknownName(String),
    #[error("feature `{0}` is missing")]
    MissingName(String),
    #[error("feature `{0}` appears twice")]
    DuplicateName(String),
    #[error("feature `{0}` is not finite")]
    NotFinite(String),
}

/// Named attribute values in canonical order, plus the sampling seed and
/// notes about degenerate inputs (e.g. `no-alldiff`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    set: FeatureSet,
    seed: u64,
    values: Vec<f64>,
    flags: Vec<String>,
}

impl FeatureVector {
    pub fn new(set: FeatureSet, seed: u64, values: Vec<f64>, flags: Vec<String>) -> Result<Self, FeatureError> {
        if values.len() != set.len() {
            return Err(FeatureError::Count {
                set,
                expected: set.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NotFinite(set.names()[i].to_string()));
        }
        Ok(FeatureVector {
            set,
            seed,
            values,
            flags,
        })
    }

    pub fn set(&self) -> FeatureSet {
        self.set
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.set.names().iter().position(|n| *n == name).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.set.names().into_iter().zip(self.values.iter().copied())
    }

    /// Projects a full vector onto the cheap set. Cheap vectors are returned unchanged.
    pub fn to_cheap(&self) -> FeatureVector {
        let values = self
            .iter()
            .filter(|(n, _)| !EXPENSIVE_FEATURES.contains(n))
            .map(|(_, v)| v)
            .collect();
        FeatureVector {
            set: FeatureSet::Cheap,
            seed: self.seed,
            values,
            flags: self.flags.clone(),
        }
    }

    pub fn csv_header(set: FeatureSet) -> String {
        let mut cols = vec!["instance"];
        cols.extend(set.names());
        cols.join(",")
    }

    pub fn csv_row(&self, instance: &str) -> String {
        let mut cols = vec![instance.to_string()];
        cols.extend(self.values.iter().map(f64::to_string));
        cols.join(",")
    }
}

struct NamedValues<'a>(&'a FeatureVector);

impl Serialize for NamedValues<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.values.len()))?;
        for (n, v) in self.0.iter() {
            map.serialize_entry(n, &v)?;
        }
        map.end()
    }
}

struct OrderedValues(Vec<(String, f64)>);

impl<'de> Deserialize<'de> for OrderedValues {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedValues;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of feature names to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<OrderedValues, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(OrderedValues(out))
            }
        }
        d.deserialize_map(V)
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("set", &self.set)?;
        map.serialize_entry("seed", &self.seed)?;
        map.serialize_entry("flags", &self.flags)?;
        map.serialize_entry("values", &NamedValues(self))?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            set: FeatureSet,
            seed: u64,
            #[serde(default)]
            flags: Vec<String>,
            values: OrderedValues,
        }
        let raw = Raw::deserialize(d)?;
        let names = raw.set.names();
        if raw.values.0.len() != names.len() {
            return Err(de::Error::custom(FeatureError::Count {
                set: raw.set,
                expected: names.len(),
                found: raw.values.0.len(),
            }));
        }
        let mut by_name: HashMap<&str, f64> = HashMap::with_capacity(names.len());
        for (k, v) in &raw.values.0 {
            if !names.contains(&k.as_str()) {
                return Err(de::Error::custom(FeatureError::UnknownName(k.clone())));
            }
            if by_name.insert(k, *v).is_some() {
                return Err(de::Error::custom(FeatureError::DuplicateName(k.clone())));
            }
        }
        let values = names
            .iter()
            .map(|n| {
                by_name
                    .get(n)
                    .copied()
                    .ok_or_else(|| de::Error::custom(FeatureError::MissingName((*n).to_string())))
            })
            .collect::<Result<Vec<f64>, D::Error>>()?;
        FeatureVector::new(raw.set, raw.seed, values, raw.flags).map_err(de::Error::custom)
    }
}

/// Feature vector plus the time it took to compute.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub features: FeatureVector,
    pub elapsed: Duration,
}

fn stats_or_zero(values: &[f64], flag: &str, flags: &mut Vec<String>) -> ScalarStats {
    match scalar_stats(values) {
        Some(s) => s,
        None => {
            flags.push(flag.to_string());
            ScalarStats::default()
        }
    }
}

/// Domain size statistics (unnormalised).
pub fn domain_size_stats(instance: &CspInstance) -> Option<ScalarStats> {
    let sizes: Vec<f64> = instance.variables().iter().map(|v| v.domain.len() as f64).collect();
    scalar_stats(&sizes)
}

/// Arity statistics, each divided by the number of constraints.
pub fn constraint_arity_stats(instance: &CspInstance) -> Option<ScalarStats> {
    let cons = instance.constraints();
    let arities: Vec<f64> = cons.iter().map(|c| c.arity() as f64).collect();
    scalar_stats(&arities).map(|s| s.scaled(cons.len() as f64))
}

/// Proportion of constraint pairs whose scopes share at least two variables.
pub fn multiple_shared_variables(instance: &CspInstance) -> f64 {
    let cons = instance.constraints();
    if cons.len() < 2 {
        return 0.0;
    }
    let scopes: Vec<HashSet<usize>> = cons.iter().map(|c| c.scope.iter().copied().collect()).collect();
    let mut shared = 0usize;
    let mut pairs = 0usize;
    for i in 0..scopes.len() {
        for j in i + 1..scopes.len() {
            pairs += 1;
            if scopes[i].intersection(&scopes[j]).take(2).count() >= 2 {
                shared += 1;
            }
        }
    }
    shared as f64 / pairs as f64
}

/// Mean number of constraints per variable, divided by the number of constraints.
pub fn norm_mean_constraints_per_variable(instance: &CspInstance) -> f64 {
    let n = instance.num_variables();
    let m = instance.constraints().len();
    if n == 0 || m == 0 {
        return 0.0;
    }
    let total: usize = instance.constraints().iter().map(Constraint::arity).sum();
    (total as f64 / n as f64) / m as f64
}

/// Auxiliary over non-auxiliary variables, the denominator floored at 1.
pub fn aux_ratio(instance: &CspInstance) -> f64 {
    let aux = instance.variables().iter().filter(|v| v.auxiliary).count();
    let other = instance.num_variables() - aux;
    aux as f64 / other.max(1) as f64
}

/// Sampled fraction of domain tuples the constraint rejects. Constraint `index`
/// selects an independent stream of the seeded generator.
pub fn estimate_tightness(instance: &CspInstance, index: usize, seed: u64) -> f64 {
    let c = &instance.constraints()[index];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let domains: Vec<&[i64]> = c
        .scope
        .iter()
        .map(|&v| instance.variables()[v].domain.as_slice())
        .collect();
    let mut tuple = vec![0i64; c.arity()];
    let mut rejected = 0usize;
    for _ in 0..TIGHTNESS_SAMPLES {
        for (slot, dom) in tuple.iter_mut().zip(&domains) {
            *slot = dom[rng.gen_range(0..dom.len())];
        }
        if !c.is_satisfied(&tuple) {
            rejected += 1;
        }
    }
    rejected as f64 / TIGHTNESS_SAMPLES as f64
}

pub fn tightness_stats(instance: &CspInstance, seed: u64) -> Option<ScalarStats> {
    let t: Vec<f64> = (0..instance.constraints().len())
        .map(|i| estimate_tightness(instance, i, seed))
        .collect();
    scalar_stats(&t)
}

/// Per alldifferent: size of the union of scope domains over scope size.
pub fn alldiff_stats(instance: &CspInstance) -> Option<ScalarStats> {
    let ratios: Vec<f64> = instance
        .constraints()
        .iter()
        .filter(|c| c.kind == ConstraintKind::AllDifferent)
        .map(|c| {
            let union: HashSet<i64> = c
                .scope
                .iter()
                .flat_map(|&v| instance.variables()[v].domain.iter().copied())
                .collect();
            union.len() as f64 / c.arity() as f64
        })
        .collect();
    scalar_stats(&ratios)
}

pub fn extract_features(instance: &CspInstance, set: FeatureSet, seed: u64) -> Extraction {
    let start = Instant::now();
    let mut flags = Vec::new();
    if instance.num_variables() < 2 {
        flags.push("single-variable".to_string());
    }
    let g = build_primal_graph(instance);
    let mut values = Vec::with_capacity(set.len());
    values.push(edge_density(&g));
    if set == FeatureSet::Full {
        values.push(clustering_coefficient(&g));
        let d = degree_features(&g);
        values.extend([d.min, d.max, d.mean, d.median, d.stddev]);
        values.push(width_of_ordering(&g));
        values.push(width_of_graph(&g));
    }
    let mut push_stats = |s: Option<ScalarStats>, flag: &str, values: &mut Vec<f64>| {
        let s = match s {
            Some(s) => s,
            None => stats_or_zero(&[], flag, &mut flags),
        };
        values.extend(s.to_array());
    };
    push_stats(domain_size_stats(instance), "no-variables", &mut values);
    push_stats(constraint_arity_stats(instance), "no-constraints", &mut values);
    values.push(multiple_shared_variables(instance));
    values.push(norm_mean_constraints_per_variable(instance));
    values.push(aux_ratio(instance));
    let tightness = tightness_stats(instance, seed);
    push_stats(tightness, "no-constraints-tightness", &mut values);
    values.push(symmetric_variable_proportion(instance));
    push_stats(alldiff_stats(instance), "no-alldiff", &mut values);
    let features = FeatureVector::new(set, seed, values, flags).expect("extracted features are well-formed");
    Extraction {
        features,
        elapsed: start.elapsed(),
    }
}
