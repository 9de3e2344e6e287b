//! Cost-based duplication, stratified folds, and the two-level majority-vote
//! ensemble over the classifiers in [`classifiers`].

pub mod classifiers;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSet, FeatureVector};
use crate::solver::VariantId;

pub use classifiers::{fit, fit_with_k, Algorithm, BaseModel, Params};

pub const MAX_COPIES: u32 = 13;
pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("feature vector has {found} values, model expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("class {class} outside 0..{n_classes}")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("neighbour count must be at least 1")]
    Neighbours,
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split {examples} examples into {k} folds")]
    TooManyFolds { k: usize, examples: usize },
    #[error("training data needs at least one naive-labelled and one gac-labelled example")]
    MissingFamily,
    #[error("features use the {found} set, expected {expected}")]
    FeatureSet { expected: FeatureSet, found: FeatureSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub name: String,
    pub features: FeatureVector,
    pub label: VariantId,
    /// Largest misclassification penalty for this instance, in seconds.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    /// Whether examples were replicated by [`duplicate_by_cost`].
    pub duplicated: bool,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        Dataset {
            examples,
            duplicated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label.index()).collect()
    }

    pub fn stratified_kfold(&self, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, LearnError> {
        stratified_kfold(&self.labels(), k, seed)
    }
}

/// Copies of an example with the given cost: `1 + ceil(log2(cost))`, clamped
/// to `1..=13`.
pub fn copies_for_cost(cost: f64) -> u32 {
    // Also catches NaN.
    if cost.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return 1;
    }
    let c = 1.0 + cost.log2().ceil();
    (c as u32).clamp(1, MAX_COPIES)
}

pub fn duplicate_by_cost(raw: &Dataset) -> Dataset {
    let examples = raw
        .examples
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.clone(), copies_for_cost(e.cost) as usize))
        .collect();
    Dataset {
        examples,
        duplicated: true,
    }
}

/// Splits example indices into `k` folds. Each class is shuffled and dealt
/// round-robin, with the dealing position carried over between classes, so
/// per-class and overall fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, LearnError> {
    if k < 2 {
        return Err(LearnError::TooFewFolds(k));
    }
    if k > labels.len() {
        return Err(LearnError::TooManyFolds {
            k,
            examples: labels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

const LEVEL1_NAIVE: usize = 0;
const LEVEL1_GAC: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub folds: usize,
    pub seed: u64,
    pub feature_set: FeatureSet,
    pub duplicated: bool,
    pub tie_break: String,
    /// Naive (class 0) against GAC (class 1).
    pub level1: Vec<BaseModel>,
    /// Class is the variant index.
    pub level2: Vec<BaseModel>,
    /// Notes such as `level2-empty` or `level1-all-data`.
    pub flags: Vec<String>,
}

pub const TIE_BREAK: &str = "default-first";

fn project(f: &FeatureVector, set: FeatureSet) -> Result<FeatureVector, LearnError> {
    match (f.set(), set) {
        (a, b) if a == b => Ok(f.clone()),
        (FeatureSet::Full, FeatureSet::Cheap) => Ok(f.to_cheap()),
        (found, expected) => Err(LearnError::FeatureSet { expected, found }),
    }
}

fn fit_level(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
    level: &str,
    flags: &mut Vec<String>,
) -> Result<Vec<BaseModel>, LearnError> {
    let folds = if rows.len() >= k {
        stratified_kfold(labels, k, seed)?
    } else {
        flags.push(format!("{level}-all-data"));
        vec![Vec::new(); k]
    };
    let jobs: Vec<(Algorithm, usize)> = Algorithm::ALL
        .iter()
        .flat_map(|&a| (0..k).map(move |f| (a, f)))
        .collect();
    jobs.par_iter()
        .map(|&(alg, fold)| {
            let train: Vec<usize> = if folds[fold].is_empty() && rows.len() < k {
                (0..rows.len()).collect()
            } else {
                (0..rows.len())
                    .filter(|i| folds[fold].binary_search(i).is_err())
                    .collect()
            };
            let r: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_slice()).collect();
            let l: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            fit(alg, &r, &l, n_classes, fold)
        })
        .collect()
}

/// Trains the two-level ensemble: every (algorithm, fold) pair is fitted on
/// the other `k - 1` folds, once for naive-versus-GAC and once for the GAC
/// variant among GAC-labelled examples.
pub fn train_ensemble(
    raw: &Dataset,
    k: usize,
    seed: u64,
    feature_set: FeatureSet,
    duplicate: bool,
) -> Result<EnsembleModel, LearnError> {
    if k < 2 {
        return Err(LearnError::TooFewFolds(k));
    }
    let has_naive = raw.examples.iter().any(|e| e.label.is_naive());
    let has_gac = raw.examples.iter().any(|e| !e.label.is_naive());
    if !has_naive || !has_gac {
        return Err(LearnError::MissingFamily);
    }
    let data = if duplicate { duplicate_by_cost(raw) } else { raw.clone() };
    let rows = data
        .examples
        .iter()
        .map(|e| project(&e.features, feature_set).map(|f| f.values().to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut flags = Vec::new();

    let l1: Vec<usize> = data
        .examples
        .iter()
        .map(|e| if e.label.is_naive() { LEVEL1_NAIVE } else { LEVEL1_GAC })
        .collect();
    let level1 = fit_level(&rows, &l1, 2, k, seed, "level1", &mut flags)?;

    let gac: Vec<usize> = (0..data.len())
        .filter(|&i| !data.examples[i].label.is_naive())
        .collect();
    let rows2: Vec<Vec<f64>> = gac.iter().map(|&i| rows[i].clone()).collect();
    let l2: Vec<usize> = gac.iter().map(|&i| data.examples[i].label.index()).collect();
    let level2 = fit_level(&rows2, &l2, VariantId::COUNT, k, seed, "level2", &mut flags)?;

    Ok(EnsembleModel {
        folds: k,
        seed,
        feature_set,
        duplicated: duplicate,
        tie_break: TIE_BREAK.to_string(),
        level1,
        level2,
        flags,
    })
}

/// Level-2 winner from per-variant vote counts: most votes, then the default
/// variant, then variant order.
fn level2_winner(votes: &[usize; VariantId::COUNT]) -> VariantId {
    let top = votes.iter().copied().max().unwrap_or(0);
    if top == 0 || votes[VariantId::DEFAULT.index()] == top {
        return VariantId::DEFAULT;
    }
    let i = votes.iter().position(|&v| v == top).expect("max exists");
    VariantId::from_index(i).expect("vote index is a variant")
}

impl EnsembleModel {
    fn vote<'a>(
        &self,
        f: &FeatureVector,
        level1: impl Iterator<Item = &'a BaseModel>,
        level2: impl Iterator<Item = &'a BaseModel>,
    ) -> Result<VariantId, LearnError> {
        let f = project(f, self.feature_set)?;
        let x = f.values();
        let (mut naive, mut gac) = (0usize, 0usize);
        for m in level1 {
            if m.predict(x)? == LEVEL1_NAIVE {
                naive += 1;
            } else {
                gac += 1;
            }
        }
        if naive > gac {
            return Ok(VariantId::Naive);
        }
        let mut votes = [0usize; VariantId::COUNT];
        for m in level2 {
            votes[m.predict(x)?] += 1;
        }
        Ok(level2_winner(&votes))
    }

    /// Majority vote over all models. Ties favour the GAC family at the first
    /// level and the default variant at the second.
    pub fn select_variant(&self, f: &FeatureVector) -> Result<VariantId, LearnError> {
        self.vote(f, self.level1.iter(), self.level2.iter())
    }

    /// As [`select_variant`](Self::select_variant), using only the models of
    /// one algorithm.
    pub fn select_with(&self, algorithm: Algorithm, f: &FeatureVector) -> Result<VariantId, LearnError> {
        self.vote(
            f,
            self.level1.iter().filter(|m| m.algorithm() == algorithm),
            self.level2.iter().filter(|m| m.algorithm() == algorithm),
        )
    }
}
