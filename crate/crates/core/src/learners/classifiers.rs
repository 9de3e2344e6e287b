//! Five small classifiers over dense feature rows. Classes are `usize`
//! indices; every tie resolves to the smallest index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LearnError;

pub const KNN_NEIGHBOURS: usize = 5;
pub const VARIANCE_FLOOR: f64 = 1e-9;
pub const ONE_RULE_BINS: usize = 10;
pub const MIN_LEAF_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MajorityClass,
    OneRule,
    NaiveBayes,
    KNearest,
    DecisionTree,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::MajorityClass,
        Algorithm::OneRule,
        Algorithm::NaiveBayes,
        Algorithm::KNearest,
        Algorithm::DecisionTree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::MajorityClass => "majority-class",
            Algorithm::OneRule => "one-rule",
            Algorithm::NaiveBayes => "naive-bayes",
            Algorithm::KNearest => "k-nearest",
            Algorithm::DecisionTree => "decision-tree",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Index of the largest count; ties go to the smallest index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneRuleParams {
    pub feature: usize,
    pub min: f64,
    pub width: f64,
    pub bins: Vec<usize>,
}

impl OneRuleParams {
    fn bin(min: f64, width: f64, x: f64) -> usize {
        if width <= 0.0 {
            return 0;
        }
        (((x - min) / width).floor().max(0.0) as usize).min(ONE_RULE_BINS - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub class: usize,
    pub log_prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNearestParams {
    pub k: usize,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl KNearestParams {
    fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Learned parameters, one variant per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum Params {
    MajorityClass { class: usize },
    OneRule(OneRuleParams),
    NaiveBayes { classes: Vec<GaussianClass> },
    KNearest(KNearestParams),
    DecisionTree { root: TreeNode },
}

/// A fitted classifier together with the fold it was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModel {
    pub fold: usize,
    pub dim: usize,
    pub params: Params,
}

impl BaseModel {
    pub fn algorithm(&self) -> Algorithm {
        match self.params {
            Params::MajorityClass { .. } => Algorithm::MajorityClass,
            Params::OneRule(_) => Algorithm::OneRule,
            Params::NaiveBayes { .. } => Algorithm::NaiveBayes,
            Params::KNearest(_) => Algorithm::KNearest,
            Params::DecisionTree { .. } => Algorithm::DecisionTree,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, LearnError> {
        if x.len() != self.dim {
            return Err(LearnError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(match &self.params {
            Params::MajorityClass { class } => *class,
            Params::OneRule(p) => p.bins[OneRuleParams::bin(p.min, p.width, x[p.feature])],
            Params::NaiveBayes { classes } => predict_bayes(classes, x),
            Params::KNearest(p) => predict_knn(p, x),
            Params::DecisionTree { root } => {
                let mut node = root;
                loop {
                    match node {
                        TreeNode::Leaf { class } => break *class,
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => node = if x[*feature] <= *threshold { left } else { right },
                    }
                }
            }
        })
    }
}

/// Fits `algorithm` on `rows` with class indices in `0..n_classes`.
pub fn fit(
    algorithm: Algorithm,
    rows: &[&[f64]],
    labels: &[usize],
    n_classes: usize,
    fold: usize,
) -> Result<BaseModel, LearnError> {
    fit_with_k(algorithm, rows, labels, n_classes, fold, KNN_NEIGHBOURS)
}

/// As [`fit`], with an explicit neighbour count for [`Algorithm::KNearest`].
pub fn fit_with_k(
    algorithm: Algorithm,
    rows: &[&[f64]],
    labels: &[usize],
    n_classes: usize,
    fold: usize,
    k: usize,
) -> Result<BaseModel, LearnError> {
    if rows.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(LearnError::LabelCount {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(LearnError::Dimension {
            expected: dim,
            found: r.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(LearnError::ClassOutOfRange { class: l, n_classes });
    }
    if k == 0 {
        return Err(LearnError::Neighbours);
    }
    let params = match algorithm {
        Algorithm::MajorityClass => Params::MajorityClass {
            class: argmax_count(&class_counts(labels, n_classes)),
        },
        Algorithm::OneRule => Params::OneRule(fit_one_rule(rows, labels, n_classes, dim)),
        Algorithm::NaiveBayes => Params::NaiveBayes {
            classes: fit_bayes(rows, labels, n_classes, dim),
        },
        Algorithm::KNearest => Params::KNearest(fit_knn(rows, labels, dim, k)),
        Algorithm::DecisionTree => {
            let idx: Vec<usize> = (0..rows.len()).collect();
            Params::DecisionTree {
                root: grow(rows, labels, n_classes, idx),
            }
        }
    };
    Ok(BaseModel { fold, dim, params })
}

fn fit_one_rule(rows: &[&[f64]], labels: &[usize], n_classes: usize, dim: usize) -> OneRuleParams {
    let fallback = argmax_count(&class_counts(labels, n_classes));
    let mut best: Option<(usize, OneRuleParams)> = None;
    for f in 0..dim {
        let (min, max) = rows
            .iter()
            .map(|r| r[f])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let width = (max - min) / ONE_RULE_BINS as f64;
        let mut counts = vec![vec![0usize; n_classes]; ONE_RULE_BINS];
        for (r, &l) in rows.iter().zip(labels) {
            counts[OneRuleParams::bin(min, width, r[f])][l] += 1;
        }
        let mut errors = 0;
        let bins: Vec<usize> = counts
            .iter()
            .map(|c| {
                let total: usize = c.iter().sum();
                if total == 0 {
                    fallback
                } else {
                    let b = argmax_count(c);
                    errors += total - c[b];
                    b
                }
            })
            .collect();
        if best.as_ref().is_none_or(|(e, _)| errors < *e) {
            best = Some((
                errors,
                OneRuleParams {
                    feature: f,
                    min,
                    width,
                    bins,
                },
            ));
        }
    }
    best.map(|(_, p)| p).unwrap_or(OneRuleParams {
        feature: 0,
        min: 0.0,
        width: 0.0,
        bins: vec![fallback; ONE_RULE_BINS],
    })
}

fn fit_bayes(rows: &[&[f64]], labels: &[usize], n_classes: usize, dim: usize) -> Vec<GaussianClass> {
    let n = rows.len() as f64;
    (0..n_classes)
        .filter_map(|c| {
            let members: Vec<&[f64]> = rows
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| *r)
                .collect();
            if members.is_empty() {
                return None;
            }
            let m = members.len() as f64;
            let means: Vec<f64> = (0..dim)
                .map(|f| members.iter().map(|r| r[f]).sum::<f64>() / m)
                .collect();
            let variances = (0..dim)
                .map(|f| {
                    let v = members.iter().map(|r| (r[f] - means[f]).powi(2)).sum::<f64>() / m;
                    v.max(VARIANCE_FLOOR)
                })
                .collect();
            Some(GaussianClass {
                class: c,
                log_prior: (m / n).ln(),
                means,
                variances,
            })
        })
        .collect()
}

fn predict_bayes(classes: &[GaussianClass], x: &[f64]) -> usize {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for g in classes {
        let ll = g.log_prior
            + x.iter()
                .zip(g.means.iter().zip(&g.variances))
                .map(|(&v, (&mu, &var))| -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - mu).powi(2) / var))
                .sum::<f64>();
        if ll > best.0 || best.1 == usize::MAX {
            best = (ll, g.class);
        }
    }
    best.1
}

fn fit_knn(rows: &[&[f64]], labels: &[usize], dim: usize, k: usize) -> KNearestParams {
    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    for r in rows {
        for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(r.iter()) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    let mut p = KNearestParams {
        k,
        mins,
        maxs,
        points: Vec::new(),
        labels: labels.to_vec(),
    };
    p.points = rows.iter().map(|r| p.scale(r)).collect();
    p
}

fn predict_knn(p: &KNearestParams, x: &[f64]) -> usize {
    let q = p.scale(x);
    let mut dist: Vec<(f64, usize)> = p
        .points
        .iter()
        .enumerate()
        .map(|(i, pt)| (pt.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_classes = p.labels.iter().max().map_or(1, |m| m + 1);
    let mut votes = vec![0usize; n_classes];
    for &(_, i) in dist.iter().take(p.k) {
        votes[p.labels[i]] += 1;
    }
    argmax_count(&votes)
}

fn entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

#[allow(clippy::needless_range_loop)]
fn grow(rows: &[&[f64]], labels: &[usize], n_classes: usize, idx: Vec<usize>) -> TreeNode {
    let counts = {
        let mut c = vec![0usize; n_classes];
        for &i in &idx {
            c[labels[i]] += 1;
        }
        c
    };
    let majority = argmax_count(&counts);
    let n = idx.len();
    if counts[majority] == n || n < 2 * MIN_LEAF_SIZE {
        return TreeNode::Leaf { class: majority };
    }
    let parent = entropy(&counts, n);
    let dim = rows[idx[0]].len();
    // (gain, feature, threshold)
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for f in 0..dim {
        order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let mut left = vec![0usize; n_classes];
        for pos in 0..n - 1 {
            left[labels[order[pos]]] += 1;
            let (lo, hi) = (rows[order[pos]][f], rows[order[pos + 1]][f]);
            let nl = pos + 1;
            if lo == hi || nl < MIN_LEAF_SIZE || n - nl < MIN_LEAF_SIZE {
                continue;
            }
            let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let h = (nl as f64 * entropy(&left, nl) + (n - nl) as f64 * entropy(&right, n - nl)) / n as f64;
            let gain = parent - h;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                best = Some((gain, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return TreeNode::Leaf { class: majority };
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(rows, labels, n_classes, l)),
        right: Box::new(grow(rows, labels, n_classes, r)),
    }
}
