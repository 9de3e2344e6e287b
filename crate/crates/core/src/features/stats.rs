use serde::{Deserialize, Serialize};

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl ScalarStats {
    pub fn to_array(self) -> [f64; 6] {
        [self.min, self.q1, self.median, self.q3, self.max, self.mean]
    }

    pub fn scaled(self, by: f64) -> Self {
        ScalarStats {
            min: self.min / by,
            q1: self.q1 / by,
            median: self.median / by,
            q3: self.q3 / by,
            max: self.max / by,
            mean: self.mean / by,
        }
    }
}

/// Quantile by linear interpolation between order statistics, with the
/// rank placed at `q × (n − 1)` (the inclusive method). `sorted` must be
/// non-empty and ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Returns `None` for an empty list.
pub fn scalar_stats(values: &[f64]) -> Option<ScalarStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(ScalarStats {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
    })
}
