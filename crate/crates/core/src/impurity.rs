//! Impurity criteria and target sufficient statistics.
//!
//! All partition objectives in this crate are *weighted* impurities: a part
//! with weight `W` and impurity `H` contributes `W * H`, and the objective of
//! a partition is the plain sum over its parts (no normalisation by the total
//! weight).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which two objectives are considered tied.
pub const TIE_EPS: f64 = 1e-12;

/// Returns true when `candidate` beats `incumbent` by more than the tie
/// tolerance, scaled by `scale` (typically the node weight).
#[inline]
pub fn strictly_better(candidate: f64, incumbent: f64, scale: f64) -> bool {
    candidate < incumbent - TIE_EPS * scale.max(1.0)
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("impurity of empty target statistics is undefined")]
    Empty,
    #[error("criterion {criterion:?} cannot be applied to {kind} statistics")]
    CriterionMismatch { criterion: Criterion, kind: &'static str },
    #[error("statistics have incompatible shapes")]
    ShapeMismatch,
    #[error("removal would produce negative counts")]
    NegativeCount,
}

/// Splitting criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
    Mse,
}

impl Criterion {
    pub fn is_regression(self) -> bool {
        matches!(self, Criterion::Mse)
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::Mse => "mse",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            "mse" | "squared_error" => Ok(Criterion::Mse),
            other => Err(format!("unknown criterion '{other}'")),
        }
    }
}

/// Sufficient statistics of a multiset of targets.
///
/// Classification keeps exact integer class counts; regression keeps the
/// count, sum and sum of squares. Sample multiplicities are integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetStats {
    Class { counts: Vec<u64>, weight: u64 },
    Real { count: u64, sum: f64, sum_sq: f64 },
}

impl TargetStats {
    pub fn empty_class(n_classes: usize) -> Self {
        TargetStats::Class { counts: vec![0; n_classes], weight: 0 }
    }

    pub fn empty_real() -> Self {
        TargetStats::Real { count: 0, sum: 0.0, sum_sq: 0.0 }
    }

    /// An empty value of the same shape as `self`.
    pub fn empty_like(&self) -> Self {
        match self {
            TargetStats::Class { counts, .. } => Self::empty_class(counts.len()),
            TargetStats::Real { .. } => Self::empty_real(),
        }
    }

    pub fn from_classes(labels: &[usize], n_classes: usize) -> Self {
        let mut s = Self::empty_class(n_classes);
        for &l in labels {
            s.push_class(l, 1);
        }
        s
    }

    pub fn from_reals(ys: &[f64]) -> Self {
        let mut s = Self::empty_real();
        for &y in ys {
            s.push_real(y, 1);
        }
        s
    }

    #[inline]
    pub fn push_class(&mut self, label: usize, mult: u64) {
        if let TargetStats::Class { counts, weight } = self {
            counts[label] += mult;
            *weight += mult;
        } else {
            panic!("push_class on regression statistics");
        }
    }

    #[inline]
    pub fn pop_class(&mut self, label: usize, mult: u64) {
        if let TargetStats::Class { counts, weight } = self {
            counts[label] -= mult;
            *weight -= mult;
        } else {
            panic!("pop_class on regression statistics");
        }
    }

    #[inline]
    pub fn push_real(&mut self, y: f64, mult: u64) {
        if let TargetStats::Real { count, sum, sum_sq } = self {
            let m = mult as f64;
            *count += mult;
            *sum += m * y;
            *sum_sq += m * y * y;
        } else {
            panic!("push_real on classification statistics");
        }
    }

    #[inline]
    pub fn pop_real(&mut self, y: f64, mult: u64) {
        if let TargetStats::Real { count, sum, sum_sq } = self {
            let m = mult as f64;
            *count -= mult;
            *sum -= m * y;
            *sum_sq -= m * y * y;
        } else {
            panic!("pop_real on classification statistics");
        }
    }

    /// Total sample weight `W`.
    #[inline]
    pub fn weight(&self) -> u64 {
        match self {
            TargetStats::Class { weight, .. } => *weight,
            TargetStats::Real { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weight() == 0
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            TargetStats::Class { counts, .. } => Some(counts.len()),
            TargetStats::Real { .. } => None,
        }
    }

    /// Normalised class distribution `π` (classification) or `[mean]`
    /// (regression). Empty statistics give a zero vector.
    pub fn distribution(&self) -> Vec<f64> {
        match self {
            TargetStats::Class { counts, weight } => {
                if *weight == 0 {
                    vec![0.0; counts.len()]
                } else {
                    let w = *weight as f64;
                    counts.iter().map(|&c| c as f64 / w).collect()
                }
            }
            TargetStats::Real { .. } => vec![self.mean()],
        }
    }

    /// Mean target (regression), or 0 for empty / classification stats.
    pub fn mean(&self) -> f64 {
        match self {
            TargetStats::Real { count, sum, .. } if *count > 0 => sum / *count as f64,
            _ => 0.0,
        }
    }

    /// Majority class, ties to the lowest class id.
    pub fn majority(&self) -> Option<usize> {
        match self {
            TargetStats::Class { counts, weight } if *weight > 0 => {
                let mut best = 0;
                for (i, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = i;
                    }
                }
                Some(best)
            }
            _ => None,
        }
    }

    fn check_shape(&self, other: &Self) -> Result<(), StatsError> {
        match (self, other) {
            (TargetStats::Class { counts: a, .. }, TargetStats::Class { counts: b, .. })
                if a.len() == b.len() =>
            {
                Ok(())
            }
            (TargetStats::Real { .. }, TargetStats::Real { .. }) => Ok(()),
            _ => Err(StatsError::ShapeMismatch),
        }
    }

    /// In-place merge of `delta` into `self`.
    pub fn merge_in(&mut self, delta: &Self) -> Result<(), StatsError> {
        self.check_shape(delta)?;
        match (self, delta) {
            (TargetStats::Class { counts, weight }, TargetStats::Class { counts: d, weight: dw }) => {
                for (c, x) in counts.iter_mut().zip(d) {
                    *c += x;
                }
                *weight += dw;
            }
            (
                TargetStats::Real { count, sum, sum_sq },
                TargetStats::Real { count: dc, sum: ds, sum_sq: dss },
            ) => {
                *count += dc;
                *sum += ds;
                *sum_sq += dss;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// In-place removal of a previously merged `delta`.
    pub fn remove_in(&mut self, delta: &Self) -> Result<(), StatsError> {
        self.check_shape(delta)?;
        match (self, delta) {
            (TargetStats::Class { counts, weight }, TargetStats::Class { counts: d, weight: dw }) => {
                if *dw > *weight || counts.iter().zip(d).any(|(c, x)| x > c) {
                    return Err(StatsError::NegativeCount);
                }
                for (c, x) in counts.iter_mut().zip(d) {
                    *c -= x;
                }
                *weight -= dw;
            }
            (
                TargetStats::Real { count, sum, sum_sq },
                TargetStats::Real { count: dc, sum: ds, sum_sq: dss },
            ) => {
                if dc > count {
                    return Err(StatsError::NegativeCount);
                }
                *count -= dc;
                if *count == 0 {
                    *sum = 0.0;
                    *sum_sq = 0.0;
                } else {
                    *sum -= ds;
                    *sum_sq -= dss;
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn merge(&self, delta: &Self) -> Result<Self, StatsError> {
        let mut out = self.clone();
        out.merge_in(delta)?;
        Ok(out)
    }

    pub fn remove(&self, delta: &Self) -> Result<Self, StatsError> {
        let mut out = self.clone();
        out.remove_in(delta)?;
        Ok(out)
    }

    /// `W * H(self)`; zero for empty statistics. The caller guarantees the
    /// criterion matches the statistics kind.
    #[inline]
    pub fn weighted_impurity(&self, c: Criterion) -> f64 {
        match self {
            TargetStats::Class { counts, weight } => class_cost(counts.iter().copied(), *weight, c),
            TargetStats::Real { count, sum, sum_sq } => real_cost(*count, *sum, *sum_sq),
        }
    }

    /// `W * H(self ⊎ other)` without materialising the union.
    #[inline]
    pub fn weighted_impurity_with(&self, other: &Self, c: Criterion) -> f64 {
        match (self, other) {
            (TargetStats::Class { counts: a, weight: wa }, TargetStats::Class { counts: b, weight: wb }) => {
                class_cost(a.iter().zip(b).map(|(x, y)| x + y), wa + wb, c)
            }
            (
                TargetStats::Real { count: ca, sum: sa, sum_sq: qa },
                TargetStats::Real { count: cb, sum: sb, sum_sq: qb },
            ) => real_cost(ca + cb, sa + sb, qa + qb),
            _ => panic!("mixed statistics kinds"),
        }
    }
}

#[inline]
fn class_cost(counts: impl Iterator<Item = u64>, weight: u64, c: Criterion) -> f64 {
    if weight == 0 {
        return 0.0;
    }
    let w = weight as f64;
    match c {
        Criterion::Gini => {
            let sq: f64 = counts.map(|k| (k as f64) * (k as f64)).sum();
            (w - sq / w).max(0.0)
        }
        Criterion::Entropy => counts
            .filter(|&k| k > 0)
            .map(|k| {
                let k = k as f64;
                k * (w / k).log2()
            })
            .sum(),
        Criterion::Mse => panic!("mse criterion on class statistics"),
    }
}

#[inline]
fn real_cost(count: u64, sum: f64, sum_sq: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (sum_sq - sum * sum / count as f64).max(0.0)
}

/// Per-sample impurity `H(Π(s))` of non-empty statistics.
///
/// Gini is `1 - Σ p²`, entropy is `-Σ p log₂ p` and mse is the per-sample
/// variance.
pub fn impurity(s: &TargetStats, c: Criterion) -> Result<f64, StatsError> {
    check_criterion(s, c)?;
    if s.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(s.weighted_impurity(c) / s.weight() as f64)
}

/// Weighted impurity `Σ W·H` of a partition. Zero-weight parts contribute 0.
pub fn weighted_impurity<'a, I>(parts: I, c: Criterion) -> f64
where
    I: IntoIterator<Item = &'a TargetStats>,
{
    parts.into_iter().map(|s| s.weighted_impurity(c)).sum()
}

pub fn check_criterion(s: &TargetStats, c: Criterion) -> Result<(), StatsError> {
    match (s, c) {
        (TargetStats::Class { .. }, Criterion::Mse) => {
            Err(StatsError::CriterionMismatch { criterion: c, kind: "classification" })
        }
        (TargetStats::Real { .. }, Criterion::Gini | Criterion::Entropy) => {
            Err(StatsError::CriterionMismatch { criterion: c, kind: "regression" })
        }
        _ => Ok(()),
    }
}
