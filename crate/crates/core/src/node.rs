//! The sample set reaching a tree node.

use crate::data::{EncodedMatrix, Targets};
use crate::impurity::{Criterion, TargetStats};

/// Targets aligned with [`NodeData::rows`].
#[derive(Debug, Clone, PartialEq)]
pub enum NodeTargets {
    Class { labels: Vec<usize>, n_classes: usize },
    Real(Vec<f64>),
}

impl NodeTargets {
    pub fn len(&self) -> usize {
        match self {
            NodeTargets::Class { labels, .. } => labels.len(),
            NodeTargets::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, pos: &[usize]) -> NodeTargets {
        match self {
            NodeTargets::Class { labels, n_classes } => NodeTargets::Class {
                labels: pos.iter().map(|&p| labels[p]).collect(),
                n_classes: *n_classes,
            },
            NodeTargets::Real(v) => NodeTargets::Real(pos.iter().map(|&p| v[p]).collect()),
        }
    }
}

/// Rows of an encoded matrix that reach a node, with their targets and
/// integer multiplicities. Positions `0..len()` index into all three.
#[derive(Debug, Clone)]
pub struct NodeData<'a> {
    pub matrix: &'a EncodedMatrix,
    pub rows: Vec<usize>,
    pub targets: NodeTargets,
    pub weights: Vec<u32>,
}

impl<'a> NodeData<'a> {
    pub fn new(matrix: &'a EncodedMatrix, rows: Vec<usize>, targets: NodeTargets, weights: Option<Vec<u32>>) -> Self {
        assert_eq!(rows.len(), targets.len(), "rows and targets must align");
        let weights = weights.unwrap_or_else(|| vec![1; rows.len()]);
        assert_eq!(weights.len(), rows.len(), "rows and weights must align");
        NodeData { matrix, rows, targets, weights }
    }

    /// Every row of `matrix` with its dataset target.
    pub fn root(matrix: &'a EncodedMatrix, targets: &Targets) -> Self {
        let t = match targets {
            Targets::Classes { labels, names } => NodeTargets::Class { labels: labels.clone(), n_classes: names.len() },
            Targets::Real(v) => NodeTargets::Real(v.clone()),
        };
        Self::new(matrix, (0..matrix.n_rows()).collect(), t, None)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().map(|&w| w as u64).sum()
    }

    #[inline]
    pub fn value(&self, pos: usize, column: usize) -> f64 {
        self.matrix.value(self.rows[pos], column)
    }

    pub fn empty_stats(&self) -> TargetStats {
        match &self.targets {
            NodeTargets::Class { n_classes, .. } => TargetStats::empty_class(*n_classes),
            NodeTargets::Real(_) => TargetStats::empty_real(),
        }
    }

    #[inline]
    pub fn add_to(&self, s: &mut TargetStats, pos: usize) {
        let w = self.weights[pos] as u64;
        match &self.targets {
            NodeTargets::Class { labels, .. } => s.push_class(labels[pos], w),
            NodeTargets::Real(v) => s.push_real(v[pos], w),
        }
    }

    #[inline]
    pub fn remove_from(&self, s: &mut TargetStats, pos: usize) {
        let w = self.weights[pos] as u64;
        match &self.targets {
            NodeTargets::Class { labels, .. } => s.pop_class(labels[pos], w),
            NodeTargets::Real(v) => s.pop_real(v[pos], w),
        }
    }

    pub fn stats(&self) -> TargetStats {
        let mut s = self.empty_stats();
        for p in 0..self.len() {
            self.add_to(&mut s, p);
        }
        s
    }

    pub fn stats_of(&self, positions: &[usize]) -> TargetStats {
        let mut s = self.empty_stats();
        for &p in positions {
            self.add_to(&mut s, p);
        }
        s
    }

    /// Weighted impurity `W·H` of the whole node.
    pub fn cost(&self, c: Criterion) -> f64 {
        self.stats().weighted_impurity(c)
    }

    pub fn subset(&self, positions: &[usize]) -> NodeData<'a> {
        NodeData {
            matrix: self.matrix,
            rows: positions.iter().map(|&p| self.rows[p]).collect(),
            targets: self.targets.select(positions),
            weights: positions.iter().map(|&p| self.weights[p]).collect(),
        }
    }

    /// True when every sample carries the same target.
    pub fn is_pure(&self) -> bool {
        match &self.targets {
            NodeTargets::Class { labels, .. } => labels.windows(2).all(|w| w[0] == w[1]),
            NodeTargets::Real(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Per-branch weighted impurity of a labelling of positions into
    /// `arity` branches.
    pub fn partition_cost(&self, branch_of: &[usize], arity: usize, c: Criterion) -> f64 {
        let mut parts = vec![self.empty_stats(); arity];
        for (p, &b) in branch_of.iter().enumerate() {
            self.add_to(&mut parts[b], p);
        }
        parts.iter().map(|s| s.weighted_impurity(c)).sum()
    }
}
