//! Fitted trees: routing, prediction, summary statistics, persistence and
//! graph export.

mod dot;
mod format;

pub use dot::{interval_segments, sig4, to_dot};
pub use format::{FORMAT_NAME, FORMAT_VERSION};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{one_hot_view, Dataset, FeatureRow, FeatureSchema, Task, Targets};
use crate::impurity::TargetStats;
use crate::split::{ShapeFeatures, ShapeFunction};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("not an {expected} document (format '{found}')")]
    Format { expected: &'static str, found: String },
    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("dataset does not match the model schema: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// How an internal node routes a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Split {
    /// `x[column] ≤ threshold` → branch 0, else branch 1.
    Threshold { column: usize, threshold: f64 },
    Shape(ShapeFunction),
}

impl Split {
    #[inline]
    pub fn branch<R: FeatureRow + ?Sized>(&self, x: &R) -> usize {
        match self {
            Split::Threshold { column, threshold } => usize::from(x.at(*column) > *threshold),
            Split::Shape(f) => f.branch(x),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Split::Threshold { .. } => 2,
            Split::Shape(f) => f.arity,
        }
    }
}

/// Leaf prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LeafValue {
    Class { label: usize, distribution: Vec<f64> },
    Real { mean: f64 },
}

impl LeafValue {
    /// Majority class (lowest id on ties) with its distribution, or the
    /// mean. Empty statistics give class 0 / mean 0.
    pub fn from_stats(s: &TargetStats) -> Self {
        match s {
            TargetStats::Class { counts, .. } => {
                LeafValue::Class { label: s.majority().unwrap_or(0), distribution: if s.is_empty() { vec![0.0; counts.len()] } else { s.distribution() } }
            }
            TargetStats::Real { .. } => LeafValue::Real { mean: if s.is_empty() { 0.0 } else { s.mean() } },
        }
    }

    pub fn label(&self) -> Option<usize> {
        match self {
            LeafValue::Class { label, .. } => Some(*label),
            LeafValue::Real { .. } => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            LeafValue::Class { label, .. } => *label as f64,
            LeafValue::Real { mean } => *mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Internal {
        split: Split,
        children: Vec<usize>,
        depth: usize,
        /// Training samples that reached the node.
        support: u64,
        /// Feature pairs fitted bivariately here during induction.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        candidate_pairs: Vec<(usize, usize)>,
    },
    Leaf {
        value: LeafValue,
        depth: usize,
        support: u64,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Internal { depth, .. } | Node::Leaf { depth, .. } => *depth,
        }
    }

    pub fn support(&self) -> u64 {
        match self {
            Node::Internal { support, .. } | Node::Leaf { support, .. } => *support,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Predictions for a batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Classes(Vec<usize>),
    Real(Vec<f64>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Classes(v) => v.len(),
            Predictions::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A shape generalized tree. Node 0 is the root; children always have
/// larger ids than their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct SgtModel {
    schema: FeatureSchema,
    task: Task,
    class_names: Vec<String>,
    target_name: String,
    max_arity: usize,
    nodes: Vec<Node>,
}

/// Size and shape summary of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelStats {
    pub internal_nodes: usize,
    pub leaves: usize,
    pub max_depth: usize,
    /// Arity → number of internal nodes with that arity.
    pub arity_histogram: BTreeMap<usize, usize>,
    /// Original feature indices read by any internal node.
    pub features_used: Vec<usize>,
    pub threshold_nodes: usize,
    pub univariate_nodes: usize,
    pub bivariate_nodes: usize,
}

impl SgtModel {
    pub fn new(
        schema: FeatureSchema,
        task: Task,
        class_names: Vec<String>,
        target_name: impl Into<String>,
        max_arity: usize,
        nodes: Vec<Node>,
    ) -> Result<Self, ModelError> {
        let m = SgtModel { schema, task, class_names, target_name: target_name.into(), max_arity, nodes };
        m.validate()?;
        Ok(m)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Checks structural invariants: a single rooted tree in id order,
    /// consistent arities, depths and in-range feature references.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        if self.max_arity < 2 {
            return bad(format!("max arity {} below 2", self.max_arity));
        }
        match self.task {
            Task::Classification if self.class_names.is_empty() => return bad("no class names".into()),
            Task::Regression if !self.class_names.is_empty() => return bad("class names on a regression model".into()),
            _ => {}
        }
        let width = self.schema.encoded_width();
        let groups = self.schema.groups();
        let mut parent = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Internal { split, children, depth, candidate_pairs, .. } => {
                    if children.len() != split.arity() {
                        return bad(format!("node {i}: {} children for arity {}", children.len(), split.arity()));
                    }
                    if split.arity() > self.max_arity {
                        return bad(format!("node {i}: arity {} exceeds {}", split.arity(), self.max_arity));
                    }
                    for &c in children {
                        if c <= i || c >= self.nodes.len() {
                            return bad(format!("node {i}: child id {c} out of order"));
                        }
                        if parent[c].replace(i).is_some() {
                            return bad(format!("node {c} has two parents"));
                        }
                        if self.nodes[c].depth() != depth + 1 {
                            return bad(format!("node {c}: depth inconsistent with parent"));
                        }
                    }
                    match split {
                        Split::Threshold { column, threshold } => {
                            if *column >= width || !threshold.is_finite() {
                                return bad(format!("node {i}: bad threshold split"));
                            }
                        }
                        Split::Shape(f) => {
                            f.validate().map_err(|e| ModelError::Invalid(format!("node {i}: {e}")))?;
                            let allowed: Vec<usize> = f
                                .features
                                .features()
                                .iter()
                                .map(|&g| groups.get(g).map(|g| g.columns.clone()))
                                .collect::<Option<Vec<_>>>()
                                .ok_or_else(|| ModelError::Invalid(format!("node {i}: unknown feature")))?
                                .into_iter()
                                .flatten()
                                .collect();
                            if let ShapeFeatures::Bivariate { first, second } = f.features {
                                if !(groups[first].numeric && groups[second].numeric) || first == second {
                                    return bad(format!("node {i}: bivariate split needs two numeric features"));
                                }
                            }
                            if f.tree.nodes().iter().any(|n| match n {
                                crate::inner_tree::InnerNode::Split { projection, threshold, .. } => {
                                    !threshold.is_finite() || !projection_columns(projection).iter().all(|c| allowed.contains(c))
                                }
                                _ => false,
                            }) {
                                return bad(format!("node {i}: binning tree reads foreign columns"));
                            }
                        }
                    }
                    if candidate_pairs.iter().any(|&(a, b)| a >= groups.len() || b >= groups.len()) {
                        return bad(format!("node {i}: candidate pair out of range"));
                    }
                }
                Node::Leaf { value, .. } => match (value, self.task) {
                    (LeafValue::Class { label, distribution }, Task::Classification) => {
                        if *label >= self.class_names.len() || distribution.len() != self.class_names.len() {
                            return bad(format!("node {i}: leaf class out of range"));
                        }
                    }
                    (LeafValue::Real { mean }, Task::Regression) if mean.is_finite() => {}
                    _ => return bad(format!("node {i}: leaf does not match task")),
                },
            }
        }
        if self.nodes[0].depth() != 0 {
            return bad("root depth must be 0".into());
        }
        if let Some(orphan) = (1..self.nodes.len()).find(|&i| parent[i].is_none()) {
            return bad(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }

    /// Id of the leaf reached by an encoded row.
    pub fn leaf_of<R: FeatureRow + ?Sized>(&self, x: &R) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Internal { split, children, .. } => i = children[split.branch(x)],
            }
        }
    }

    pub fn predict_row<R: FeatureRow + ?Sized>(&self, x: &R) -> &LeafValue {
        match &self.nodes[self.leaf_of(x)] {
            Node::Leaf { value, .. } => value,
            Node::Internal { .. } => unreachable!(),
        }
    }

    /// Predictions for every row of a schema-conforming dataset.
    pub fn predict(&self, ds: &Dataset) -> Result<Predictions, ModelError> {
        self.check_schema(ds)?;
        let m = one_hot_view(ds);
        let values = (0..m.n_rows()).map(|r| self.predict_row(&m.row_view(r)));
        Ok(match self.task {
            Task::Classification => Predictions::Classes(values.map(|v| v.label().unwrap()).collect()),
            Task::Regression => Predictions::Real(values.map(LeafValue::as_f64).collect()),
        })
    }

    fn check_schema(&self, ds: &Dataset) -> Result<(), ModelError> {
        if ds.schema() != &self.schema {
            return Err(ModelError::Schema("feature schema differs".into()));
        }
        Ok(())
    }

    /// Re-indexes a dataset's class labels into this model's class order.
    pub fn align_classes(&self, ds: &Dataset) -> Result<Dataset, ModelError> {
        match (self.task, ds.task()) {
            (Task::Classification, Task::Classification) => {
                ds.with_class_names(&self.class_names).map_err(|e| ModelError::Schema(e.to_string()))
            }
            (Task::Regression, Task::Regression) => Ok(ds.clone()),
            _ => Err(ModelError::Schema("task differs".into())),
        }
    }

    /// Fraction of correctly classified rows.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64, ModelError> {
        let ds = self.align_classes(ds)?;
        let (Predictions::Classes(pred), Targets::Classes { labels, .. }) = (self.predict(&ds)?, ds.targets()) else {
            return Err(ModelError::Schema("accuracy needs a classification model".into()));
        };
        Ok(pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64)
    }

    /// Mean squared error on a regression dataset.
    pub fn mse(&self, ds: &Dataset) -> Result<f64, ModelError> {
        let (Predictions::Real(pred), Targets::Real(ys)) = (self.predict(ds)?, ds.targets()) else {
            return Err(ModelError::Schema("mse needs a regression model".into()));
        };
        Ok(pred.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ys.len() as f64)
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            internal_nodes: 0,
            leaves: 0,
            max_depth: 0,
            arity_histogram: BTreeMap::new(),
            features_used: Vec::new(),
            threshold_nodes: 0,
            univariate_nodes: 0,
            bivariate_nodes: 0,
        };
        let groups = self.schema.groups();
        let mut used = BTreeSet::new();
        for n in &self.nodes {
            s.max_depth = s.max_depth.max(n.depth());
            match n {
                Node::Leaf { .. } => s.leaves += 1,
                Node::Internal { split, .. } => {
                    s.internal_nodes += 1;
                    *s.arity_histogram.entry(split.arity()).or_default() += 1;
                    match split {
                        Split::Threshold { column, .. } => {
                            s.threshold_nodes += 1;
                            used.extend(groups.iter().filter(|g| g.columns.contains(column)).map(|g| g.feature));
                        }
                        Split::Shape(f) => {
                            if f.features.is_bivariate() {
                                s.bivariate_nodes += 1;
                            } else {
                                s.univariate_nodes += 1;
                            }
                            used.extend(f.features.features());
                        }
                    }
                }
            }
        }
        s.features_used = used.into_iter().collect();
        s
    }
}

fn projection_columns(p: &crate::inner_tree::Projection) -> Vec<usize> {
    match *p {
        crate::inner_tree::Projection::Column { column } => vec![column],
        crate::inner_tree::Projection::Rotated { first, second, .. } => vec![first, second],
    }
}

impl ModelStats {
    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let hist: Vec<String> = self.arity_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let feats: Vec<String> = self.features_used.iter().map(usize::to_string).collect();
        format!(
            "internal_nodes={}\nleaves={}\nmax_depth={}\narity_histogram={}\nfeatures_used={}\nthreshold_nodes={}\nunivariate_nodes={}\nbivariate_nodes={}\n",
            self.internal_nodes,
            self.leaves,
            self.max_depth,
            hist.join(","),
            feats.join(","),
            self.threshold_nodes,
            self.univariate_nodes,
            self.bivariate_nodes
        )
    }
}
