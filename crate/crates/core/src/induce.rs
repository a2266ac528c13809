//! Greedy top-down induction.
//!
//! Nodes are expanded best-first from a priority queue keyed by the
//! impurity improvement of their (precomputed) best split. A popped node
//! becomes a leaf when the improvement is too small, it is at maximum
//! depth, it is too small to split, or a child would be too small.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::AssignParams;
use crate::data::{one_hot_view, Dataset, EncodedMatrix, FeatureGroup, Task};
use crate::impurity::Criterion;
use crate::inner_tree::{bin_univariate, InnerNode, InnerTree, InnerTreeParams};
use crate::mix_seed;
use crate::model::{LeafValue, Node, SgtModel, Split};
use crate::node::NodeData;
use crate::split::{select_split, ShapeFeatures, ShapeFunction, SplitParams};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("empty training set")]
    Empty,
    #[error("criterion {criterion} cannot be used for {task:?}")]
    CriterionMismatch { criterion: &'static str, task: Task },
    #[error("invalid hyperparameter: {0}")]
    Invalid(String),
}

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Axis-aligned threshold splits.
    Cart,
    /// Binary univariate shape functions.
    Sgt,
    /// Up to 3-way univariate shape functions.
    Sgt3,
    /// Binary, with bivariate candidates.
    S2gt,
    /// Up to 3-way, with bivariate candidates.
    S2gt3,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Cart, Variant::Sgt, Variant::Sgt3, Variant::S2gt, Variant::S2gt3];

    /// `(K, P)` for this family; `P` is the default pair limit.
    pub fn arity_and_pairs(self) -> (usize, usize) {
        match self {
            Variant::Cart | Variant::Sgt => (2, 0),
            Variant::Sgt3 => (3, 0),
            Variant::S2gt => (2, 5),
            Variant::S2gt3 => (3, 5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cart => "cart",
            Variant::Sgt => "sgt",
            Variant::Sgt3 => "sgt3",
            Variant::S2gt => "s2gt",
            Variant::S2gt3 => "s2gt3",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant '{s}' (expected cart, sgt, sgt3, s2gt or s2gt3)"))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Induction hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Maximum branching factor `K`.
    pub max_arity: usize,
    /// `usize::MAX` for unbounded depth.
    pub max_depth: usize,
    /// Minimum weighted impurity decrease, divided by the root sample
    /// count, for a split to be kept.
    pub min_impurity_decrease: f64,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    /// Leaf budget `L` of binning trees.
    pub inner_max_leaf_nodes: usize,
    pub inner_min_samples_leaf: f64,
    pub branching_penalty: f64,
    pub pairwise_penalty: f64,
    pub pair_limit: usize,
    pub sweeps: usize,
    pub kmeans_iters: usize,
    pub directions: usize,
    pub seed: u64,
    /// Stop after this many splits (best-first order decides which).
    pub max_internal_nodes: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_arity: 2,
            max_depth: 4,
            min_impurity_decrease: 0.0,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
            inner_max_leaf_nodes: 16,
            inner_min_samples_leaf: 1.0,
            branching_penalty: 0.0,
            pairwise_penalty: 0.0,
            pair_limit: 0,
            sweeps: 10,
            kmeans_iters: 100,
            directions: 8,
            seed: 0,
            max_internal_nodes: None,
        }
    }
}

impl Hyperparams {
    pub const UNLIMITED_DEPTH: usize = usize::MAX;

    /// Defaults with `K` and `P` set for a model family.
    pub fn for_variant(v: Variant) -> Self {
        let (max_arity, pair_limit) = v.arity_and_pairs();
        Hyperparams { max_arity, pair_limit, ..Hyperparams::default() }
    }

    pub fn split_params(&self) -> SplitParams {
        SplitParams {
            max_arity: self.max_arity,
            pair_limit: self.pair_limit,
            pairwise_penalty: self.pairwise_penalty,
            directions: self.directions,
            inner: InnerTreeParams {
                max_leaf_nodes: self.inner_max_leaf_nodes,
                min_samples_leaf: self.inner_min_samples_leaf,
                criterion: self.criterion,
            },
            assign: AssignParams {
                sweeps: self.sweeps,
                kmeans_iters: self.kmeans_iters,
                branching_penalty: self.branching_penalty,
                seed: self.seed,
            },
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::Invalid(m.into()));
        if self.max_arity < 2 {
            return bad("max arity must be at least 2");
        }
        if self.max_depth < 1 {
            return bad("max depth must be at least 1");
        }
        if self.min_samples_split < 2 {
            return bad("min samples split must be at least 2");
        }
        if self.min_samples_leaf < 1 {
            return bad("min samples leaf must be at least 1");
        }
        if self.inner_max_leaf_nodes < 2 {
            return bad("inner max leaf nodes must be at least 2");
        }
        if !(self.inner_min_samples_leaf > 0.0 && (self.inner_min_samples_leaf <= 1.0 || self.inner_min_samples_leaf.fract() == 0.0)) {
            return bad("inner min samples leaf must be a fraction in (0, 1] or a whole count");
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return bad("min impurity decrease must be non-negative");
        }
        if !(self.branching_penalty >= 0.0 && self.pairwise_penalty >= 0.0) {
            return bad("penalties must be non-negative");
        }
        if self.sweeps < 1 || self.kmeans_iters < 1 {
            return bad("sweeps and k-means iterations must be positive");
        }
        if self.pair_limit > 0 && self.directions < 2 {
            return bad("bivariate splits need at least 2 directions");
        }
        Ok(())
    }
}

/// Checks that a criterion suits the task.
pub fn check_task(c: Criterion, task: Task) -> Result<(), FitError> {
    if c.is_regression() != (task == Task::Regression) {
        return Err(FitError::CriterionMismatch { criterion: c.name(), task });
    }
    Ok(())
}

/// A split proposed for a node.
#[derive(Debug, Clone)]
pub(crate) struct Proposal {
    pub split: Split,
    pub penalized: f64,
    pub branch_of: Vec<usize>,
    pub candidate_pairs: Vec<(usize, usize)>,
}

/// Fits a shape generalized tree.
pub fn fit(train: &Dataset, hp: &Hyperparams) -> Result<SgtModel, FitError> {
    let sp = hp.split_params();
    grow(train, hp, &|node: &NodeData, groups: &[FeatureGroup], seed: u64| {
        select_split(node, groups, &sp, seed).map(|r| Proposal {
            split: Split::Shape(r.shape),
            penalized: r.penalized,
            branch_of: r.branch_of,
            candidate_pairs: r.candidate_pairs,
        })
    })
}

/// Fits an axis-aligned CART tree with the same driver and stopping rules.
pub fn fit_cart(train: &Dataset, hp: &Hyperparams) -> Result<SgtModel, FitError> {
    let params = InnerTreeParams { max_leaf_nodes: 2, min_samples_leaf: hp.min_samples_leaf as f64, criterion: hp.criterion };
    grow(train, hp, &|node: &NodeData, _: &[FeatureGroup], _| best_threshold(node, &params))
}

/// Best single threshold over every encoded column.
pub(crate) fn best_threshold(node: &NodeData, params: &InnerTreeParams) -> Option<Proposal> {
    let cols: Vec<usize> = (0..node.matrix.width()).collect();
    let b = bin_univariate(node, &cols, params);
    let InnerNode::Split { projection, threshold, .. } = b.tree.nodes()[0] else {
        return None;
    };
    let crate::inner_tree::Projection::Column { column } = projection else { unreachable!() };
    let cost = node.partition_cost(&b.bin_of, 2, params.criterion);
    Some(Proposal { split: Split::Threshold { column, threshold }, penalized: cost, branch_of: b.bin_of, candidate_pairs: vec![] })
}

/// Fits the variant's family: CART for [`Variant::Cart`], otherwise shape
/// trees with `hp` as given.
pub fn fit_variant(train: &Dataset, v: Variant, hp: &Hyperparams) -> Result<SgtModel, FitError> {
    match v {
        Variant::Cart => fit_cart(train, hp),
        _ => fit(train, hp),
    }
}

struct Pending<'a> {
    id: usize,
    data: NodeData<'a>,
    depth: usize,
    seed: u64,
    proposal: Option<Proposal>,
}

#[derive(PartialEq)]
struct Key {
    improvement: f64,
    seq: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.improvement.total_cmp(&other.improvement).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type Splitter<'s> = dyn Fn(&NodeData, &[FeatureGroup], u64) -> Option<Proposal> + Sync + 's;

struct Ctx<'c, 's> {
    hp: &'c Hyperparams,
    groups: &'c [FeatureGroup],
    splitter: &'c Splitter<'s>,
}

impl Ctx<'_, '_> {
    /// Computes the node's best split up front and queues it.
    fn enqueue<'a>(
        &self,
        pending: &mut Vec<Option<Pending<'a>>>,
        heap: &mut BinaryHeap<Key>,
        id: usize,
        data: NodeData<'a>,
        depth: usize,
        seed: u64,
    ) {
        let hp = self.hp;
        let splittable = depth < hp.max_depth && data.len() >= hp.min_samples_split && !data.is_pure();
        let proposal = if splittable { (self.splitter)(&data, self.groups, seed) } else { None };
        let improvement = proposal.as_ref().map_or(f64::NEG_INFINITY, |p| data.cost(hp.criterion) - p.penalized);
        heap.push(Key { improvement, seq: pending.len() });
        pending.push(Some(Pending { id, data, depth, seed, proposal }));
    }
}

fn grow(train: &Dataset, hp: &Hyperparams, splitter: &Splitter<'_>) -> Result<SgtModel, FitError> {
    hp.validate()?;
    check_task(hp.criterion, train.task())?;
    if train.n_rows() == 0 {
        return Err(FitError::Empty);
    }
    let matrix: EncodedMatrix = one_hot_view(train);
    let groups = matrix.groups().to_vec();
    let root = NodeData::root(&matrix, train.targets());
    let n_root = root.total_weight() as f64;

    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut pending: Vec<Option<Pending>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut internal = 0usize;

    let ctx = Ctx { hp, groups: &groups, splitter };
    ctx.enqueue(&mut pending, &mut heap, 0, root, 0, hp.seed);

    while let Some(Key { improvement, seq }) = heap.pop() {
        let p = pending[seq].take().expect("each entry popped once");
        let leaf = |p: &Pending| Node::Leaf { value: LeafValue::from_stats(&p.data.stats()), depth: p.depth, support: p.data.total_weight() };
        let Some(prop) = p.proposal.as_ref() else {
            nodes[p.id] = Some(leaf(&p));
            continue;
        };
        let arity = prop.split.arity();
        let mut parts = vec![Vec::new(); arity];
        for (pos, &b) in prop.branch_of.iter().enumerate() {
            parts[b].push(pos);
        }
        let too_small = parts.iter().any(|part| {
            part.iter().map(|&q| p.data.weights[q] as u64).sum::<u64>() < hp.min_samples_leaf as u64
        });
        let budget_spent = hp.max_internal_nodes.is_some_and(|m| internal >= m);
        if improvement / n_root < hp.min_impurity_decrease || too_small || budget_spent {
            nodes[p.id] = Some(leaf(&p));
            continue;
        }
        internal += 1;
        let mut children = Vec::with_capacity(arity);
        for (b, part) in parts.iter().enumerate() {
            let cid = nodes.len();
            nodes.push(None);
            children.push(cid);
            let child = p.data.subset(part);
            ctx.enqueue(&mut pending, &mut heap, cid, child, p.depth + 1, mix_seed(p.seed, b as u64 + 1));
        }
        nodes[p.id] = Some(Node::Internal {
            split: prop.split.clone(),
            children,
            depth: p.depth,
            support: p.data.total_weight(),
            candidate_pairs: prop.candidate_pairs.clone(),
        });
    }
    let nodes: Vec<Node> = nodes.into_iter().map(|n| n.expect("every node resolved")).collect();
    let (task, classes) = (train.task(), train.class_names().to_vec());
    Ok(SgtModel::new(train.schema().clone(), task, classes, train.target_name(), hp.max_arity, nodes)
        .expect("induced trees are valid"))
}

/// Rewrites every threshold split as an equivalent two-bin shape function.
pub fn from_cart(m: &SgtModel) -> SgtModel {
    let groups = m.schema().groups();
    let nodes = m
        .nodes()
        .iter()
        .map(|n| match n {
            Node::Internal { split: Split::Threshold { column, threshold }, children, depth, support, candidate_pairs } => {
                let feature = groups.iter().find(|g| g.columns.contains(column)).expect("column in schema").feature;
                Node::Internal {
                    split: Split::Shape(ShapeFunction {
                        features: ShapeFeatures::Univariate { feature },
                        tree: InnerTree::stump(*column, *threshold),
                        assignment: vec![0, 1],
                        arity: 2,
                    }),
                    children: children.clone(),
                    depth: *depth,
                    support: *support,
                    candidate_pairs: candidate_pairs.clone(),
                }
            }
            other => other.clone(),
        })
        .collect();
    SgtModel::new(m.schema().clone(), m.task(), m.class_names().to_vec(), m.target_name(), m.max_arity(), nodes)
        .expect("conversion preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{gen_bars, gen_plus_sign};
    use crate::model::Predictions;

    #[test]
    fn plus_sign_two_shape_nodes() {
        let ds = gen_plus_sign(50, 1);
        let hp = Hyperparams { max_depth: 2, ..Hyperparams::default() };
        let m = fit(&ds, &hp).unwrap();
        assert_eq!(m.accuracy(&ds).unwrap(), 1.0);
        let s = m.stats();
        assert_eq!((s.internal_nodes, s.max_depth), (2, 2));
    }

    #[test]
    fn bars_single_node() {
        let ds = gen_bars(5, 300, 4);
        let hp = Hyperparams { max_depth: 1, inner_max_leaf_nodes: 8, ..Hyperparams::default() };
        let m = fit(&ds, &hp).unwrap();
        assert_eq!(m.stats().internal_nodes, 1);
        assert_eq!(m.accuracy(&ds).unwrap(), 1.0);
    }

    #[test]
    fn cart_plus_sign_needs_depth_four() {
        let ds = gen_plus_sign(50, 1);
        let unlimited = Hyperparams { max_depth: Hyperparams::UNLIMITED_DEPTH, ..Hyperparams::default() };
        let m = fit_cart(&ds, &unlimited).unwrap();
        assert_eq!(m.accuracy(&ds).unwrap(), 1.0);
        assert!(m.stats().internal_nodes >= 6);
        let shallow = fit_cart(&ds, &Hyperparams { max_depth: 3, ..Hyperparams::default() }).unwrap();
        assert!(shallow.accuracy(&ds).unwrap() < 1.0);
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let ds = Dataset::numeric_classification(&["x"], &[vec![1.0], vec![2.0]], vec![1, 1], 2).unwrap();
        for m in [fit(&ds, &Hyperparams::default()).unwrap(), fit_cart(&ds, &Hyperparams::default()).unwrap()] {
            assert_eq!(m.nodes().len(), 1);
            assert_eq!(m.predict(&ds).unwrap(), Predictions::Classes(vec![1, 1]));
        }
    }

    #[test]
    fn conversion_preserves_predictions() {
        let ds = gen_plus_sign(30, 2);
        let cart = fit_cart(&ds, &Hyperparams { max_depth: 6, ..Hyperparams::default() }).unwrap();
        let sgt = from_cart(&cart);
        assert_eq!(cart.nodes().len(), sgt.nodes().len());
        for i in 0..=40 {
            for j in 0..=40 {
                let x = [-1.0 + i as f64 / 20.0, -1.0 + j as f64 / 20.0];
                assert_eq!(cart.predict_row(&x[..]), sgt.predict_row(&x[..]));
            }
        }
    }

    #[test]
    fn criterion_must_match_task() {
        let ds = gen_plus_sign(5, 0);
        let hp = Hyperparams { criterion: Criterion::Mse, ..Hyperparams::default() };
        assert!(matches!(fit(&ds, &hp), Err(FitError::CriterionMismatch { .. })));
    }

    #[test]
    fn node_budget_and_min_leaf() {
        let ds = gen_plus_sign(30, 3);
        let hp = Hyperparams { max_internal_nodes: Some(1), max_depth: 5, ..Hyperparams::default() };
        assert_eq!(fit_cart(&ds, &hp).unwrap().stats().internal_nodes, 1);
        let hp = Hyperparams { min_samples_leaf: 40, max_depth: 5, ..Hyperparams::default() };
        let m = fit(&ds, &hp).unwrap();
        assert!(m.nodes().iter().filter(|n| n.is_leaf()).all(|n| n.support() >= 40));
    }

    #[test]
    fn variants_parse() {
        assert_eq!("s2gt3".parse::<Variant>().unwrap().arity_and_pairs(), (3, 5));
        assert!("oblique".parse::<Variant>().is_err());
    }
}
