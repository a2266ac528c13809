//! The binning tree behind a shape function.
//!
//! A small CART tree is grown best-first on one feature group (or on a pair
//! of numeric features augmented with rotated projections). Its leaves are
//! the bins that the branch assignment later maps to output branches. Bins
//! are numbered by in-order (left-to-right) leaf position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureRow;
use crate::impurity::{strictly_better, Criterion, TargetStats};
use crate::node::NodeData;

#[derive(Debug, Error, PartialEq)]
pub enum InnerTreeError {
    #[error("tree has a single leaf and no root split")]
    SingleLeaf,
    #[error("bivariate binning needs at least two directions, got {0}")]
    TooFewDirections(usize),
    #[error("no columns supplied")]
    NoColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerTreeParams {
    /// Leaf budget `L`.
    pub max_leaf_nodes: usize,
    /// Values `< 1` are a fraction of the node's sample weight; values
    /// `≥ 1` are an absolute count.
    pub min_samples_leaf: f64,
    pub criterion: Criterion,
}

impl InnerTreeParams {
    pub fn new(max_leaf_nodes: usize, min_samples_leaf: f64, criterion: Criterion) -> Self {
        assert!(max_leaf_nodes >= 2, "leaf budget must be at least 2");
        assert!(min_samples_leaf > 0.0, "min_samples_leaf must be positive");
        InnerTreeParams { max_leaf_nodes, min_samples_leaf, criterion }
    }

    fn min_leaf_weight(&self, total: u64) -> u64 {
        if self.min_samples_leaf >= 1.0 {
            self.min_samples_leaf.ceil() as u64
        } else {
            ((self.min_samples_leaf * total as f64).ceil() as u64).max(1)
        }
    }
}

/// A scalar projection of an encoded row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Projection {
    Column { column: usize },
    /// `cos·x[first] + sin·x[second]`.
    Rotated { first: usize, second: usize, cos: f64, sin: f64 },
}

impl Projection {
    #[inline]
    pub fn eval<R: FeatureRow + ?Sized>(&self, x: &R) -> f64 {
        match *self {
            Projection::Column { column } => x.at(column),
            Projection::Rotated { first, second, cos, sin } => cos * x.at(first) + sin * x.at(second),
        }
    }

    pub fn max_column(&self) -> usize {
        match *self {
            Projection::Column { column } => column,
            Projection::Rotated { first, second, .. } => first.max(second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum InnerNode {
    /// `x ≤ threshold` goes left.
    Split { projection: Projection, threshold: f64, left: usize, right: usize },
    Leaf { bin: usize },
}

/// Fitted binning tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerTree {
    nodes: Vec<InnerNode>,
    n_bins: usize,
    /// Number of rotated directions for bivariate trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    directions: Option<usize>,
}

/// Per-bin target statistics on a node's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTable {
    pub bins: Vec<TargetStats>,
}

impl BinTable {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total(&self) -> TargetStats {
        let mut t = self.bins[0].empty_like();
        for b in &self.bins {
            t.merge_in(b).expect("bins share a shape");
        }
        t
    }
}

impl InnerTree {
    /// A single split `x[column] ≤ threshold` with two bins.
    pub fn stump(column: usize, threshold: f64) -> Self {
        InnerTree {
            nodes: vec![
                InnerNode::Split { projection: Projection::Column { column }, threshold, left: 1, right: 2 },
                InnerNode::Leaf { bin: 0 },
                InnerNode::Leaf { bin: 1 },
            ],
            n_bins: 2,
            directions: None,
        }
    }

    /// Rebuilds a tree from raw nodes, checking structure.
    pub fn from_nodes(nodes: Vec<InnerNode>, directions: Option<usize>) -> Result<Self, String> {
        let t = InnerTree { n_bins: 0, nodes, directions };
        let n_bins = t.validate()?;
        Ok(InnerTree { n_bins, ..t })
    }

    /// Checks that nodes form a tree rooted at 0 whose leaves carry bins
    /// `0..L` in in-order; returns `L`.
    pub fn validate(&self) -> Result<usize, String> {
        if self.nodes.is_empty() {
            return Err("inner tree has no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut next_bin = 0;
        let mut stack = vec![(0usize, false)];
        while let Some((i, expanded)) = stack.pop() {
            match &self.nodes[i] {
                InnerNode::Leaf { bin } => {
                    if seen[i] {
                        return Err(format!("node {i} reached twice"));
                    }
                    seen[i] = true;
                    if *bin != next_bin {
                        return Err(format!("leaf {i} has bin {bin}, expected {next_bin}"));
                    }
                    next_bin += 1;
                }
                InnerNode::Split { left, right, threshold, .. } => {
                    if expanded {
                        stack.push((*right, false));
                        continue;
                    }
                    if seen[i] {
                        return Err(format!("node {i} reached twice"));
                    }
                    seen[i] = true;
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has a non-finite threshold"));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(format!("node {i} has an out-of-range child"));
                    }
                    stack.push((i, true));
                    stack.push((*left, false));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("inner tree has unreachable nodes".into());
        }
        Ok(next_bin)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn nodes(&self) -> &[InnerNode] {
        &self.nodes
    }

    pub fn directions(&self) -> Option<usize> {
        self.directions
    }

    pub fn max_column(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                InnerNode::Split { projection, .. } => Some(projection.max_column()),
                InnerNode::Leaf { .. } => None,
            })
            .max()
    }

    /// Bin of an encoded row.
    #[inline]
    pub fn route<R: FeatureRow + ?Sized>(&self, x: &R) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                InnerNode::Leaf { bin } => return *bin,
                InnerNode::Split { projection, threshold, left, right } => {
                    i = if projection.eval(x) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Branch of each bin under the root split: 0 for the root's left
    /// subtree, 1 for the right.
    pub fn root_assignment(&self) -> Result<Vec<usize>, InnerTreeError> {
        match &self.nodes[0] {
            InnerNode::Leaf { .. } => Err(InnerTreeError::SingleLeaf),
            InnerNode::Split { right, .. } => {
                let first_right = self.first_bin(*right);
                Ok((0..self.n_bins).map(|b| usize::from(b >= first_right)).collect())
            }
        }
    }

    fn first_bin(&self, mut i: usize) -> usize {
        loop {
            match &self.nodes[i] {
                InnerNode::Leaf { bin } => return *bin,
                InnerNode::Split { left, .. } => i = *left,
            }
        }
    }

    /// Root-to-leaf rule lists, one per bin, as `(projection, threshold,
    /// goes_left)` triples.
    pub fn bin_rules(&self) -> Vec<Vec<(Projection, f64, bool)>> {
        let mut out = vec![Vec::new(); self.n_bins];
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((i, path)) = stack.pop() {
            match &self.nodes[i] {
                InnerNode::Leaf { bin } => out[*bin] = path,
                InnerNode::Split { projection, threshold, left, right } => {
                    let mut l = path.clone();
                    l.push((*projection, *threshold, true));
                    let mut r = path;
                    r.push((*projection, *threshold, false));
                    stack.push((*left, l));
                    stack.push((*right, r));
                }
            }
        }
        out
    }
}

/// Per-bin statistics of `node` routed through `tree`.
pub fn extract_bin_stats(tree: &InnerTree, node: &NodeData) -> BinTable {
    let mut bins = vec![node.empty_stats(); tree.n_bins()];
    for p in 0..node.len() {
        let b = tree.route(&node.matrix.row_view(node.rows[p]));
        node.add_to(&mut bins[b], p);
    }
    BinTable { bins }
}

/// A fitted tree together with the bin of every node position.
#[derive(Debug, Clone)]
pub struct Binning {
    pub tree: InnerTree,
    pub bin_of: Vec<usize>,
}

impl Binning {
    pub fn bin_table(&self, node: &NodeData) -> BinTable {
        let mut bins = vec![node.empty_stats(); self.tree.n_bins()];
        for (p, &b) in self.bin_of.iter().enumerate() {
            node.add_to(&mut bins[b], p);
        }
        BinTable { bins }
    }
}

/// CART on the given encoded columns of one feature group.
pub fn fit_univariate(node: &NodeData, columns: &[usize], p: &InnerTreeParams) -> InnerTree {
    bin_univariate(node, columns, p).tree
}

pub fn bin_univariate(node: &NodeData, columns: &[usize], p: &InnerTreeParams) -> Binning {
    assert!(!columns.is_empty(), "{}", InnerTreeError::NoColumns);
    let projections: Vec<Projection> = columns.iter().map(|&c| Projection::Column { column: c }).collect();
    let values = projections.iter().map(|pr| project(node, pr)).collect();
    grow(node, projections, values, p, None)
}

/// The `2 + H` projections used for a bivariate pair: both raw columns,
/// then directions at angles `h·π/H`.
pub fn bivariate_projections(first: usize, second: usize, directions: usize) -> Vec<Projection> {
    let mut out = vec![Projection::Column { column: first }, Projection::Column { column: second }];
    for h in 0..directions {
        let phi = h as f64 * std::f64::consts::PI / directions as f64;
        out.push(Projection::Rotated { first, second, cos: snap(phi.cos()), sin: snap(phi.sin()) });
    }
    out
}

/// Exact 0 and ±1 for axis directions, so `cos(π/2)` does not perturb
/// ties in the other coordinate.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-12 {
        v.signum()
    } else {
        v
    }
}

/// CART over two numeric columns plus `directions` rotated projections.
pub fn fit_bivariate(
    node: &NodeData,
    first: usize,
    second: usize,
    directions: usize,
    p: &InnerTreeParams,
) -> Result<InnerTree, InnerTreeError> {
    bin_bivariate(node, first, second, directions, p).map(|b| b.tree)
}

pub fn bin_bivariate(
    node: &NodeData,
    first: usize,
    second: usize,
    directions: usize,
    p: &InnerTreeParams,
) -> Result<Binning, InnerTreeError> {
    if directions < 2 {
        return Err(InnerTreeError::TooFewDirections(directions));
    }
    let projections = bivariate_projections(first, second, directions);
    let values = projections.iter().map(|pr| project(node, pr)).collect();
    Ok(grow(node, projections, values, p, Some(directions)))
}

fn project(node: &NodeData, pr: &Projection) -> Vec<f64> {
    node.rows.iter().map(|&r| pr.eval(&node.matrix.row_view(r))).collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    projection: usize,
    threshold: f64,
    improvement: f64,
}

struct Frontier {
    tree_node: usize,
    /// Positions sorted by each projection's value.
    sorted: Vec<Vec<u32>>,
    stats: TargetStats,
    candidate: Option<Candidate>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = 0.5 * a + 0.5 * b;
    if t >= b || t < a {
        a
    } else {
        t
    }
}

fn best_candidate(
    node: &NodeData,
    values: &[Vec<f64>],
    sorted: &[Vec<u32>],
    stats: &TargetStats,
    min_leaf: u64,
    c: Criterion,
) -> Option<Candidate> {
    let total_w = stats.weight();
    if total_w < 2 * min_leaf {
        return None;
    }
    let parent = stats.weighted_impurity(c);
    if parent <= 0.0 {
        return None;
    }
    let mut best_cost = parent;
    let mut best: Option<Candidate> = None;
    for (j, order) in sorted.iter().enumerate() {
        let vals = &values[j];
        let mut left = stats.empty_like();
        let mut right = stats.clone();
        for w in 0..order.len().saturating_sub(1) {
            let p = order[w] as usize;
            node.add_to(&mut left, p);
            node.remove_from(&mut right, p);
            let (a, b) = (vals[p], vals[order[w + 1] as usize]);
            if a >= b {
                continue;
            }
            if left.weight() < min_leaf {
                continue;
            }
            if right.weight() < min_leaf {
                break;
            }
            let cost = left.weighted_impurity(c) + right.weighted_impurity(c);
            if strictly_better(cost, best_cost, total_w as f64) {
                best_cost = cost;
                best = Some(Candidate { projection: j, threshold: midpoint(a, b), improvement: parent - cost });
            }
        }
    }
    best
}

fn grow(
    node: &NodeData,
    projections: Vec<Projection>,
    values: Vec<Vec<f64>>,
    p: &InnerTreeParams,
    directions: Option<usize>,
) -> Binning {
    let n = node.len();
    let stats = node.stats();
    let min_leaf = p.min_leaf_weight(stats.weight());
    let sorted: Vec<Vec<u32>> = values
        .iter()
        .map(|v| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| v[a as usize].total_cmp(&v[b as usize]));
            idx
        })
        .collect();

    let mut nodes = vec![InnerNode::Leaf { bin: 0 }];
    let candidate = best_candidate(node, &values, &sorted, &stats, min_leaf, p.criterion);
    let mut frontier = vec![Frontier { tree_node: 0, sorted, stats, candidate }];
    let mut go_left = vec![false; n];

    while frontier.len() < p.max_leaf_nodes {
        // Largest improvement; ties to the earliest-created leaf.
        let mut pick: Option<usize> = None;
        for (i, f) in frontier.iter().enumerate() {
            if let Some(c) = f.candidate {
                let better = match pick {
                    None => true,
                    Some(k) => {
                        let inc = frontier[k].candidate.unwrap().improvement;
                        c.improvement > inc + crate::impurity::TIE_EPS * (n as f64).max(1.0)
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let f = frontier.remove(i);
        let cand = f.candidate.unwrap();
        let vals = &values[cand.projection];
        for &q in &f.sorted[0] {
            go_left[q as usize] = vals[q as usize] <= cand.threshold;
        }
        let (mut ls, mut rs) = (Vec::with_capacity(f.sorted.len()), Vec::with_capacity(f.sorted.len()));
        for order in &f.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = order.iter().partition(|&&q| go_left[q as usize]);
            ls.push(l);
            rs.push(r);
        }
        let lstats = node.stats_of(&ls[0].iter().map(|&q| q as usize).collect::<Vec<_>>());
        let rstats = f.stats.remove(&lstats).expect("left is a subset");
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(InnerNode::Leaf { bin: 0 });
        nodes.push(InnerNode::Leaf { bin: 0 });
        nodes[f.tree_node] = InnerNode::Split {
            projection: projections[cand.projection],
            threshold: cand.threshold,
            left: li,
            right: ri,
        };
        let lc = best_candidate(node, &values, &ls, &lstats, min_leaf, p.criterion);
        let rc = best_candidate(node, &values, &rs, &rstats, min_leaf, p.criterion);
        // Keep creation order: children go to the end.
        frontier.push(Frontier { tree_node: li, sorted: ls, stats: lstats, candidate: lc });
        frontier.push(Frontier { tree_node: ri, sorted: rs, stats: rstats, candidate: rc });
    }

    // Number bins by in-order leaf position.
    let mut bin_of_node = vec![usize::MAX; nodes.len()];
    let mut next = 0;
    let mut stack = vec![(0usize, false)];
    while let Some((i, expanded)) = stack.pop() {
        match nodes[i] {
            InnerNode::Leaf { .. } => {
                bin_of_node[i] = next;
                next += 1;
            }
            InnerNode::Split { left, right, .. } => {
                if expanded {
                    stack.push((right, false));
                } else {
                    stack.push((i, true));
                    stack.push((left, false));
                }
            }
        }
    }
    for (i, nd) in nodes.iter_mut().enumerate() {
        if let InnerNode::Leaf { bin } = nd {
            *bin = bin_of_node[i];
        }
    }
    let mut bin_of = vec![0; n];
    for f in &frontier {
        let b = bin_of_node[f.tree_node];
        for &q in &f.sorted[0] {
            bin_of[q as usize] = b;
        }
    }
    Binning { tree: InnerTree { nodes, n_bins: next, directions }, bin_of }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::gen_bars;
    use crate::data::{one_hot_view, Dataset, EncodedMatrix};
    use crate::node::NodeTargets;

    fn node_from(m: &EncodedMatrix, labels: Vec<usize>, c: usize) -> NodeData<'_> {
        NodeData::new(m, (0..labels.len()).collect(), NodeTargets::Class { labels, n_classes: c }, None)
    }

    fn params(l: usize) -> InnerTreeParams {
        InnerTreeParams::new(l, 1.0, Criterion::Gini)
    }

    #[test]
    fn constant_feature_gives_single_leaf() {
        let m = EncodedMatrix::from_columns(vec![vec![2.0; 6]], vec![]);
        let node = node_from(&m, vec![0, 1, 0, 1, 1, 0], 2);
        let t = fit_univariate(&node, &[0], &params(8));
        assert_eq!(t.n_bins(), 1);
        assert_eq!(t.root_assignment(), Err(InnerTreeError::SingleLeaf));
        let bins = extract_bin_stats(&t, &node);
        assert_eq!(bins.bins, vec![node.stats()]);
    }

    #[test]
    fn indicator_column_splits_at_half() {
        let m = EncodedMatrix::from_columns(vec![vec![0.0, 1.0, 0.0, 1.0, 1.0]], vec![]);
        let node = node_from(&m, vec![0, 1, 0, 1, 0], 2);
        let t = fit_univariate(&node, &[0], &params(8));
        assert!(t.n_bins() <= 2);
        match t.nodes()[0] {
            InnerNode::Split { threshold, .. } => assert_eq!(threshold, 0.5),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn bars_bins_are_pure_and_bracket_boundaries() {
        let ds = gen_bars(5, 300, 4);
        let m = one_hot_view(&ds);
        let node = NodeData::root(&m, ds.targets());
        let t = fit_univariate(&node, &[0], &params(8));
        assert_eq!(t.n_bins(), 7);
        let bins = extract_bin_stats(&t, &node);
        for b in &bins.bins {
            let TargetStats::Class { counts, .. } = b else { unreachable!() };
            assert!(counts.iter().filter(|&&c| c > 0).count() == 1, "impure bin {counts:?}");
        }
        assert_eq!(bins.total(), node.stats());
        // Each boundary j/7 lies between two consecutive thresholds' sides.
        let mut th: Vec<f64> = t
            .nodes()
            .iter()
            .filter_map(|n| match n {
                InnerNode::Split { threshold, .. } => Some(*threshold),
                _ => None,
            })
            .collect();
        th.sort_by(f64::total_cmp);
        for (j, t) in th.iter().enumerate() {
            let b = (j + 1) as f64 / 7.0;
            assert!((t - b).abs() < 0.1 / 7.0 + 1e-12, "threshold {t} far from boundary {b}");
        }
    }

    #[test]
    fn root_assignment_follows_leaf_order() {
        let m = EncodedMatrix::from_columns(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![]);
        let node = node_from(&m, vec![0, 1, 0, 1], 2);
        let t = fit_univariate(&node, &[0], &params(2));
        assert_eq!(t.root_assignment().unwrap(), vec![0, 1]);
        // 4 leaves with root at 1.5 → left subtree bins 0,1
        let node = node_from(&m, vec![0, 1, 1, 0], 2);
        let t = fit_univariate(&node, &[0], &params(4));
        assert_eq!(t.n_bins(), 3);
        // Entropy prefers the balanced root cut at 1.5 for four classes.
        let node = node_from(&m, vec![0, 1, 2, 3], 4);
        let t = fit_univariate(&node, &[0], &InnerTreeParams::new(4, 1.0, Criterion::Entropy));
        assert_eq!(t.n_bins(), 4);
        assert_eq!(t.root_assignment().unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i % 3 == 0)).collect();
        let m = EncodedMatrix::from_columns(vec![xs], vec![]);
        let node = node_from(&m, labels, 2);
        let p = InnerTreeParams::new(16, 0.2, Criterion::Gini);
        let b = bin_univariate(&node, &[0], &p);
        let table = b.bin_table(&node);
        assert!(table.bins.iter().all(|s| s.weight() >= 4));
        assert_eq!(table, extract_bin_stats(&b.tree, &node));
    }

    #[test]
    fn two_directions_match_axis_aligned() {
        let ds = crate::data::synth::gen_plus_sign(20, 2);
        let m = one_hot_view(&ds);
        let node = NodeData::root(&m, ds.targets());
        let p = params(8);
        let biv = fit_bivariate(&node, 0, 1, 2, &p).unwrap();
        let uni = fit_univariate(&node, &[0, 1], &p);
        for r in 0..m.n_rows() {
            assert_eq!(biv.route(&m.row_view(r)), uni.route(&m.row_view(r)));
        }
        assert_eq!(fit_bivariate(&node, 0, 1, 1, &p).unwrap_err(), InnerTreeError::TooFewDirections(1));
    }

    #[test]
    fn diagonal_data_uses_diagonal_direction() {
        // Labels by sign of x1 + x2 on a jittered grid.
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        let mut y = Vec::new();
        for i in 0..15 {
            for j in 0..15 {
                let a = i as f64 / 7.0 - 1.0 + 0.013 * j as f64;
                let b = j as f64 / 7.0 - 1.0 + 0.007 * i as f64;
                x1.push(a);
                x2.push(b);
                y.push(usize::from(a + b > 0.05));
            }
        }
        let ds = Dataset::numeric_classification(
            &["a", "b"],
            &x1.iter().zip(&x2).map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
            y,
            2,
        )
        .unwrap();
        let m = one_hot_view(&ds);
        let node = NodeData::root(&m, ds.targets());
        let t = fit_bivariate(&node, 0, 1, 8, &params(4)).unwrap();
        match t.nodes()[0] {
            InnerNode::Split { projection: Projection::Rotated { cos, sin, .. }, .. } => {
                assert!((cos - sin).abs() < 1e-12, "root should use the 45° direction");
            }
            ref other => panic!("root split not rotated: {other:?}"),
        }
    }
}
