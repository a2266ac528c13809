//! Tree alternating optimisation: post-hoc refits of each internal node
//! against the fixed subtrees below it, plus pruning.
//!
//! For a node under refit, every training sample reaching it is sent down
//! each child subtree. Branches whose subtree does best on the sample are
//! its *valid* branches; samples for which every branch (or no branch) is
//! valid are ignored. The remaining care set is duplicated once per valid
//! branch with the branch as pseudolabel, a binning tree is fitted on it,
//! and each bin goes to the branch valid for most of its distinct samples.
//! A refit is kept only if it strictly lowers the subtree's training loss
//! and every leaf keeps its minimum support.

use serde::{Deserialize, Serialize};

use crate::data::{one_hot_view, Dataset, EncodedMatrix, FeatureGroup, Targets};
use crate::impurity::{Criterion, TargetStats};
use crate::induce::{check_task, FitError, Hyperparams};
use crate::inner_tree::{bin_bivariate, bin_univariate, Binning, InnerNode, InnerTreeParams, Projection};
use crate::model::{LeafValue, Node, SgtModel, Split};
use crate::node::{NodeData, NodeTargets};
use crate::split::{ShapeFeatures, ShapeFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaoParams {
    /// Maximum alternation passes; stops early after a pass without changes.
    pub passes: usize,
    /// Penalty per leaf added to the training error rate (or MSE).
    pub reg: f64,
}

impl Default for TaoParams {
    fn default() -> Self {
        TaoParams { passes: 5, reg: 0.0 }
    }
}

/// What each pass did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaoReport {
    /// Training objective before the first pass and after each pass.
    pub objectives: Vec<f64>,
    pub refits: usize,
    pub prunes: usize,
    pub passes_run: usize,
}

/// Samples that can influence a node refit, with their valid branches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CareSet {
    pub rows: Vec<usize>,
    pub valid: Vec<Vec<usize>>,
}

impl CareSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// One row per (sample, valid branch) with the branch as label.
    pub fn duplicated(&self) -> (Vec<usize>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (r, v) in self.rows.iter().zip(&self.valid) {
            for &b in v {
                rows.push(*r);
                labels.push(b);
            }
        }
        (rows, labels)
    }
}

/// Fraction of distinct care samples that `split` sends to one of their
/// valid branches; 1 for an empty care set.
pub fn pseudolabel_accuracy(split: &Split, matrix: &EncodedMatrix, care: &CareSet) -> f64 {
    if care.is_empty() {
        return 1.0;
    }
    let hits = care.rows.iter().zip(&care.valid).filter(|(r, v)| v.contains(&split.branch(&matrix.row_view(**r)))).count();
    hits as f64 / care.len() as f64
}

/// Training error rate (or MSE) plus `reg` per leaf.
pub fn training_objective(m: &SgtModel, train: &Dataset, reg: f64) -> Result<f64, FitError> {
    let ds = m.align_classes(train).map_err(|e| FitError::Invalid(e.to_string()))?;
    let matrix = one_hot_view(&ds);
    let w = Work::new(m.nodes().to_vec(), &matrix, ds.targets());
    Ok(w.objective(reg))
}

/// Refines a fitted tree in place of the original; see the module docs.
pub fn tao_refine(m: &SgtModel, train: &Dataset, tp: &TaoParams, hp: &Hyperparams) -> Result<SgtModel, FitError> {
    tao_refine_traced(m, train, tp, hp).map(|(m, _)| m)
}

pub fn tao_refine_traced(
    m: &SgtModel,
    train: &Dataset,
    tp: &TaoParams,
    hp: &Hyperparams,
) -> Result<(SgtModel, TaoReport), FitError> {
    check_task(hp.criterion, train.task())?;
    if tp.passes < 1 || !(tp.reg >= 0.0) {
        return Err(FitError::Invalid("tao passes must be positive and reg non-negative".into()));
    }
    let ds = m.align_classes(train).map_err(|e| FitError::Invalid(e.to_string()))?;
    let matrix = one_hot_view(&ds);
    let groups = matrix.groups().to_vec();
    let mut w = Work::new(m.nodes().to_vec(), &matrix, ds.targets());
    let inner = InnerTreeParams {
        max_leaf_nodes: hp.inner_max_leaf_nodes,
        min_samples_leaf: hp.inner_min_samples_leaf,
        criterion: if hp.criterion.is_regression() { Criterion::Gini } else { hp.criterion },
    };
    let mut report = TaoReport { objectives: vec![w.objective(tp.reg)], ..TaoReport::default() };
    for _ in 0..tp.passes {
        let mut changes = 0;
        for v in w.internal_deepest_first() {
            if w.refit(v, &groups, &inner, hp) {
                report.refits += 1;
                changes += 1;
            }
        }
        changes += w.refresh_leaves();
        for v in w.internal_deepest_first() {
            if w.prune(v, tp.reg) {
                report.prunes += 1;
                changes += 1;
            }
        }
        w.compact();
        report.passes_run += 1;
        report.objectives.push(w.objective(tp.reg));
        if changes == 0 {
            break;
        }
    }
    let out = SgtModel::new(m.schema().clone(), m.task(), m.class_names().to_vec(), m.target_name(), m.max_arity(), w.nodes)
        .map_err(|e| FitError::Invalid(e.to_string()))?;
    Ok((out, report))
}

/// Care set of internal node `v` of `m` on `train`.
pub fn care_set(m: &SgtModel, train: &Dataset, v: usize) -> Result<CareSet, FitError> {
    let ds = m.align_classes(train).map_err(|e| FitError::Invalid(e.to_string()))?;
    let matrix = one_hot_view(&ds);
    let w = Work::new(m.nodes().to_vec(), &matrix, ds.targets());
    let reach = w.reach();
    Ok(w.care(v, &reach[v]).0)
}

struct Work<'a> {
    nodes: Vec<Node>,
    matrix: &'a EncodedMatrix,
    targets: &'a Targets,
}

const LOSS_TOL: f64 = 1e-12;

impl<'a> Work<'a> {
    fn new(nodes: Vec<Node>, matrix: &'a EncodedMatrix, targets: &'a Targets) -> Self {
        Work { nodes, matrix, targets }
    }

    fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    fn route_from(&self, mut i: usize, row: usize) -> usize {
        let x = self.matrix.row_view(row);
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Internal { split, children, .. } => i = children[split.branch(&x)],
            }
        }
    }

    fn loss(&self, row: usize, leaf: usize) -> f64 {
        let Node::Leaf { value, .. } = &self.nodes[leaf] else { unreachable!() };
        match (self.targets, value) {
            (Targets::Classes { labels, .. }, LeafValue::Class { label, .. }) => f64::from(u8::from(labels[row] != *label)),
            (Targets::Real(ys), LeafValue::Real { mean }) => (ys[row] - mean).powi(2),
            _ => unreachable!("task checked"),
        }
    }

    fn objective(&self, reg: f64) -> f64 {
        let loss: f64 = (0..self.n()).map(|r| self.loss(r, self.route_from(0, r))).sum();
        let leaves = self.reachable().iter().filter(|&&i| self.nodes[i].is_leaf()).count();
        loss / self.n() as f64 + reg * leaves as f64
    }

    /// Node ids reachable from the root, parents before children.
    fn reachable(&self) -> Vec<usize> {
        let mut out = vec![0];
        let mut k = 0;
        while k < out.len() {
            if let Node::Internal { children, .. } = &self.nodes[out[k]] {
                out.extend(children.iter().copied());
            }
            k += 1;
        }
        out
    }

    fn reach(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for r in 0..self.n() {
            let mut i = 0;
            let x = self.matrix.row_view(r);
            loop {
                out[i].push(r);
                match &self.nodes[i] {
                    Node::Leaf { .. } => break,
                    Node::Internal { split, children, .. } => i = children[split.branch(&x)],
                }
            }
        }
        out
    }

    fn depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for i in self.reachable() {
            if let Node::Internal { children, .. } = &self.nodes[i] {
                for &c in children {
                    d[c] = d[i] + 1;
                }
            }
        }
        d
    }

    fn internal_deepest_first(&self) -> Vec<usize> {
        let d = self.depths();
        let mut ids: Vec<usize> = self.reachable().into_iter().filter(|&i| !self.nodes[i].is_leaf()).collect();
        ids.sort_by(|a, b| d[*b].cmp(&d[*a]).then(b.cmp(a)));
        ids
    }

    /// Care set of `v` plus, per reaching row, the loss under each branch.
    fn care(&self, v: usize, rows: &[usize]) -> (CareSet, Vec<Vec<f64>>) {
        let Node::Internal { children, .. } = &self.nodes[v] else { unreachable!() };
        let mut care = CareSet::default();
        let mut losses = Vec::with_capacity(rows.len());
        for &r in rows {
            let l: Vec<f64> = children.iter().map(|&c| self.loss(r, self.route_from(c, r))).collect();
            let best = l.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = LOSS_TOL * best.abs().max(1.0);
            let valid: Vec<usize> = (0..l.len()).filter(|&b| l[b] <= best + tol).collect();
            if valid.len() < l.len() {
                care.rows.push(r);
                care.valid.push(valid);
            }
            losses.push(l);
        }
        (care, losses)
    }

    fn subtree_leaves(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf { .. } => out.push(i),
                Node::Internal { children, .. } => stack.extend(children.iter().copied()),
            }
        }
        out
    }

    /// Tries to replace the decision function of `v`; true when accepted.
    fn refit(&mut self, v: usize, groups: &[FeatureGroup], inner: &InnerTreeParams, hp: &Hyperparams) -> bool {
        let reach = self.reach();
        let rows = &reach[v];
        let (care, losses) = self.care(v, rows);
        if care.is_empty() {
            return false;
        }
        let Node::Internal { split, children, candidate_pairs, .. } = self.nodes[v].clone() else { unreachable!() };
        let arity = children.len();
        let (dup_rows, pseudo) = care.duplicated();
        let data = NodeData::new(self.matrix, dup_rows, NodeTargets::Class { labels: pseudo, n_classes: arity }, None);

        let candidates: Vec<(Split, Vec<usize>)> = match &split {
            Split::Threshold { .. } => {
                let p = InnerTreeParams { max_leaf_nodes: 2, ..*inner };
                let cols: Vec<usize> = (0..self.matrix.width()).collect();
                let b = bin_univariate(&data, &cols, &p);
                threshold_candidate(&b, &care, &children).into_iter().collect()
            }
            Split::Shape(_) => {
                let mut out = Vec::new();
                for g in groups {
                    let cols: Vec<usize> = g.columns.clone().collect();
                    let b = bin_univariate(&data, &cols, inner);
                    out.extend(shape_candidate(ShapeFeatures::Univariate { feature: g.feature }, b, &care, arity));
                }
                for &(a, bb) in &candidate_pairs {
                    let (ga, gb) = (&groups[a], &groups[bb]);
                    if let Ok(b) = bin_bivariate(&data, ga.columns.start, gb.columns.start, hp.directions, inner) {
                        out.extend(shape_candidate(ShapeFeatures::Bivariate { first: a, second: bb }, b, &care, arity));
                    }
                }
                out
            }
        };

        let current: f64 = rows.iter().enumerate().map(|(k, &r)| losses[k][split.branch(&self.matrix.row_view(r))]).sum();
        let leaves = self.subtree_leaves(v);
        let old_support: Vec<u64> = leaves.iter().map(|&l| reach[l].len() as u64).collect();
        let mut best: Option<(f64, Split, Vec<usize>)> = None;
        for (cand, order) in candidates {
            // `order[b]` is the original branch index now at position b.
            let loss: f64 =
                rows.iter().enumerate().map(|(k, &r)| losses[k][order[cand.branch(&self.matrix.row_view(r))]]).sum();
            if loss < current - LOSS_TOL * current.max(1.0) && best.as_ref().is_none_or(|(l, ..)| loss < *l) {
                best = Some((loss, cand, order));
            }
        }
        let Some((_, new_split, order)) = best else { return false };
        let backup = self.nodes[v].clone();
        if let Node::Internal { split, children: ch, .. } = &mut self.nodes[v] {
            *split = new_split;
            *ch = order.iter().map(|&b| children[b]).collect();
        }
        let reach = self.reach();
        let ok = leaves
            .iter()
            .zip(&old_support)
            .all(|(&l, &old)| reach[l].len() as u64 >= old.min(hp.min_samples_leaf as u64));
        if !ok {
            self.nodes[v] = backup;
        }
        ok
    }

    /// Recomputes leaf predictions from the rows reaching them; returns the
    /// number of leaves whose prediction changed.
    fn refresh_leaves(&mut self) -> usize {
        let reach = self.reach();
        let mut changed = 0;
        for i in self.reachable() {
            if let Node::Leaf { value, support, .. } = &mut self.nodes[i] {
                let rows = &reach[i];
                *support = rows.len() as u64;
                if rows.is_empty() {
                    continue;
                }
                let new = LeafValue::from_stats(&stats_of(self.targets, rows));
                if new.label() != value.label() || matches!((&new, &*value), (LeafValue::Real { mean: a }, LeafValue::Real { mean: b }) if a != b) {
                    changed += 1;
                }
                *value = new;
            }
        }
        changed
    }

    /// Collapses `v` into a leaf or its busiest child when the objective
    /// does not increase; true when pruned.
    fn prune(&mut self, v: usize, reg: f64) -> bool {
        let Node::Internal { children, depth, .. } = self.nodes[v].clone() else { return false };
        let reach = self.reach();
        let rows = &reach[v];
        let n = self.n() as f64;
        let old_loss: f64 = rows.iter().map(|&r| self.loss(r, self.route_from(v, r))).sum();
        let old_leaves = self.subtree_leaves(v).len() as f64;

        let stats = stats_of(self.targets, rows);
        let leaf = Node::Leaf { value: LeafValue::from_stats(&stats), depth, support: rows.len() as u64 };
        let leaf_loss: f64 = {
            let saved = std::mem::replace(&mut self.nodes[v], leaf.clone());
            let l = rows.iter().map(|&r| self.loss(r, v)).sum();
            self.nodes[v] = saved;
            l
        };
        let leaf_delta = (leaf_loss - old_loss) / n + reg * (1.0 - old_leaves);

        let busiest = (0..children.len()).max_by(|&a, &b| reach[children[a]].len().cmp(&reach[children[b]].len()).then(b.cmp(&a))).unwrap();
        let c = children[busiest];
        let child_loss: f64 = rows.iter().map(|&r| self.loss(r, self.route_from(c, r))).sum();
        let child_delta = (child_loss - old_loss) / n + reg * (self.subtree_leaves(c).len() as f64 - old_leaves);

        let tol = LOSS_TOL * (old_loss / n).max(1.0);
        if leaf_delta <= tol && leaf_delta <= child_delta {
            self.nodes[v] = leaf;
            true
        } else if child_delta <= tol {
            self.nodes[v] = self.nodes[c].clone();
            true
        } else {
            false
        }
    }

    /// Drops unreachable nodes and renumbers breadth-first, refreshing
    /// depths and supports.
    fn compact(&mut self) {
        let order = self.reachable();
        let reach = self.reach();
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (k, &i) in order.iter().enumerate() {
            new_id[i] = k;
        }
        let depths = self.depths();
        let nodes = order
            .iter()
            .map(|&i| {
                let mut n = self.nodes[i].clone();
                match &mut n {
                    Node::Internal { children, depth, support, .. } => {
                        children.iter_mut().for_each(|c| *c = new_id[*c]);
                        *depth = depths[i];
                        *support = reach[i].len() as u64;
                    }
                    Node::Leaf { depth, support, .. } => {
                        *depth = depths[i];
                        *support = reach[i].len() as u64;
                    }
                }
                n
            })
            .collect();
        self.nodes = nodes;
    }
}

fn stats_of(targets: &Targets, rows: &[usize]) -> TargetStats {
    match targets {
        Targets::Classes { labels, names } => {
            let mut s = TargetStats::empty_class(names.len());
            rows.iter().for_each(|&r| s.push_class(labels[r], 1));
            s
        }
        Targets::Real(ys) => {
            let mut s = TargetStats::empty_real();
            rows.iter().for_each(|&r| s.push_real(ys[r], 1));
            s
        }
    }
}

/// Branch per bin maximising the number of distinct care samples for which
/// it is valid (lowest branch on ties); bins without care samples copy the
/// nearest bin that has some.
fn validity_assignment(binning: &Binning, care: &CareSet, arity: usize) -> Option<Vec<usize>> {
    let n_bins = binning.tree.n_bins();
    let mut votes = vec![vec![0usize; arity]; n_bins];
    // Duplicates of one sample are consecutive positions in the care data.
    let mut pos = 0;
    for v in &care.valid {
        let bin = binning.bin_of[pos];
        for &b in v {
            votes[bin][b] += 1;
        }
        pos += v.len();
    }
    let has: Vec<bool> = votes.iter().map(|v| v.iter().any(|&c| c > 0)).collect();
    if !has.iter().any(|&h| h) {
        return None;
    }
    let mut a: Vec<usize> =
        votes.iter().map(|v| (0..arity).max_by(|&x, &y| v[x].cmp(&v[y]).then(y.cmp(&x))).unwrap()).collect();
    for l in 0..n_bins {
        if !has[l] {
            let near = (0..n_bins).filter(|&k| has[k]).min_by_key(|&k| (k.abs_diff(l), k)).unwrap();
            a[l] = a[near];
        }
    }
    Some(a)
}

fn shape_candidate(
    features: ShapeFeatures,
    binning: Binning,
    care: &CareSet,
    arity: usize,
) -> Option<(Split, Vec<usize>)> {
    let a = validity_assignment(&binning, care, arity)?;
    let f = ShapeFunction { features, tree: binning.tree, assignment: a, arity };
    Some((Split::Shape(f), (0..arity).collect()))
}

fn threshold_candidate(binning: &Binning, care: &CareSet, children: &[usize]) -> Option<(Split, Vec<usize>)> {
    let InnerNode::Split { projection: Projection::Column { column }, threshold, .. } = binning.tree.nodes()[0] else {
        return None;
    };
    let a = validity_assignment(binning, care, children.len())?;
    if a[0] == a[1] {
        return None;
    }
    Some((Split::Threshold { column, threshold }, vec![a[0], a[1]]))
}
