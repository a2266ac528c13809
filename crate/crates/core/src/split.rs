//! The node-level search: which feature (or feature pair) and which shape
//! function to split on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{select_arity, AssignParams, Assignment};
use crate::data::{FeatureGroup, FeatureRow};
use crate::impurity::{strictly_better, Criterion, TIE_EPS};
use crate::inner_tree::{bin_bivariate, bin_univariate, Binning, InnerTree, InnerTreeParams};
use crate::mix_seed;
use crate::node::NodeData;

/// The original feature(s) a shape function reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeFeatures {
    Univariate { feature: usize },
    Bivariate { first: usize, second: usize },
}

impl ShapeFeatures {
    pub fn features(&self) -> Vec<usize> {
        match *self {
            ShapeFeatures::Univariate { feature } => vec![feature],
            ShapeFeatures::Bivariate { first, second } => vec![first, second],
        }
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self, ShapeFeatures::Bivariate { .. })
    }
}

/// A binning tree composed with a bin → branch lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub features: ShapeFeatures,
    pub tree: InnerTree,
    pub assignment: Vec<usize>,
    pub arity: usize,
}

impl ShapeFunction {
    #[inline]
    pub fn branch<R: FeatureRow + ?Sized>(&self, x: &R) -> usize {
        self.assignment[self.tree.route(x)]
    }

    pub fn validate(&self) -> Result<(), String> {
        let bins = self.tree.validate()?;
        if self.assignment.len() != bins {
            return Err(format!("assignment has {} entries for {} bins", self.assignment.len(), bins));
        }
        if self.arity < 2 {
            return Err(format!("arity {} below 2", self.arity));
        }
        if let Some(b) = self.assignment.iter().find(|&&b| b >= self.arity) {
            return Err(format!("branch {b} out of range for arity {}", self.arity));
        }
        Ok(())
    }
}

/// Node-level search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    /// Maximum branching factor `K`.
    pub max_arity: usize,
    /// Number of feature pairs fitted bivariately; 0 disables pairs.
    pub pair_limit: usize,
    /// Additive penalty `γ` on bivariate objectives.
    pub pairwise_penalty: f64,
    /// Rotated directions `H` of bivariate binning trees.
    pub directions: usize,
    pub inner: InnerTreeParams,
    pub assign: AssignParams,
}

impl SplitParams {
    pub fn criterion(&self) -> Criterion {
        self.inner.criterion
    }
}

/// A fitted shape function with its objective on the node data.
#[derive(Debug, Clone)]
pub struct ShapeFit {
    pub shape: ShapeFunction,
    /// Weighted impurity of the induced branches.
    pub objective: f64,
    /// Branch of every node position.
    pub branch_of: Vec<usize>,
}

/// Fits a shape function on one feature group or one numeric pair.
///
/// Returns `None` when the binning tree cannot split (constant feature or
/// no admissible threshold).
pub fn fit_shape_function(node: &NodeData, target: ShapeTarget<'_>, p: &SplitParams, seed: u64) -> Option<ShapeFit> {
    let (features, binning) = match target {
        ShapeTarget::Univariate(g) => {
            let cols: Vec<usize> = g.columns.clone().collect();
            (ShapeFeatures::Univariate { feature: g.feature }, bin_univariate(node, &cols, &p.inner))
        }
        ShapeTarget::Bivariate(a, b) => {
            assert!(a.numeric && b.numeric, "bivariate shape functions need numeric features");
            let binning = bin_bivariate(node, a.columns.start, b.columns.start, p.directions, &p.inner).ok()?;
            (ShapeFeatures::Bivariate { first: a.feature, second: b.feature }, binning)
        }
    };
    fit_from_binning(node, features, binning, p, seed)
}

fn fit_from_binning(
    node: &NodeData,
    features: ShapeFeatures,
    binning: Binning,
    p: &SplitParams,
    seed: u64,
) -> Option<ShapeFit> {
    let root = binning.tree.root_assignment().ok()?;
    let c = p.criterion();
    let bins = binning.bin_table(node);
    let root = Assignment::new(root, 2, &bins, c);
    let ap = AssignParams { seed, ..p.assign };
    let a = select_arity(&bins, Some(&root), p.max_arity, c, &ap);
    if a.arity < 2 {
        return None;
    }
    let branch_of = binning.bin_of.iter().map(|&b| a.branches[b]).collect();
    Some(ShapeFit {
        shape: ShapeFunction { features, tree: binning.tree, assignment: a.branches, arity: a.arity },
        objective: a.objective,
        branch_of,
    })
}

/// What a shape function is fitted on.
#[derive(Debug, Clone, Copy)]
pub enum ShapeTarget<'g> {
    Univariate(&'g FeatureGroup),
    Bivariate(&'g FeatureGroup, &'g FeatureGroup),
}

/// Improvement of the common refinement of two partitions over the better
/// of the two: `min(L₁, L₂) − L(intersections)`.
pub fn score_pair(node: &NodeData, a: (&[usize], usize), b: (&[usize], usize), c: Criterion) -> f64 {
    let (ba, ka) = a;
    let (bb, kb) = b;
    let la = node.partition_cost(ba, ka, c);
    let lb = node.partition_cost(bb, kb, c);
    let joint: Vec<usize> = ba.iter().zip(bb).map(|(&x, &y)| x * kb + y).collect();
    la.min(lb) - node.partition_cost(&joint, ka * kb, c)
}

/// The chosen split of a node.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub shape: ShapeFunction,
    pub objective: f64,
    /// Objective plus the arity penalty `λ(k − 2)` and, when bivariate,
    /// the pairwise penalty `γ`.
    pub penalized: f64,
    pub branch_of: Vec<usize>,
    /// Feature pairs that were fitted bivariately at this node.
    pub candidate_pairs: Vec<(usize, usize)>,
}

impl SplitResult {
    /// Node positions per branch.
    pub fn partitions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.shape.arity];
        for (p, &b) in self.branch_of.iter().enumerate() {
            out[b].push(p);
        }
        out
    }
}

/// Which pairs to consider bivariately.
#[derive(Debug, Clone, Copy)]
pub enum PairSource<'a> {
    /// The `δ` ranking over all numeric pairs, keeping the top `P`.
    Ranked,
    /// Exactly these pairs (by original feature index).
    Fixed(&'a [(usize, usize)]),
}

/// Best univariate shape function over all feature groups, optionally
/// challenged by bivariate fits on the most promising numeric pairs.
///
/// Returns `None` when no feature admits a split.
pub fn select_split(node: &NodeData, groups: &[FeatureGroup], p: &SplitParams, seed: u64) -> Option<SplitResult> {
    select_split_with(node, groups, p, seed, PairSource::Ranked)
}

pub fn select_split_with(
    node: &NodeData,
    groups: &[FeatureGroup],
    p: &SplitParams,
    seed: u64,
    pairs: PairSource<'_>,
) -> Option<SplitResult> {
    let c = p.criterion();
    let scale = node.total_weight() as f64;
    let uni: Vec<Option<ShapeFit>> = groups
        .par_iter()
        .map(|g| fit_shape_function(node, ShapeTarget::Univariate(g), p, mix_seed(seed, g.feature as u64)))
        .collect();

    let arity_cost = |f: &ShapeFit| p.assign.branching_penalty * (f.shape.arity - 2) as f64;
    let mut best: Option<(f64, ShapeFit)> = None;
    for fit in uni.iter().flatten() {
        let pen = fit.objective + arity_cost(fit);
        if best.as_ref().is_none_or(|(b, _)| strictly_better(pen, *b, scale)) {
            best = Some((pen, fit.clone()));
        }
    }

    let chosen: Vec<(usize, usize)> = match pairs {
        PairSource::Fixed(list) => list.to_vec(),
        PairSource::Ranked if p.pair_limit > 0 => rank_pairs(node, groups, &uni, c)
            .into_iter()
            .filter(|&(d, _, _)| d > TIE_EPS * scale.max(1.0))
            .take(p.pair_limit)
            .map(|(_, a, b)| (a, b))
            .collect(),
        PairSource::Ranked => Vec::new(),
    };
    let by_feature = |f: usize| groups.iter().find(|g| g.feature == f);
    let bi: Vec<Option<ShapeFit>> = chosen
        .par_iter()
        .map(|&(a, b)| {
            let (ga, gb) = (by_feature(a)?, by_feature(b)?);
            if !(ga.numeric && gb.numeric) {
                return None;
            }
            let s = mix_seed(mix_seed(seed, (a as u64) << 32 | b as u64), 0xB1);
            fit_shape_function(node, ShapeTarget::Bivariate(ga, gb), p, s)
        })
        .collect();
    for fit in bi.into_iter().flatten() {
        let pen = fit.objective + arity_cost(&fit) + p.pairwise_penalty;
        if best.as_ref().is_none_or(|(b, _)| strictly_better(pen, *b, scale)) {
            best = Some((pen, fit));
        }
    }
    best.map(|(penalized, fit)| SplitResult {
        objective: fit.objective,
        penalized,
        shape: fit.shape,
        branch_of: fit.branch_of,
        candidate_pairs: chosen,
    })
}

/// All numeric pairs with a univariate fit on both sides, sorted by
/// decreasing `δ` (ties: lower feature indices first).
pub fn rank_pairs(
    node: &NodeData,
    groups: &[FeatureGroup],
    uni: &[Option<ShapeFit>],
    c: Criterion,
) -> Vec<(f64, usize, usize)> {
    let fitted: Vec<(usize, &ShapeFit)> = groups
        .iter()
        .zip(uni)
        .filter_map(|(g, f)| f.as_ref().filter(|_| g.numeric).map(|f| (g.feature, f)))
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..fitted.len() {
        for j in i + 1..fitted.len() {
            pairs.push((i, j));
        }
    }
    let mut scored: Vec<(f64, usize, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (fa, a) = fitted[i];
            let (fb, b) = fitted[j];
            let d = score_pair(node, (&a.branch_of, a.shape.arity), (&b.branch_of, b.shape.arity), c);
            (d, fa, fb)
        })
        .collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    scored
}
