//! Mapping bins to branches.
//!
//! Given per-bin target statistics, find a labelling of bins into `k`
//! branches that minimises the weighted impurity of the merged branches.
//! Initialisation comes from weighted k-means over bin distributions (or
//! the binning tree's root split); coordinate descent then moves one bin at
//! a time.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::impurity::{strictly_better, Criterion, TargetStats};
use crate::inner_tree::BinTable;
use crate::mix_seed;

/// A bin → branch labelling and its weighted impurity.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub branches: Vec<usize>,
    pub arity: usize,
    pub objective: f64,
}

impl Assignment {
    pub fn new(branches: Vec<usize>, arity: usize, bins: &BinTable, c: Criterion) -> Self {
        assert_eq!(branches.len(), bins.len());
        assert!(branches.iter().all(|&b| b < arity), "branch out of range");
        let mut a = Assignment { branches, arity, objective: 0.0 };
        a.objective = a.recompute_objective(bins, c);
        a
    }

    pub fn branch_stats(&self, bins: &BinTable) -> Vec<TargetStats> {
        let mut out = vec![bins.bins[0].empty_like(); self.arity];
        for (b, s) in self.branches.iter().zip(&bins.bins) {
            out[*b].merge_in(s).expect("bins share a shape");
        }
        out
    }

    pub fn recompute_objective(&self, bins: &BinTable, c: Criterion) -> f64 {
        self.branch_stats(bins).iter().map(|s| s.weighted_impurity(c)).sum()
    }

    /// Branches holding non-zero weight.
    pub fn effective_arity(&self, bins: &BinTable) -> usize {
        self.branch_stats(bins).iter().filter(|s| !s.is_empty()).count()
    }

    /// Drops branches without weight and renumbers the rest in order.
    /// Zero-weight bins follow their nearest weighted bin.
    pub fn compacted(&self, bins: &BinTable, c: Criterion) -> Assignment {
        let stats = self.branch_stats(bins);
        let mut map = vec![usize::MAX; self.arity];
        let mut next = 0;
        for (b, s) in stats.iter().enumerate() {
            if !s.is_empty() {
                map[b] = next;
                next += 1;
            }
        }
        let mut branches: Vec<usize> = self.branches.iter().map(|&b| map[b]).collect();
        fill_zero_weight_bins(&mut branches, bins);
        Assignment::new(branches, next.max(1), bins, c)
    }

    /// True when no single-bin move lowers the objective by more than the
    /// tie tolerance.
    pub fn is_local_optimum(&self, bins: &BinTable, c: Criterion) -> bool {
        let scale = bins.total().weight() as f64;
        for l in 0..self.branches.len() {
            if bins.bins[l].is_empty() {
                continue;
            }
            for k in 0..self.arity {
                if k == self.branches[l] {
                    continue;
                }
                let mut moved = self.clone();
                moved.branches[l] = k;
                if strictly_better(moved.recompute_objective(bins, c), self.objective, scale) {
                    return false;
                }
            }
        }
        true
    }
}

/// Coordinate-descent and k-means settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignParams {
    /// Coordinate-descent sweeps `R`.
    pub sweeps: usize,
    /// Lloyd iterations `T`.
    pub kmeans_iters: usize,
    /// Multi-way penalty `λ`, charged `λ·(k − 2)`.
    pub branching_penalty: f64,
    pub seed: u64,
}

impl Default for AssignParams {
    fn default() -> Self {
        AssignParams { sweeps: 10, kmeans_iters: 100, branching_penalty: 0.0, seed: 0 }
    }
}

/// Gives every zero-weight bin the branch of its nearest weighted bin in
/// leaf order (lower index on ties).
fn fill_zero_weight_bins(branches: &mut [usize], bins: &BinTable) {
    let weighted: Vec<usize> = (0..bins.len()).filter(|&l| !bins.bins[l].is_empty()).collect();
    if weighted.is_empty() {
        branches.iter_mut().for_each(|b| *b = 0);
        return;
    }
    for l in 0..bins.len() {
        if bins.bins[l].is_empty() {
            let nearest = *weighted.iter().min_by_key(|&&w| (w.abs_diff(l), w)).unwrap();
            branches[l] = branches[nearest];
        }
    }
}

fn point_of(s: &TargetStats) -> Vec<f64> {
    match s {
        TargetStats::Class { .. } => s.distribution(),
        TargetStats::Real { .. } => vec![s.mean()],
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(i);
            }
            u -= w;
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Weighted Lloyd clustering of bin distributions (bin means for
/// regression) into `k` groups, seeded k-means++ style.
///
/// Returns the clustering as an [`Assignment`] scored by weighted impurity.
/// With fewer weighted bins than `k`, every weighted bin gets its own
/// branch.
pub fn weighted_kmeans(bins: &BinTable, k: usize, iters: usize, seed: u64, c: Criterion) -> Assignment {
    assert!(k >= 2, "k must be at least 2");
    let idx: Vec<usize> = (0..bins.len()).filter(|&l| !bins.bins[l].is_empty()).collect();
    let mut branches = vec![0; bins.len()];
    if idx.len() <= k {
        for (rank, &l) in idx.iter().enumerate() {
            branches[l] = rank;
        }
        fill_zero_weight_bins(&mut branches, bins);
        return Assignment::new(branches, k, bins, c);
    }
    let pts: Vec<Vec<f64>> = idx.iter().map(|&l| point_of(&bins.bins[l])).collect();
    let w: Vec<f64> = idx.iter().map(|&l| bins.bins[l].weight() as f64).collect();
    let n = pts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Seeding.
    let mut chosen = vec![weighted_pick(&mut rng, &w).unwrap_or(0)];
    let mut d2: Vec<f64> = pts.iter().map(|p| dist2(p, &pts[chosen[0]])).collect();
    while chosen.len() < k {
        let score: Vec<f64> = d2.iter().zip(&w).map(|(d, w)| d * w).collect();
        let next = weighted_pick(&mut rng, &score)
            .unwrap_or_else(|| (0..n).find(|i| !chosen.contains(i)).expect("n > k"));
        chosen.push(next);
        for (i, p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &pts[next]));
        }
    }
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| pts[i].clone()).collect();
    let mut label = vec![usize::MAX; n];

    for _ in 0..iters.max(1) {
        let mut new_label: Vec<usize> = pts
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut bd = dist2(p, &centers[0]);
                for (j, cj) in centers.iter().enumerate().skip(1) {
                    let d = dist2(p, cj);
                    if d < bd {
                        bd = d;
                        best = j;
                    }
                }
                best
            })
            .collect();
        // Repair empty clusters by stealing the point farthest from its
        // centroid out of a cluster that can spare it.
        for j in 0..k {
            let sizes = count_sizes(&new_label, k);
            if sizes[j] > 0 {
                continue;
            }
            let victim = (0..n)
                .filter(|&i| sizes[new_label[i]] >= 2)
                .max_by(|&a, &b| {
                    dist2(&pts[a], &centers[new_label[a]])
                        .total_cmp(&dist2(&pts[b], &centers[new_label[b]]))
                        .then(b.cmp(&a))
                });
            if let Some(v) = victim {
                new_label[v] = j;
                centers[j] = pts[v].clone();
            }
        }
        let converged = new_label == label;
        label = new_label;
        if converged {
            break;
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let mut tot = 0.0;
            let mut acc = vec![0.0; center.len()];
            for i in (0..n).filter(|&i| label[i] == j) {
                tot += w[i];
                for (a, x) in acc.iter_mut().zip(&pts[i]) {
                    *a += w[i] * x;
                }
            }
            if tot > 0.0 {
                *center = acc.into_iter().map(|a| a / tot).collect();
            }
        }
    }
    for (i, &l) in idx.iter().enumerate() {
        branches[l] = label[i];
    }
    fill_zero_weight_bins(&mut branches, bins);
    Assignment::new(branches, k, bins, c)
}

fn count_sizes(label: &[usize], k: usize) -> Vec<usize> {
    let mut s = vec![0; k];
    for &l in label {
        s[l] += 1;
    }
    s
}

/// Up to `sweeps` passes of single-bin moves in a fresh random order each
/// pass. A bin moves only to a strictly better branch; the objective never
/// increases. Stops early after a pass without moves.
pub fn coord_descent(init: &Assignment, bins: &BinTable, c: Criterion, sweeps: usize, seed: u64) -> Assignment {
    let mut a = init.branches.clone();
    let k = init.arity;
    let mut stats = vec![bins.bins[0].empty_like(); k];
    for (b, s) in a.iter().zip(&bins.bins) {
        stats[*b].merge_in(s).expect("bins share a shape");
    }
    let mut cost: Vec<f64> = stats.iter().map(|s| s.weighted_impurity(c)).collect();
    let scale = bins.total().weight() as f64;
    let mut order: Vec<usize> = (0..bins.len()).filter(|&l| !bins.bins[l].is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..sweeps {
        order.shuffle(&mut rng);
        let mut moved = false;
        for &l in &order {
            let bin = &bins.bins[l];
            let cur = a[l];
            stats[cur].remove_in(bin).expect("bin was merged");
            let cur_without = stats[cur].weighted_impurity(c);
            let mut best = cur;
            let mut best_delta = cost[cur] - cur_without;
            for j in 0..k {
                if j == cur {
                    continue;
                }
                let delta = stats[j].weighted_impurity_with(bin, c) - cost[j];
                if strictly_better(delta, best_delta, scale) {
                    best = j;
                    best_delta = delta;
                }
            }
            if best == cur {
                stats[cur].merge_in(bin).expect("same shape");
            } else {
                cost[cur] = cur_without;
                stats[best].merge_in(bin).expect("same shape");
                cost[best] = stats[best].weighted_impurity(c);
                a[l] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Assignment::new(a, k, bins, c)
}

/// Runs k-means initialisation and coordinate descent for each
/// `k = 2..=max_arity` and returns the assignment minimising
/// `objective + λ·(k − 2)`, with `k` counted over non-empty branches and
/// ties going to the smaller arity.
///
/// At `k = 2` coordinate descent also runs from the binning tree's root
/// split; that result wins only when strictly lower.
pub fn select_arity(
    bins: &BinTable,
    root_init: Option<&Assignment>,
    max_arity: usize,
    c: Criterion,
    p: &AssignParams,
) -> Assignment {
    assert!(max_arity >= 2, "max arity must be at least 2");
    let scale = bins.total().weight() as f64;
    let mut best: Option<(f64, Assignment)> = None;
    for k in 2..=max_arity {
        let wkm = weighted_kmeans(bins, k, p.kmeans_iters, mix_seed(p.seed, 2 * k as u64), c);
        let cd_seed = mix_seed(p.seed, 2 * k as u64 + 1);
        let mut refined = coord_descent(&wkm, bins, c, p.sweeps, cd_seed);
        if let Some(r) = root_init.filter(|_| k == 2) {
            let alt = coord_descent(r, bins, c, p.sweeps, cd_seed);
            if strictly_better(alt.objective, refined.objective, scale) {
                refined = alt;
            }
        }
        let refined = refined.compacted(bins, c);
        let penalized = refined.objective + p.branching_penalty * (refined.arity.max(2) - 2) as f64;
        let replace = match &best {
            None => true,
            Some((bp, ba)) => {
                strictly_better(penalized, *bp, scale)
                    || (!strictly_better(*bp, penalized, scale) && refined.arity < ba.arity)
            }
        };
        if replace {
            best = Some((penalized, refined));
        }
    }
    best.expect("at least one arity").1
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn class_bins(rows: &[&[u64]]) -> BinTable {
        BinTable {
            bins: rows
                .iter()
                .map(|r| TargetStats::Class { counts: r.to_vec(), weight: r.iter().sum() })
                .collect(),
        }
    }

    /// Exhaustive minimum over all `k^L` labellings.
    pub(crate) fn brute_force(bins: &BinTable, k: usize, c: Criterion) -> f64 {
        let l = bins.len();
        let mut best = f64::INFINITY;
        let mut a = vec![0usize; l];
        loop {
            let obj = Assignment::new(a.clone(), k, bins, c).objective;
            best = best.min(obj);
            let mut i = 0;
            while i < l {
                a[i] += 1;
                if a[i] < k {
                    break;
                }
                a[i] = 0;
                i += 1;
            }
            if i == l {
                return best;
            }
        }
    }

    #[test]
    fn kmeans_separates_pure_bins() {
        let bins = class_bins(&[&[5, 0], &[5, 0], &[0, 5], &[0, 5]]);
        let a = weighted_kmeans(&bins, 2, 100, 1, Criterion::Gini);
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.branches[0], a.branches[1]);
        assert_ne!(a.branches[0], a.branches[2]);
    }

    #[test]
    fn kmeans_one_cluster_per_distinct_distribution() {
        let bins = class_bins(&[&[3, 1], &[6, 2], &[1, 1], &[0, 4]]);
        let a = weighted_kmeans(&bins, 3, 100, 7, Criterion::Entropy);
        let expected = Assignment::new(vec![0, 0, 1, 2], 3, &bins, Criterion::Entropy).objective;
        assert!((a.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn kmeans_one_dimensional_means() {
        // Means 0, 1, 10: the only sensible 2-clustering is {0,1} | {10}.
        let bins = BinTable {
            bins: [0.0, 1.0, 10.0].iter().map(|&y| TargetStats::from_reals(&[y])).collect(),
        };
        for seed in 0..20 {
            let a = weighted_kmeans(&bins, 2, 100, seed, Criterion::Mse);
            assert_eq!(a.branches[0], a.branches[1]);
            assert_ne!(a.branches[0], a.branches[2]);
            // Enumerating the three bipartitions: {0,1}|{10} costs 0.5.
            assert!((a.objective - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn coord_descent_fixpoint_and_recovery() {
        let bins = class_bins(&[&[1, 0], &[0, 1], &[1, 0], &[0, 1]]);
        let opt = Assignment::new(vec![0, 1, 0, 1], 2, &bins, Criterion::Gini);
        assert_eq!(coord_descent(&opt, &bins, Criterion::Gini, 10, 3), opt);
        assert_eq!(brute_force(&bins, 2, Criterion::Gini), 0.0);
        let worst = Assignment::new(vec![1, 1, 0, 0], 2, &bins, Criterion::Gini);
        assert!((worst.objective - 2.0).abs() < 1e-12);
        for seed in 0..10 {
            let out = coord_descent(&worst, &bins, Criterion::Gini, 10, seed);
            assert_eq!(out.objective, 0.0, "seed {seed}");
        }
    }

    #[test]
    fn select_arity_binary_and_penalised() {
        let bins = class_bins(&[&[4, 0, 0], &[0, 4, 0], &[0, 0, 4], &[4, 0, 0], &[0, 0, 4]]);
        let c = Criterion::Gini;
        assert_eq!(brute_force(&bins, 3, c), 0.0);
        let p = AssignParams::default();
        let three = select_arity(&bins, None, 3, c, &p);
        assert_eq!((three.arity, three.objective), (3, 0.0));
        let two = select_arity(&bins, None, 2, c, &p);
        assert_eq!(two.arity, 2);
        let big = AssignParams { branching_penalty: two.objective + 1.0, ..p };
        let penalised = select_arity(&bins, None, 3, c, &big);
        assert_eq!(penalised.arity, 2);
        assert!((penalised.objective - two.objective).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_bins_follow_neighbours() {
        let bins = class_bins(&[&[3, 0], &[0, 0], &[0, 3], &[0, 0], &[0, 0]]);
        let a = weighted_kmeans(&bins, 2, 10, 0, Criterion::Gini);
        assert_eq!(a.branches[1], a.branches[0]);
        assert_eq!(a.branches[3], a.branches[2]);
        assert_eq!(a.branches[4], a.branches[2]);
    }

    fn arb_bins() -> impl Strategy<Value = (BinTable, usize, u64)> {
        (2usize..=3, 2usize..=7, any::<u64>()).prop_flat_map(|(c, l, seed)| {
            (prop::collection::vec(prop::collection::vec(0u64..6, c), l), 2usize..=3, Just(seed)).prop_map(
                |(rows, k, seed)| {
                    let refs: Vec<&[u64]> = rows.iter().map(Vec::as_slice).collect();
                    (class_bins(&refs), k, seed)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn descent_is_monotone_and_locally_optimal((bins, k, seed) in arb_bins()) {
            prop_assume!(bins.total().weight() > 0);
            let c = Criterion::Entropy;
            let init = weighted_kmeans(&bins, k, 50, seed, c);
            let out = coord_descent(&init, &bins, c, 50, seed);
            prop_assert!(out.objective <= init.objective + 1e-9);
            prop_assert!((out.objective - out.recompute_objective(&bins, c)).abs() < 1e-9);
            prop_assert!(out.is_local_optimum(&bins, c));
            prop_assert!(out.objective >= brute_force(&bins, k, c) - 1e-9);
        }

        #[test]
        fn deterministic((bins, k, seed) in arb_bins()) {
            prop_assume!(bins.total().weight() > 0);
            let p = AssignParams { seed, ..AssignParams::default() };
            prop_assert_eq!(select_arity(&bins, None, k, Criterion::Gini, &p),
                            select_arity(&bins, None, k, Criterion::Gini, &p));
        }
    }
}
