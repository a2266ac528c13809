//! Executable checks of the method's guarantees: the ω-Bars size gap,
//! shape splits dominating threshold splits, assignment search quality and
//! split-time scaling.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assign::{coord_descent, weighted_kmeans, Assignment};
use crate::data::synth::{gen_bars, gen_bars_regression, gen_random_classification};
use crate::data::{one_hot_view, Dataset, EncodedMatrix};
use crate::impurity::{strictly_better, Criterion, TargetStats};
use crate::induce::{fit, fit_cart, FitError, Hyperparams};
use crate::inner_tree::BinTable;
use crate::mix_seed;
use crate::node::NodeData;
use crate::split::select_split;

/// Node counts of a one-node shape tree and an unbounded CART tree on
/// ω-Bars, with their training accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub omega: usize,
    pub sgt_nodes: usize,
    pub cart_nodes: usize,
    pub sgt_accuracy: f64,
    pub cart_accuracy: f64,
}

impl GapResult {
    /// Both trees fit perfectly, the shape tree with one node and CART with
    /// at least `ω + 1`.
    pub fn holds(&self) -> bool {
        self.sgt_accuracy == 1.0 && self.cart_accuracy == 1.0 && self.sgt_nodes == 1 && self.cart_nodes > self.omega
    }
}

/// Fits both trees on `gen_bars(omega)`; `hp.inner_max_leaf_nodes` must
/// be at least `ω + 2`.
pub fn theorem2_gap(omega: usize, hp: &Hyperparams) -> Result<GapResult, FitError> {
    if hp.inner_max_leaf_nodes < omega + 2 {
        return Err(FitError::Invalid(format!("inner leaf budget must be at least {}", omega + 2)));
    }
    let ds = gen_bars(omega, (20 * (omega + 2)).max(200), hp.seed);
    let sgt = fit(&ds, &Hyperparams { max_depth: 1, ..*hp })?;
    let cart = fit_cart(&ds, &Hyperparams { max_depth: Hyperparams::UNLIMITED_DEPTH, ..*hp })?;
    Ok(GapResult {
        omega,
        sgt_nodes: sgt.stats().internal_nodes,
        cart_nodes: cart.stats().internal_nodes,
        sgt_accuracy: sgt.accuracy(&ds).expect("own data"),
        cart_accuracy: cart.accuracy(&ds).expect("own data"),
    })
}

/// Lowest weighted impurity of any single threshold split of the node, by
/// direct enumeration of every midpoint on every column.
pub fn exhaustive_threshold_cost(node: &NodeData, c: Criterion) -> f64 {
    let mut best = node.cost(c);
    for col in 0..node.matrix.width() {
        let mut vals: Vec<f64> = (0..node.len()).map(|p| node.value(p, col)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let branch: Vec<usize> = (0..node.len()).map(|p| usize::from(node.value(p, col) > t)).collect();
            best = best.min(node.partition_cost(&branch, 2, c));
        }
    }
    best
}

/// Largest observed excess of the best threshold gain over the shape
/// split gain.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceResult {
    pub trials: usize,
    pub max_violation: f64,
}

/// Random classification data of `n` rows, `d` features and `classes`
/// classes per trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Spec {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub criterion: Criterion,
}

/// Compares the root gain of a binary shape split with the best threshold
/// gain over `trials` random datasets.
pub fn lemma1_harness(trials: usize, spec: &Lemma1Spec, seed: u64) -> DominanceResult {
    let hp = Hyperparams { criterion: spec.criterion, ..Hyperparams::default() };
    let sp = hp.split_params();
    let violations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = mix_seed(seed, t as u64);
            let ds = gen_random_classification(spec.n, spec.d, spec.classes, s);
            let m = one_hot_view(&ds);
            let node = NodeData::root(&m, ds.targets());
            let parent = node.cost(spec.criterion);
            let cart_gain = parent - exhaustive_threshold_cost(&node, spec.criterion);
            let sgt_gain = parent - select_split(&node, m.groups(), &sp, s).map_or(parent, |r| r.objective);
            cart_gain - sgt_gain
        })
        .collect();
    DominanceResult { trials, max_violation: violations.into_iter().fold(0.0, f64::max) }
}

/// Regression analogue: root SSE of a depth-1 shape tree against a depth-1
/// CART tree on noisy cosine bars, one dataset per seed.
pub fn regression_dominance(seeds: usize, omega: usize, n: usize, noise: f64) -> DominanceResult {
    let hp = Hyperparams { criterion: Criterion::Mse, max_depth: 1, ..Hyperparams::default() };
    let violations: Vec<f64> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let ds = gen_bars_regression(omega, n, noise, s);
            let sse = |m: &crate::model::SgtModel| m.mse(&ds).expect("own data") * n as f64;
            let sgt = fit(&ds, &Hyperparams { seed: s, ..hp }).expect("valid");
            let cart = fit_cart(&ds, &hp).expect("valid");
            sse(&sgt) - sse(&cart)
        })
        .collect();
    DominanceResult { trials: seeds, max_violation: violations.into_iter().fold(0.0, f64::max) }
}

/// Outcome of the assignment search on random bin tables.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub trials: usize,
    /// Outputs that a single-bin move could still improve.
    pub not_local_optimum: usize,
    /// Outputs worse than either initialisation.
    pub worse_than_init: usize,
    /// Outputs matching the exhaustive optimum within 1e-9.
    pub global_matches: usize,
}

impl OracleResult {
    pub fn match_rate(&self) -> f64 {
        self.global_matches as f64 / self.trials as f64
    }
}

/// Exhaustive minimum over every labelling of bins into `k` branches.
pub fn brute_force_assignment(bins: &BinTable, k: usize, c: Criterion) -> f64 {
    fn go(l: usize, bins: &BinTable, parts: &mut [TargetStats], c: Criterion, best: &mut f64) {
        if l == bins.len() {
            *best = best.min(parts.iter().map(|s| s.weighted_impurity(c)).sum());
            return;
        }
        for b in 0..parts.len() {
            parts[b].merge_in(&bins.bins[l]).expect("same shape");
            go(l + 1, bins, parts, c, best);
            parts[b].remove_in(&bins.bins[l]).expect("just merged");
        }
    }
    let mut parts = vec![bins.bins[0].empty_like(); k];
    let mut best = f64::INFINITY;
    go(0, bins, &mut parts, c, &mut best);
    best
}

fn random_bins(rng: &mut ChaCha8Rng) -> (BinTable, usize) {
    loop {
        let l = rng.gen_range(2..=10);
        let classes = rng.gen_range(2..=3);
        let k = rng.gen_range(2..=3);
        let bins: Vec<TargetStats> = (0..l)
            .map(|_| {
                let counts: Vec<u64> = (0..classes).map(|_| rng.gen_range(0..8)).collect();
                TargetStats::Class { weight: counts.iter().sum(), counts }
            })
            .collect();
        let table = BinTable { bins };
        if table.total().weight() > 0 {
            return (table, k);
        }
    }
}

/// Runs k-means and an in-order contiguous initialisation (what a binning
/// tree's root split provides), descends from the better one, and checks
/// the result against brute force.
pub fn assignment_oracle(trials: usize, seed: u64, c: Criterion) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(BinTable, usize, u64)> = (0..trials)
        .map(|t| {
            let (b, k) = random_bins(&mut rng);
            (b, k, mix_seed(seed, t as u64))
        })
        .collect();
    let outcomes: Vec<(bool, bool, bool)> = cases
        .par_iter()
        .map(|(bins, k, s)| {
            let k = *k;
            let scale = bins.total().weight() as f64;
            let wkm = weighted_kmeans(bins, k, 100, *s, c);
            let contiguous = Assignment::new((0..bins.len()).map(|l| l * k / bins.len()).collect(), k, bins, c);
            let from_wkm = coord_descent(&wkm, bins, c, 100, *s);
            let from_cut = coord_descent(&contiguous, bins, c, 100, *s);
            let out = if strictly_better(from_cut.objective, from_wkm.objective, scale) { from_cut } else { from_wkm };
            let opt = brute_force_assignment(bins, k, c);
            (
                out.is_local_optimum(bins, c),
                out.objective <= wkm.objective.min(contiguous.objective) + 1e-12,
                (out.objective - opt).abs() <= 1e-9,
            )
        })
        .collect();
    OracleResult {
        trials,
        not_local_optimum: outcomes.iter().filter(|o| !o.0).count(),
        worse_than_init: outcomes.iter().filter(|o| !o.1).count(),
        global_matches: outcomes.iter().filter(|o| o.2).count(),
    }
}

/// Median root-split times and their ratios under doubling.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityResult {
    pub base_n: usize,
    pub base_d: usize,
    pub base_secs: f64,
    pub double_n_secs: f64,
    pub double_d_secs: f64,
    pub ternary_secs: f64,
}

impl ComplexityResult {
    pub fn n_ratio(&self) -> f64 {
        self.double_n_secs / self.base_secs
    }

    pub fn d_ratio(&self) -> f64 {
        self.double_d_secs / self.base_secs
    }

    pub fn k_ratio(&self) -> f64 {
        self.ternary_secs / self.base_secs
    }

    pub fn within(&self, bound: f64) -> bool {
        self.n_ratio() <= bound && self.d_ratio() <= bound
    }
}

fn median_split_secs(ds: &Dataset, hp: &Hyperparams, reps: usize) -> f64 {
    let m: EncodedMatrix = one_hot_view(ds);
    let node = NodeData::root(&m, ds.targets());
    let sp = hp.split_params();
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(select_split(&node, m.groups(), &sp, hp.seed));
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

/// Times the root split at `(N, D)`, `(2N, D)`, `(N, 2D)` and with `K = 3`.
/// Runs single-threaded so ratios reflect work, not core count.
pub fn complexity_smoke(base_n: usize, base_d: usize, reps: usize) -> ComplexityResult {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    pool.install(|| {
        let hp = Hyperparams { inner_max_leaf_nodes: 8, ..Hyperparams::default() };
        // One generator call per size so the doubled datasets share structure.
        let wide = gen_random_classification(2 * base_n, 2 * base_d, 3, 17);
        let cols = |d: usize| -> Vec<usize> { (0..d).collect() };
        let base = project(&wide.subset(&(0..base_n).collect::<Vec<_>>()), &cols(base_d));
        let double_n = project(&wide, &cols(base_d));
        let double_d = wide.subset(&(0..base_n).collect::<Vec<_>>());
        ComplexityResult {
            base_n,
            base_d,
            base_secs: median_split_secs(&base, &hp, reps),
            double_n_secs: median_split_secs(&double_n, &hp, reps),
            double_d_secs: median_split_secs(&double_d, &hp, reps),
            ternary_secs: median_split_secs(&base, &Hyperparams { max_arity: 3, ..hp }, reps),
        }
    })
}

/// Keeps only the listed features of a numeric dataset.
fn project(ds: &Dataset, features: &[usize]) -> Dataset {
    let names: Vec<String> = features.iter().map(|&f| ds.schema().features()[f].name.clone()).collect();
    let schema = crate::data::FeatureSchema::numeric(names).expect("unique names");
    let columns = features.iter().map(|&f| ds.columns()[f].clone()).collect();
    Dataset::new(schema, columns, ds.targets().clone(), ds.target_name()).expect("same rows")
}

/// Which harness to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Theorem2,
    Oracle,
    Complexity,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma1" => Ok(Suite::Lemma1),
            "theorem2" => Ok(Suite::Theorem2),
            "oracle" => Ok(Suite::Oracle),
            "complexity" => Ok(Suite::Complexity),
            other => Err(format!("unknown suite '{other}' (expected lemma1, theorem2, oracle or complexity)")),
        }
    }
}

/// A finished harness run: human-readable text, `key=value` lines, and
/// whether its assertions held.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub text: String,
    pub key_values: String,
    pub passed: bool,
}

/// Runs a suite with its standard settings. Timing never fails unless
/// `assert_timing` is set.
pub fn run_suite(suite: Suite, seed: u64, assert_timing: bool) -> SuiteReport {
    let mut text = String::new();
    let mut kv = String::new();
    let passed = match suite {
        Suite::Lemma1 => {
            let mut worst: f64 = 0.0;
            for criterion in [Criterion::Gini, Criterion::Entropy] {
                for classes in [2, 3] {
                    let spec = Lemma1Spec { n: 200, d: 5, classes, criterion };
                    let r = lemma1_harness(200, &spec, seed);
                    let _ = writeln!(text, "{} C={classes}: {} trials, max violation {:.1e}", criterion.name(), r.trials, r.max_violation);
                    worst = worst.max(r.max_violation);
                }
            }
            let _ = writeln!(text, "max violation {worst:.1e}");
            let _ = writeln!(kv, "max_violation={worst:e}");
            worst <= 1e-9
        }
        Suite::Theorem2 => {
            let mut ok = true;
            for omega in [1, 3, 5, 8] {
                let hp = Hyperparams { inner_max_leaf_nodes: 16.max(omega + 2), seed, ..Hyperparams::default() };
                match theorem2_gap(omega, &hp) {
                    Ok(g) => {
                        let _ = writeln!(
                            text,
                            "omega={omega}: sgt nodes {} (acc {:.3}), cart nodes {} (acc {:.3})",
                            g.sgt_nodes, g.sgt_accuracy, g.cart_nodes, g.cart_accuracy
                        );
                        let _ = writeln!(kv, "omega{omega}_sgt_nodes={}\nomega{omega}_cart_nodes={}", g.sgt_nodes, g.cart_nodes);
                        ok &= g.holds();
                    }
                    Err(e) => {
                        let _ = writeln!(text, "omega={omega}: {e}");
                        ok = false;
                    }
                }
            }
            ok
        }
        Suite::Oracle => {
            let mut ok = true;
            for c in [Criterion::Gini, Criterion::Entropy] {
                let r = assignment_oracle(200, seed, c);
                let _ = writeln!(
                    text,
                    "{}: {} tables, {} not locally optimal, {} worse than init, {:.1}% globally optimal",
                    c.name(),
                    r.trials,
                    r.not_local_optimum,
                    r.worse_than_init,
                    100.0 * r.match_rate()
                );
                let _ = writeln!(
                    kv,
                    "{0}_not_local_optimum={1}\n{0}_worse_than_init={2}\n{0}_match_rate={3}",
                    c.name(),
                    r.not_local_optimum,
                    r.worse_than_init,
                    r.match_rate()
                );
                ok &= r.not_local_optimum == 0 && r.worse_than_init == 0 && r.match_rate() >= 0.9;
            }
            ok
        }
        Suite::Complexity => {
            let r = complexity_smoke(10_000, 10, 5);
            let _ = writeln!(
                text,
                "N={} D={}: base {:.4}s, 2N ratio {:.2}, 2D ratio {:.2}, K=3 ratio {:.2}",
                r.base_n,
                r.base_d,
                r.base_secs,
                r.n_ratio(),
                r.d_ratio(),
                r.k_ratio()
            );
            let _ = writeln!(kv, "n_ratio={}\nd_ratio={}\nk_ratio={}", r.n_ratio(), r.d_ratio(), r.k_ratio());
            !assert_timing || r.within(2.5)
        }
    };
    SuiteReport { text, key_values: kv, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::tests::brute_force;

    #[test]
    fn recursive_brute_force_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (bins, k) = random_bins(&mut rng);
            if bins.len() > 7 {
                continue;
            }
            let a = brute_force_assignment(&bins, k, Criterion::Gini);
            assert!((a - brute_force(&bins, k, Criterion::Gini)).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_labels_have_no_gain() {
        let ds = Dataset::numeric_classification(&["a"], &[vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 1], 2).unwrap();
        let m = one_hot_view(&ds);
        let node = NodeData::root(&m, ds.targets());
        assert_eq!(exhaustive_threshold_cost(&node, Criterion::Gini), 0.0);
    }

    #[test]
    fn small_harness_runs() {
        let spec = Lemma1Spec { n: 60, d: 3, classes: 3, criterion: Criterion::Entropy };
        assert!(lemma1_harness(10, &spec, 1).max_violation <= 1e-9);
        let g = theorem2_gap(2, &Hyperparams { inner_max_leaf_nodes: 8, ..Hyperparams::default() }).unwrap();
        assert!(g.holds(), "{g:?}");
        assert!(theorem2_gap(9, &Hyperparams { inner_max_leaf_nodes: 8, ..Hyperparams::default() }).is_err());
    }
}
