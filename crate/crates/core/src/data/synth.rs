//! Synthetic datasets with known structure.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Column, Dataset, FeatureSchema, Targets};

/// Half-width of the plus-sign bands inside the `[-1, 1]²` box.
pub const PLUS_BAND: f64 = 1.0 / 3.0;

/// Plus-sign label: 1 inside the cross `|x1| ≤ t or |x2| ≤ t`, 0 in the
/// four corners.
pub fn plus_sign_label(x1: f64, x2: f64) -> usize {
    usize::from(x1.abs() <= PLUS_BAND || x2.abs() <= PLUS_BAND)
}

/// Two-feature plus-sign dataset on `[-1, 1]²`.
///
/// The box is cut into a 3×3 grid at `±t`; every cell (the centre, the four
/// arms and the four corners) receives `n_per_arm` samples. Coordinates are
/// drawn uniformly per band and shared across the cells of a band row or
/// column (paired by a random permutation), so every x1 value occurs once
/// in each cell of its column and the marginal class mix of any x1 (or x2)
/// interval equals the population mix exactly. Sampling noise then cannot
/// masquerade as structure along either axis.
pub fn gen_plus_sign(n_per_arm: usize, seed: u64) -> Dataset {
    assert!(n_per_arm >= 1, "n_per_arm must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = [-1.0, -PLUS_BAND, PLUS_BAND, 1.0];
    let mut band = |b: usize| -> Vec<f64> { (0..n_per_arm).map(|_| rng.gen_range(edges[b]..edges[b + 1])).collect() };
    let bx: Vec<Vec<f64>> = (0..3).map(&mut band).collect();
    let by: Vec<Vec<f64>> = (0..3).map(&mut band).collect();
    let (mut xs, mut ys, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..3 {
        for j in 0..3 {
            let mut perm: Vec<usize> = (0..n_per_arm).collect();
            perm.shuffle(&mut rng);
            for (t, &u) in perm.iter().enumerate() {
                let (x1, x2) = (bx[i][t], by[j][u]);
                xs.push(x1);
                ys.push(x2);
                labels.push(plus_sign_label(x1, x2));
            }
        }
    }
    binary_dataset(&["x1", "x2"], vec![xs, ys], labels)
}

/// ω-Bars label: `[0, 1]` is cut into `ω + 2` equal-width intervals with
/// alternating labels, the first interval labelled 0.
pub fn bars_label(omega: usize, x: f64) -> usize {
    let m = omega + 2;
    let cell = ((x * m as f64).floor() as isize).clamp(0, m as isize - 1) as usize;
    cell % 2
}

/// Interior label boundaries `j / (ω + 2)`, `j = 1..=ω+1`.
pub fn bars_boundaries(omega: usize) -> Vec<f64> {
    let m = (omega + 2) as f64;
    (1..=omega + 1).map(|j| j as f64 / m).collect()
}

fn bars_xs(omega: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let width = 1.0 / (omega + 2) as f64;
    let mut xs = Vec::with_capacity(n);
    for b in bars_boundaries(omega) {
        xs.push(b - 0.1 * width);
        xs.push(b + 0.1 * width);
    }
    while xs.len() < n {
        xs.push(rng.gen_range(0.0..1.0));
    }
    xs
}

/// One-feature ω-Bars classification dataset on `[0, 1]`.
///
/// Two samples are forced near each of the `ω + 1` boundaries so every
/// interval is populated; the rest are uniform.
pub fn gen_bars(omega: usize, n: usize, seed: u64) -> Dataset {
    assert!(omega >= 1, "omega must be at least 1");
    assert!(n >= 10 * (omega + 2), "need at least 10·(ω+2) samples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = bars_xs(omega, n, &mut rng);
    let labels = xs.iter().map(|&x| bars_label(omega, x)).collect();
    binary_dataset(&["x"], vec![xs], labels)
}

/// Regression counterpart: `y = cos(2πωx) + N(0, noise²)`-style noise
/// (uniform noise of matching variance).
pub fn gen_bars_regression(omega: usize, n: usize, noise: f64, seed: u64) -> Dataset {
    assert!(omega >= 1 && n >= 10 * (omega + 2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = bars_xs(omega, n, &mut rng);
    let half = noise * 3f64.sqrt();
    let ys = xs
        .iter()
        .map(|&x| {
            let eps = if half > 0.0 { rng.gen_range(-half..half) } else { 0.0 };
            (2.0 * std::f64::consts::PI * omega as f64 * x).cos() + eps
        })
        .collect();
    let schema = FeatureSchema::numeric(["x"]).unwrap();
    Dataset::new(schema, vec![Column::Numeric(xs)], Targets::Real(ys), "y").unwrap()
}

/// XOR of the signs of the first two features; `n_noise` further uniform
/// features carry no signal.
pub fn gen_xor(n: usize, n_noise: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2 + n_noise;
    let mut cols = vec![Vec::with_capacity(n); d];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        for c in cols.iter_mut() {
            c.push(rng.gen_range(-1.0..1.0));
        }
        let (a, b) = (cols[0].last().unwrap(), cols[1].last().unwrap());
        labels.push(usize::from((*a > 0.0) != (*b > 0.0)));
    }
    let names: Vec<String> = (0..d).map(|i| format!("x{}", i + 1)).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    binary_dataset(&refs, cols, labels)
}

/// Random classification data: `d` features, a label that depends on a few
/// random axis-aligned and non-monotone rules plus label noise. Values are
/// drawn from a coarse grid so ties occur.
pub fn gen_random_classification(n: usize, d: usize, n_classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = rng.gen_range(5..40) as f64;
    let cols: Vec<Vec<f64>> =
        (0..d).map(|_| (0..n).map(|_| (rng.gen_range(0.0..1.0) * levels).floor() / levels).collect()).collect();
    let freq: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
    let phase: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
    let noise = rng.gen_range(0.0..0.3);
    let labels = (0..n)
        .map(|i| {
            if rng.gen_bool(noise) {
                return rng.gen_range(0..n_classes);
            }
            let s: f64 = (0..d.min(3))
                .map(|j| (std::f64::consts::TAU * (freq[j] * cols[j][i] + phase[j])).sin())
                .sum();
            let u = (s / d.min(3) as f64 + 1.0) / 2.0;
            ((u * n_classes as f64).floor() as usize).min(n_classes - 1)
        })
        .collect();
    let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let schema = FeatureSchema::numeric(names).unwrap();
    let targets = Targets::Classes { labels, names: (0..n_classes).map(|c| c.to_string()).collect() };
    Dataset::new(schema, cols.into_iter().map(Column::Numeric).collect(), targets, "y").unwrap()
}

fn binary_dataset(names: &[&str], cols: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
    let schema = FeatureSchema::numeric(names.iter().copied()).unwrap();
    let targets = Targets::Classes { labels, names: vec!["0".into(), "1".into()] };
    Dataset::new(schema, cols.into_iter().map(Column::Numeric).collect(), targets, "y").unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_sign_labels() {
        assert_eq!(plus_sign_label(0.0, 0.9), 1);
        assert_eq!(plus_sign_label(0.9, 0.9), 0);
        assert_eq!(plus_sign_label(-0.9, 0.1), 1);
        let ds = gen_plus_sign(10, 3);
        assert_eq!(ds.n_rows(), 90);
        if let Targets::Classes { labels, .. } = ds.targets() {
            assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 40);
        }
    }

    #[test]
    fn bars_formula_examples() {
        assert_eq!(bars_label(1, 0.5), 1);
        assert_eq!(bars_label(1, 0.0), 0);
        assert_eq!(bars_label(1, 1.0), 0);
    }

    fn runs(ds: &Dataset) -> usize {
        let Column::Numeric(xs) = &ds.columns()[0] else { unreachable!() };
        let Targets::Classes { labels, .. } = ds.targets() else { unreachable!() };
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        1 + idx.windows(2).filter(|w| labels[w[0]] != labels[w[1]]).count()
    }

    #[test]
    fn bars_has_omega_plus_two_runs() {
        assert_eq!(runs(&gen_bars(5, 200, 1)), 7);
        for omega in 1..=9 {
            for seed in 0..3 {
                assert_eq!(runs(&gen_bars(omega, 10 * (omega + 2), seed)), omega + 2);
            }
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(gen_xor(50, 2, 9), gen_xor(50, 2, 9));
        assert_ne!(gen_xor(50, 2, 9), gen_xor(50, 2, 10));
        assert_eq!(gen_random_classification(40, 3, 3, 1), gen_random_classification(40, 3, 3, 1));
    }
}
