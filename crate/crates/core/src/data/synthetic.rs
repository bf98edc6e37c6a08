use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::objectives::QueryGroups;

/// Symmetric label noise: a fraction of labels redrawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub num_classes: usize,
    pub seed: u64,
}

/// Rows whose labels [`inject_label_noise`] redraws for `n` labels.
pub fn label_noise_indices(n: usize, spec: &NoiseSpec) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_sample(n, spec, &mut rng)
}

fn noise_sample(n: usize, spec: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = (spec.fraction * n as f64).round() as usize;
    sample(rng, n, m.min(n)).into_vec()
}

/// Redraws exactly `round(fraction·N)` labels, chosen uniformly without
/// replacement, from `[0, num_classes)`. A redraw may hit the old label.
pub fn inject_label_noise(labels: &[f64], spec: &NoiseSpec) -> Result<DenseVector> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(Error::InvalidConfig(format!(
            "noise fraction {} outside [0, 1]",
            spec.fraction
        )));
    }
    if spec.num_classes == 0 {
        return Err(Error::InvalidConfig("noise needs at least one class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = labels.to_vec();
    for i in noise_sample(labels.len(), spec, &mut rng) {
        out[i] = rng.random_range(0..spec.num_classes) as f64;
    }
    Ok(out.into())
}

/// Uniform query subsample without replacement, in sampled order.
pub fn sample_queries(ds: &Dataset, n_queries: usize, seed: u64) -> Result<Dataset> {
    let available = ds
        .groups()
        .ok_or_else(|| Error::InvalidGroups("dataset has no query groups".into()))?
        .num_groups();
    if n_queries > available {
        return Err(Error::TooFewQueries {
            requested: n_queries,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, available, n_queries).into_vec();
    ds.select_groups(&picked)
}

/// Gaussian-blob classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub classes: usize,
    /// Distance between any two class means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub noise_fraction: f64,
    /// Factor applied to every input after sampling.
    #[serde(default = "default_input_scale")]
    pub input_scale: f64,
    pub seed: u64,
}

fn default_separation() -> f64 {
    1.0
}

fn default_input_scale() -> f64 {
    1.0
}

/// `n` training and `n` test points from unit-covariance blobs whose means
/// are one unit apart; only the training labels are noised.
pub fn make_synthetic(
    n: usize,
    d: usize,
    classes: usize,
    noise_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    make_synthetic_with(&SyntheticSpec {
        n_train: n,
        n_test: n,
        dim: d,
        classes,
        separation: 1.0,
        noise_fraction,
        input_scale: 1.0,
        seed,
    })
}

pub fn make_synthetic_with(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.dim == 0 || spec.classes == 0 {
        return Err(Error::InvalidConfig(
            "synthetic task needs dim >= 1 and classes >= 1".into(),
        ));
    }
    if !(spec.input_scale.is_finite() && spec.input_scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "input_scale must be positive, got {}",
            spec.input_scale
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // means on scaled basis vectors are pairwise `separation` apart; beyond
    // `dim` classes fall back to random directions of the same radius
    let radius = spec.separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|c| {
            let mut m = vec![0.0; spec.dim];
            if c < spec.dim {
                m[c] = radius;
            } else {
                let g: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = crate::numerics::norm(&g).max(f64::MIN_POSITIVE);
                m.iter_mut().zip(g).for_each(|(v, x)| *v = radius * x / n);
            }
            m
        })
        .collect();

    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Result<(DenseMatrix, Vec<f64>)> {
        let mut x = Vec::with_capacity(n * spec.dim);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..spec.classes);
            for mu in &means[c] {
                x.push(spec.input_scale * (mu + rng.sample::<f64, _>(StandardNormal)));
            }
            y.push(c as f64);
        }
        Ok((DenseMatrix::from_vec(n, spec.dim, x)?, y))
    };
    let (xtr, ytr) = draw(spec.n_train, &mut rng)?;
    let (xte, yte) = draw(spec.n_test, &mut rng)?;
    let noisy = inject_label_noise(
        &ytr,
        &NoiseSpec {
            fraction: spec.noise_fraction,
            num_classes: spec.classes,
            seed: rng.random(),
        },
    )?;
    Ok((
        Dataset::new("synthetic-train", xtr, noisy, None)?,
        Dataset::new("synthetic-test", xte, yte.into(), None)?,
    ))
}

/// Ranking task with graded labels from a hidden linear scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingSpec {
    pub train_queries: usize,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub dim: usize,
    /// Standard deviation of the noise added to the hidden score.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Factor applied to every document after sampling.
    #[serde(default = "default_input_scale")]
    pub input_scale: f64,
    pub seed: u64,
}

fn default_label_noise() -> f64 {
    0.5
}

/// Documents are standard normal; grades in `0..=4` are quantiles of a
/// noisy hidden score `w·x + ε`.
pub fn make_synthetic_ranking(spec: &RankingSpec) -> Result<(Dataset, Dataset)> {
    if spec.dim == 0 || spec.docs_per_query == 0 {
        return Err(Error::InvalidConfig(
            "ranking task needs dim >= 1 and docs_per_query >= 1".into(),
        ));
    }
    if !(spec.input_scale.is_finite() && spec.input_scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "input_scale must be positive, got {}",
            spec.input_scale
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
    let wn = crate::numerics::norm(&w).max(f64::MIN_POSITIVE);
    // cut points of the standard normal at 50/75/90/97 percent
    let cuts = [0.0, 0.674, 1.2816, 1.8808];
    let build = |queries: usize, name: &str, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let n = queries * spec.docs_per_query;
        let mut x = Vec::with_capacity(n * spec.dim);
        let mut y = Vec::with_capacity(n);
        let scale = (1.0 + spec.label_noise.powi(2)).sqrt();
        for _ in 0..n {
            let row: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
            let eps: f64 = rng.sample(StandardNormal);
            let s = (crate::numerics::dot(&row, &w) / wn + spec.label_noise * eps) / scale;
            y.push(cuts.iter().filter(|&&c| s > c).count() as f64);
            x.extend(row.iter().map(|v| spec.input_scale * v));
        }
        let groups = if queries > 0 {
            Some(QueryGroups::from_sizes(&vec![spec.docs_per_query; queries])?)
        } else {
            None
        };
        Dataset::new(name, DenseMatrix::from_vec(n, spec.dim, x)?, y.into(), groups)
    };
    let train = build(spec.train_queries, "ranking-train", &mut rng)?;
    let test = build(spec.test_queries, "ranking-test", &mut rng)?;
    Ok((train, test))
}
