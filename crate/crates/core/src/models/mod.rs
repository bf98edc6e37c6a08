//! Random-features linear models, two-layer networks and plain SGD.

mod linear;
mod two_layer;

pub use linear::{build_featurizer, featurize, forward_linear, init_linear, Featurizer, LinearModel};
pub use two_layer::{forward_two_layer, init_two_layer, Activation, TwoLayerCache, TwoLayerNet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{norm, DenseMatrix, DenseVector};
use crate::objectives::{loss_and_output_grad, LossKind, QueryGroups};

/// A trainable model: a forward pass over selected rows followed by a
/// gradient step that consumes the forward cache.
pub trait Model {
    type Cache;

    fn input_dim(&self) -> usize;
    fn num_outputs(&self) -> usize;
    fn num_params(&self) -> usize;
    /// All parameters, flattened layer by layer in row-major order.
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<()>;
    /// The weights whose directions the twin distance compares.
    fn last_layer(&self) -> &DenseMatrix;
    fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
    fn forward_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<(DenseMatrix, Self::Cache)>;
    /// Applies `W ← W − lr·∇` for output gradient `g`, and adds `∇` to
    /// `grad_out` (flattened as in [`Model::params`]) when given.
    fn backward_step(
        &mut self,
        x: &DenseMatrix,
        rows: &[usize],
        cache: Self::Cache,
        g: &DenseMatrix,
        lr: f64,
        grad_out: Option<&mut [f64]>,
    ) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    /// Rows per batch, or whole queries per batch under ListNet; 0 means
    /// full batch.
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// How much per-batch gradient detail an epoch keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsPolicy {
    /// Leading batches of the epoch used for the variance estimate.
    pub variance_batches: usize,
    /// Leading batches whose gradients are kept whole.
    pub retained_batches: usize,
}

impl Default for StatsPolicy {
    fn default() -> Self {
        Self {
            variance_batches: 64,
            retained_batches: 10,
        }
    }
}

impl StatsPolicy {
    pub fn none() -> Self {
        Self {
            variance_batches: 0,
            retained_batches: 0,
        }
    }
}

/// Gradient summary of one epoch.
///
/// `per_coord_mean` averages the gradients of every batch of the epoch.
/// `per_coord_var` estimates the single-sample gradient variance (the
/// variance across batches times the batch size) from the leading batches.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStats {
    pub epoch: usize,
    pub grad_norm: f64,
    pub per_coord_mean: DenseVector,
    pub per_coord_var: DenseVector,
    pub batch_grads: Vec<DenseVector>,
    pub num_batches: usize,
    /// Mean samples per batch.
    pub batch_size: f64,
    /// Mean of the batch losses seen during the epoch.
    pub mean_batch_loss: f64,
}

impl GradStats {
    /// Evidence statistic `1 − (1/D)·Σ_k B·ĝ_k²/(Σ̂_k + ε)`.
    pub fn evidence(&self, batch_size: f64) -> f64 {
        let d = self.per_coord_mean.len();
        if d == 0 {
            return f64::NAN;
        }
        let s: f64 = self
            .per_coord_mean
            .iter()
            .zip(self.per_coord_var.iter())
            .map(|(g, v)| batch_size * g * g / (v + 1e-12))
            .sum();
        1.0 - s / d as f64
    }

    /// Mean `‖g_i − g_j‖` over `pairs` distinct retained-batch pairs drawn
    /// with `seed`; `None` with fewer than two retained batches.
    pub fn disparity(&self, pairs: usize, seed: u64) -> Option<f64> {
        let n = self.batch_grads.len();
        if n < 2 || pairs == 0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        for _ in 0..pairs {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let d: f64 = self.batch_grads[i]
                .iter()
                .zip(self.batch_grads[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d.sqrt();
        }
        Some(total / pairs as f64)
    }
}

/// Batches of row indices for one epoch, in the order seeded by
/// `(shuffle_seed, epoch)`, with per-batch query groups under ListNet.
pub fn epoch_batches(
    data: &Dataset,
    loss: LossKind,
    cfg: &SgdConfig,
    epoch: usize,
) -> Result<Vec<(Vec<usize>, Option<QueryGroups>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    rng.set_stream(epoch as u64);
    if loss == LossKind::ListNet {
        let groups = data
            .groups()
            .ok_or_else(|| Error::InvalidGroups("ListNet needs query groups".into()))?;
        let mut order: Vec<usize> = (0..groups.num_groups()).collect();
        order.shuffle(&mut rng);
        let per = if cfg.batch_size == 0 { order.len() } else { cfg.batch_size };
        order
            .chunks(per.max(1))
            .map(|qs| {
                let sizes: Vec<usize> = qs.iter().map(|&q| groups.range(q).len()).collect();
                let rows = qs.iter().flat_map(|&q| groups.range(q)).collect();
                Ok((rows, Some(QueryGroups::from_sizes(&sizes)?)))
            })
            .collect()
    } else {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let per = if cfg.batch_size == 0 { order.len() } else { cfg.batch_size };
        Ok(order.chunks(per.max(1)).map(|c| (c.to_vec(), None)).collect())
    }
}

/// One SGD pass with the default [`StatsPolicy`].
pub fn sgd_epoch<M: Model>(
    model: &mut M,
    data: &Dataset,
    loss: LossKind,
    cfg: &SgdConfig,
    epoch: usize,
) -> Result<GradStats> {
    sgd_epoch_with(model, data, loss, cfg, epoch, &StatsPolicy::default())
}

pub fn sgd_epoch_with<M: Model>(
    model: &mut M,
    data: &Dataset,
    loss: LossKind,
    cfg: &SgdConfig,
    epoch: usize,
    policy: &StatsPolicy,
) -> Result<GradStats> {
    if data.dim() != model.input_dim() {
        return Err(crate::error::mismatch(
            "sgd_epoch",
            format!("{} input columns", model.input_dim()),
            data.dim(),
        ));
    }
    let batches = epoch_batches(data, loss, cfg, epoch)?;
    let lr = cfg.learning_rate;
    let p = model.num_params();
    let start = if lr != 0.0 { model.params() } else { Vec::new() };
    let labels = data.labels();
    let x = data.features();

    let mut mean_batch_loss = 0.0;
    let mut sampled = 0usize;
    let explicit_mean = lr == 0.0;
    let mut w_mean = vec![0.0; if policy.variance_batches > 0 || explicit_mean { p } else { 0 }];
    let mut w_m2 = w_mean.clone();
    let mut retained = Vec::new();
    let mut scratch = vec![0.0; p];

    for (b, (rows, groups)) in batches.iter().enumerate() {
        let (out, cache) = model.forward_rows(x, rows)?;
        let batch_labels: Vec<f64> = rows.iter().map(|&i| labels[i]).collect();
        let (l, g) = loss_and_output_grad(loss, &out, &batch_labels, groups.as_ref())?;
        if !l.is_finite() || !g.is_finite() {
            return Err(Error::Diverged { epoch, batch: b });
        }
        mean_batch_loss += l;

        let want_var = b < policy.variance_batches;
        let want_keep = b < policy.retained_batches;
        // without a step, the epoch mean must come from explicit gradients
        let need_grad = want_var || want_keep || explicit_mean;
        if need_grad {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            model.backward_step(x, rows, cache, &g, lr, Some(&mut scratch))?;
            if scratch.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b });
            }
            if want_var || explicit_mean {
                sampled += 1;
                let k = sampled as f64;
                for ((m, s), &v) in w_mean.iter_mut().zip(w_m2.iter_mut()).zip(&scratch) {
                    let delta = v - *m;
                    *m += delta / k;
                    *s += delta * (v - *m);
                }
            }
            if want_keep {
                retained.push(DenseVector::from(scratch.clone()));
            }
        } else {
            model.backward_step(x, rows, cache, &g, lr, None)?;
        }
    }

    let nb = batches.len();
    let per_coord_mean: Vec<f64> = if !explicit_mean && nb > 0 {
        let end = model.params();
        let scale = 1.0 / (lr * nb as f64);
        start.iter().zip(&end).map(|(s, e)| (s - e) * scale).collect()
    } else {
        w_mean.clone()
    };
    if per_coord_mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { epoch, batch: nb.saturating_sub(1) });
    }
    let batch_size = if nb > 0 { data.len() as f64 / nb as f64 } else { 0.0 };
    let per_coord_var: Vec<f64> = if sampled >= 2 {
        let denom = (sampled - 1) as f64;
        w_m2.iter().map(|s| (s / denom).max(0.0) * batch_size).collect()
    } else {
        vec![0.0; per_coord_mean.len()]
    };
    Ok(GradStats {
        epoch,
        grad_norm: norm(&per_coord_mean),
        per_coord_mean: per_coord_mean.into(),
        per_coord_var: per_coord_var.into(),
        batch_grads: retained,
        num_batches: nb,
        batch_size,
        mean_batch_loss: if nb > 0 { mean_batch_loss / nb as f64 } else { 0.0 },
    })
}

/// Loss over the whole dataset and its gradient, flattened as in
/// [`Model::params`]. ListNet treats every query of `data` as one batch.
pub fn loss_and_gradient<M: Model>(model: &M, data: &Dataset, loss: LossKind) -> Result<(f64, Vec<f64>)>
where
    M: Clone,
{
    let rows: Vec<usize> = (0..data.len()).collect();
    let (out, cache) = model.forward_rows(data.features(), &rows)?;
    let (l, g) = loss_and_output_grad(loss, &out, data.labels(), data.groups())?;
    let mut grad = vec![0.0; model.num_params()];
    let mut probe = model.clone();
    probe.backward_step(data.features(), &rows, cache, &g, 0.0, Some(&mut grad))?;
    Ok((l, grad))
}

/// Full-dataset loss without gradients.
pub fn dataset_loss<M: Model>(model: &M, data: &Dataset, loss: LossKind) -> Result<f64> {
    let out = model.predict(data.features())?;
    Ok(loss_and_output_grad(loss, &out, data.labels(), data.groups())?.0)
}
