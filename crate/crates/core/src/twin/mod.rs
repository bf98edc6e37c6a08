//! Side-by-side training of two differently seeded instances and the
//! per-epoch diagnostics that the stopping rules read.

mod counterfactual;
mod trace;

pub use counterfactual::{counterfactual_distance, counterfactual_weights, Counterfactual};
pub use trace::{EpochRecord, GradSummary, TwinTrace, TRACE_COLUMNS};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{
    build_featurizer, featurize, init_linear, init_two_layer, sgd_epoch_with, GradStats, Model,
    SgdConfig, StatsPolicy,
};
use crate::numerics::{mean_column_cosine_distance, min_norm_solution_matrix, DenseMatrix};
use crate::objectives::{loss_and_output_grad, EvalMetric, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Frozen random features followed by a trainable linear map.
    Linear,
    /// Trainable ReLU hidden layer followed by a trainable linear map.
    TwoLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinConfig {
    pub model_kind: ModelKind,
    /// Feature count `D` for linear models, hidden width `H` otherwise.
    pub width: usize,
    pub outputs: usize,
    pub seeds: (u64, u64),
    #[serde(default)]
    pub featurizer_seed: u64,
    pub sgd: SgdConfig,
    pub loss: LossKind,
    pub eval_metric: EvalMetric,
    #[serde(default = "default_cf_every")]
    pub counterfactual_every: usize,
    /// Pseudoinverse cutoff; `None` uses the default.
    #[serde(default)]
    pub rcond: Option<f64>,
    #[serde(default = "default_pairs")]
    pub disparity_pairs: usize,
    #[serde(default)]
    pub stats: StatsPolicy,
    /// Keep every epoch's full [`GradStats`] in the trace.
    #[serde(default)]
    pub keep_grad_stats: bool,
    /// Also record instance 1's distance to the minimum-norm solution of the
    /// featurized training problem (linear models only).
    #[serde(default)]
    pub track_min_norm: bool,
}

fn default_cf_every() -> usize {
    5
}

fn default_pairs() -> usize {
    5
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.0 == self.seeds.1 {
            return Err(Error::InvalidConfig(format!(
                "twin seeds must differ, both are {}",
                self.seeds.0
            )));
        }
        if self.counterfactual_every == 0 {
            return Err(Error::InvalidConfig("counterfactual_every must be at least 1".into()));
        }
        if self.width == 0 || self.outputs == 0 {
            return Err(Error::InvalidConfig("width and outputs must be at least 1".into()));
        }
        if self.loss == LossKind::ListNet && self.outputs != 1 {
            return Err(Error::InvalidConfig("ListNet needs a single output".into()));
        }
        self.sgd.validate()
    }
}

/// Training and test data in the representation the model consumes.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    /// Minimum-norm solution of the featurized training problem, computed
    /// once when the config tracks it.
    pub reference: Option<DenseMatrix>,
}

/// Featurizes both splits for linear models; two-layer nets use raw inputs.
pub fn prepare(cfg: &TwinConfig, train: &Dataset, test: &Dataset) -> Result<Prepared> {
    if train.dim() != test.dim() {
        return Err(crate::error::mismatch("prepare", train.dim(), test.dim()));
    }
    match cfg.model_kind {
        ModelKind::Linear => {
            let f = build_featurizer(train.dim(), cfg.width, cfg.featurizer_seed);
            let train = train.with_features(featurize(&f, train.features())?)?;
            let reference = if cfg.track_min_norm {
                Some(min_norm_solution_matrix(
                    train.features(),
                    &regression_targets(&train, cfg.outputs)?,
                )?)
            } else {
                None
            };
            Ok(Prepared {
                test: test.with_features(featurize(&f, test.features())?)?,
                train,
                reference,
            })
        }
        ModelKind::TwoLayer => Ok(Prepared {
            train: train.clone(),
            test: test.clone(),
            reference: None,
        }),
    }
}

/// Trains both instances for exactly `sgd.max_epochs` epochs.
pub fn train_twins(cfg: &TwinConfig, train: &Dataset, test: &Dataset) -> Result<TwinTrace> {
    cfg.validate()?;
    let prep = prepare(cfg, train, test)?;
    train_twins_prepared(cfg, &prep)
}

/// [`train_twins`] on data already passed through [`prepare`].
pub fn train_twins_prepared(cfg: &TwinConfig, prep: &Prepared) -> Result<TwinTrace> {
    cfg.validate()?;
    match cfg.model_kind {
        ModelKind::Linear => {
            let d = prep.train.dim();
            let m1 = init_linear(d, cfg.outputs, cfg.seeds.0);
            let m2 = init_linear(d, cfg.outputs, cfg.seeds.1);
            let computed;
            let reference = match (&prep.reference, cfg.track_min_norm) {
                (Some(r), true) => Some(r),
                (None, true) => {
                    computed = min_norm_solution_matrix(
                        prep.train.features(),
                        &regression_targets(&prep.train, cfg.outputs)?,
                    )?;
                    Some(&computed)
                }
                (_, false) => None,
            };
            run(cfg, prep, m1, m2, reference, |_, _, _| Ok(None))
        }
        ModelKind::TwoLayer => {
            let d = prep.train.dim();
            let m1 = init_two_layer(d, cfg.width, cfg.outputs, cfg.seeds.0);
            let m2 = init_two_layer(d, cfg.width, cfg.outputs, cfg.seeds.1);
            let every = cfg.counterfactual_every;
            let rcond = cfg.rcond;
            run(cfg, prep, m1, m2, None, move |epoch, m1, preds| {
                if epoch % every != 0 {
                    return Ok(None);
                }
                let (hidden, _) = crate::models::forward_two_layer(m1, prep.train.features())?;
                let cf = counterfactual_weights(&hidden, preds.0, preds.1, rcond)?;
                Ok(Some(cf.summarize(m1.last_layer())?))
            })
        }
    }
}

/// Targets the minimum-norm solution fits: labels for one output, one-hot
/// rows otherwise.
pub fn regression_targets(data: &Dataset, outputs: usize) -> Result<DenseMatrix> {
    if outputs == 1 {
        return DenseMatrix::from_vec(data.len(), 1, data.labels().to_vec());
    }
    let idx = data.class_labels(outputs)?;
    let mut y = DenseMatrix::zeros(data.len(), outputs);
    for (i, &c) in idx.iter().enumerate() {
        y.set(i, c, 1.0);
    }
    Ok(y)
}

/// Counterfactual distances recorded on sampled epochs.
pub(crate) struct CfSample {
    pub projected: f64,
    pub raw: f64,
    pub rank_deficient: bool,
}

fn run<M: Model>(
    cfg: &TwinConfig,
    prep: &Prepared,
    mut m1: M,
    mut m2: M,
    reference: Option<&DenseMatrix>,
    mut cf_hook: impl FnMut(usize, &M, (&DenseMatrix, &DenseMatrix)) -> Result<Option<CfSample>>,
) -> Result<TwinTrace> {
    let initial = mean_column_cosine_distance(m1.last_layer(), m2.last_layer())?;
    let mut trace = TwinTrace::new(initial);
    let train = &prep.train;
    let test = &prep.test;

    for epoch in 1..=cfg.sgd.max_epochs {
        let stats = sgd_epoch_with(&mut m1, train, cfg.loss, &cfg.sgd, epoch, &cfg.stats)?;
        sgd_epoch_with(&mut m2, train, cfg.loss, &cfg.sgd, epoch, &StatsPolicy::none())?;

        let abort = |what: &str| Error::NonFinite {
            context: format!("{what} at epoch {epoch}"),
        };
        let y1 = m1.predict(train.features())?;
        let y2 = m2.predict(train.features())?;
        let (loss1, _) = loss_and_output_grad(cfg.loss, &y1, train.labels(), train.groups())?;
        let (loss2, _) = loss_and_output_grad(cfg.loss, &y2, train.labels(), train.groups())?;
        if !loss1.is_finite() || !loss2.is_finite() {
            return Err(abort("training loss"));
        }
        let weight_cosdist = mean_column_cosine_distance(m1.last_layer(), m2.last_layer())?;
        let pred_cosdist = mean_column_cosine_distance(&y1, &y2)?;
        let test_out = m1.predict(test.features())?;
        let eval_metric1 = cfg
            .eval_metric
            .evaluate(&test_out, test.labels(), test.groups())?;
        let ref_cosdist = reference
            .map(|r| mean_column_cosine_distance(m1.last_layer(), r))
            .transpose()?;
        let cf = cf_hook(epoch, &m1, (&y1, &y2))?;

        let summary = GradSummary::from_stats(&stats, cfg.disparity_pairs, epoch as u64);
        let record = EpochRecord {
            epoch,
            weight_cosdist,
            pred_cosdist,
            cf_cosdist: cf.as_ref().map(|c| c.projected),
            cf_raw_cosdist: cf.as_ref().map(|c| c.raw),
            train_loss1: loss1,
            train_loss2: loss2,
            eval_metric1,
            grad: summary,
            rank_flag: cf.as_ref().map(|c| c.rank_deficient),
            ref_cosdist,
        };
        if !record.is_finite() {
            return Err(abort("diagnostics"));
        }
        trace.push(record, cfg.keep_grad_stats.then_some(stats));
    }
    Ok(trace)
}

impl GradSummary {
    pub fn from_stats(stats: &GradStats, pairs: usize, seed: u64) -> Self {
        Self {
            grad_norm: stats.grad_norm,
            evidence: stats.evidence(stats.batch_size),
            disparity: stats.disparity(pairs, seed),
            num_batches: stats.num_batches,
        }
    }
}
