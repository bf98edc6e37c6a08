use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::StopDecision;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{init_linear, init_two_layer, sgd_epoch_with, Model, StatsPolicy};
use crate::twin::{prepare, ModelKind, TwinConfig};

/// Running-best bookkeeping with a patience window; an improvement must beat
/// the best by more than `1e-12`.
#[derive(Debug, Clone)]
pub struct PatienceTracker {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since: usize,
}

impl PatienceTracker {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            since: 0,
        }
    }

    /// Feeds the metric of `epoch`; returns true once `patience` epochs in a
    /// row have failed to improve.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        if metric > self.best + 1e-12 {
            self.best = metric;
            self.best_epoch = epoch;
            self.since = 0;
            false
        } else {
            self.since += 1;
            self.since >= self.patience
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub decision: StopDecision,
    /// Last epoch the fold models were trained for.
    pub stopped_at: usize,
    /// Mean held-out metric per trained epoch.
    pub fold_metric: Vec<f64>,
}

/// Splits `units` shuffled indices into `folds` near-equal parts.
pub fn fold_assignment(units: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..folds)
        .map(|f| {
            let lo = f * units / folds;
            let hi = (f + 1) * units / folds;
            order[lo..hi].to_vec()
        })
        .collect()
}

/// Cross-validated stopping; see [`cv_run`].
pub fn cv_stop(base: &TwinConfig, train: &Dataset, folds: usize, patience: usize) -> Result<StopDecision> {
    Ok(cv_run(base, train, folds, patience)?.decision)
}

/// Trains one model per fold in epoch lockstep, each on the other folds,
/// and tracks the mean held-out metric. Grouped data is split by query.
///
/// The returned epoch is the best one seen. The reported model is a fresh
/// instance trained on all of `train` for that many epochs, which is
/// instance 1 of the twin run with the same configuration.
pub fn cv_run(base: &TwinConfig, train: &Dataset, folds: usize, patience: usize) -> Result<CvOutcome> {
    base.validate()?;
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    if patience == 0 {
        return Err(Error::InvalidConfig("patience must be at least 1".into()));
    }
    let plain = TwinConfig {
        track_min_norm: false,
        ..base.clone()
    };
    let prep = prepare(&plain, train, train)?;
    let data = &prep.train;
    let seed = base.sgd.shuffle_seed ^ 0x5eed_cf01d;
    let units = data.groups().map_or(data.len(), |g| g.num_groups());
    let parts = fold_assignment(units, folds, seed);
    if let Some(f) = parts.iter().position(Vec::is_empty) {
        return Err(Error::EmptyFold { fold: f });
    }
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|f| {
            let fit: Vec<usize> = (0..folds).filter(|&o| o != f).flat_map(|o| parts[o].clone()).collect();
            if data.groups().is_some() {
                Ok((data.select_groups(&fit)?, data.select_groups(&parts[f])?))
            } else {
                Ok((data.select_rows(&fit), data.select_rows(&parts[f])))
            }
        })
        .collect::<Result<_>>()?;
    let d = data.dim();
    match base.model_kind {
        ModelKind::Linear => lockstep(base, &splits, patience, || init_linear(d, base.outputs, base.seeds.0)),
        ModelKind::TwoLayer => lockstep(base, &splits, patience, || {
            init_two_layer(d, base.width, base.outputs, base.seeds.0)
        }),
    }
}

fn lockstep<M: Model>(
    base: &TwinConfig,
    splits: &[(Dataset, Dataset)],
    patience: usize,
    make: impl Fn() -> M,
) -> Result<CvOutcome> {
    let mut models: Vec<M> = splits.iter().map(|_| make()).collect();
    let mut tracker = PatienceTracker::new(patience);
    let mut fold_metric = Vec::new();
    let t_max = base.sgd.max_epochs;
    for epoch in 1..=t_max {
        let mut total = 0.0;
        for (f, (m, (fit, held))) in models.iter_mut().zip(splits).enumerate() {
            sgd_epoch_with(m, fit, base.loss, &base.sgd, epoch, &StatsPolicy::none())?;
            let out = m.predict(held.features())?;
            total += base
                .eval_metric
                .evaluate(&out, held.labels(), held.groups())
                .map_err(|e| match e {
                    Error::NoRelevantQueries => Error::EmptyFold { fold: f },
                    other => other,
                })?;
        }
        let mean = total / splits.len() as f64;
        fold_metric.push(mean);
        if tracker.observe(epoch, mean) {
            return Ok(CvOutcome {
                decision: StopDecision::stopped("cv", tracker.best_epoch(), tracker.best()),
                stopped_at: epoch,
                fold_metric,
            });
        }
    }
    Ok(CvOutcome {
        decision: StopDecision::exhausted("cv", t_max, *fold_metric.last().unwrap_or(&f64::NAN)),
        stopped_at: t_max,
        fold_metric,
    })
}
