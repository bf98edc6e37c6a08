//! Stopping rules. CDC, Oracle, EB and GD are read off a finished twin
//! trace; cross-validation trains its own fold models.

mod cv;

pub use cv::{cv_run, cv_stop, fold_assignment, CvOutcome, PatienceTracker};
pub use crate::models::GradStats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{detect_corner_masked, CornerConfig, CornerMethod};
use crate::twin::TwinTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopStatus {
    Stopped,
    ExhaustedBudget,
}

impl StopStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StopStatus::Stopped => "stopped",
            StopStatus::ExhaustedBudget => "exhausted_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopDecision {
    pub method: String,
    pub epoch: usize,
    pub criterion_value: f64,
    pub status: StopStatus,
}

impl StopDecision {
    fn stopped(method: &str, epoch: usize, criterion_value: f64) -> Self {
        Self {
            method: method.into(),
            epoch,
            criterion_value,
            status: StopStatus::Stopped,
        }
    }

    fn exhausted(method: &str, t_max: usize, criterion_value: f64) -> Self {
        Self {
            method: method.into(),
            epoch: t_max,
            criterion_value,
            status: StopStatus::ExhaustedBudget,
        }
    }
}

pub fn cdc_method_name(cfg: &CornerConfig) -> &'static str {
    match cfg.method {
        CornerMethod::FixedThreshold => "cdc_threshold",
        CornerMethod::MaxCurvature => "cdc_curvature",
    }
}

/// CDC on the weight distance (linear models) or on the sampled
/// counterfactual distance (two-layer nets), skipping rank-deficient
/// samples. Never reads the test metric.
pub fn cdc_stop(trace: &TwinTrace, cfg: &CornerConfig, use_counterfactual: bool) -> Result<StopDecision> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(Error::MissingSeries("weight_cosdist"));
    }
    let name = cdc_method_name(cfg);
    let t_max = trace.len();
    let (epochs, values, flags): (Vec<usize>, Vec<f64>, Vec<bool>) = if use_counterfactual {
        let samples = trace.cf_samples();
        if samples.is_empty() {
            return Err(Error::MissingSeries("cf_cosdist"));
        }
        unzip3(samples)
    } else {
        unzip3(
            trace
                .records()
                .iter()
                .map(|r| (r.epoch, r.weight_cosdist, false))
                .collect(),
        )
    };
    match detect_corner_masked(&values, cfg, |i| !flags[i]) {
        Some(i) => Ok(StopDecision::stopped(name, epochs[i], values[i])),
        None => Ok(StopDecision::exhausted(name, t_max, *values.last().unwrap())),
    }
}

fn unzip3(v: Vec<(usize, f64, bool)>) -> (Vec<usize>, Vec<f64>, Vec<bool>) {
    let mut a = Vec::with_capacity(v.len());
    let mut b = Vec::with_capacity(v.len());
    let mut c = Vec::with_capacity(v.len());
    for (x, y, z) in v {
        a.push(x);
        b.push(y);
        c.push(z);
    }
    (a, b, c)
}

/// Epoch of the best test metric within `budget` epochs; earliest on ties.
pub fn oracle_stop(trace: &TwinTrace, budget: usize) -> Result<StopDecision> {
    let metric = trace.eval_metric();
    oracle_stop_series(&metric, budget)
}

pub fn oracle_stop_series(metric: &[f64], budget: usize) -> Result<StopDecision> {
    let n = metric.len().min(budget);
    if n == 0 {
        return Err(Error::MissingSeries("eval_metric1"));
    }
    let mut best = 0;
    for i in 1..n {
        if metric[i] > metric[best] {
            best = i;
        }
    }
    Ok(StopDecision::stopped("oracle", best + 1, metric[best]))
}

/// Evidence-based stopping over full per-epoch gradient statistics.
pub fn eb_stop(stats: &[GradStats], batch_size: f64) -> Result<StopDecision> {
    let evidence: Vec<f64> = stats.iter().map(|s| s.evidence(batch_size)).collect();
    eb_stop_series(&evidence)
}

/// First epoch whose evidence statistic is positive.
pub fn eb_stop_series(evidence: &[f64]) -> Result<StopDecision> {
    if evidence.is_empty() {
        return Err(Error::MissingSeries("evidence"));
    }
    match evidence.iter().position(|&e| e > 0.0) {
        Some(i) => Ok(StopDecision::stopped("eb", i + 1, evidence[i])),
        None => Ok(StopDecision::exhausted("eb", evidence.len(), *evidence.last().unwrap())),
    }
}

/// Gradient-disparity stopping over full per-epoch gradient statistics;
/// pairs in epoch `t` are drawn with seed `t`.
pub fn gd_stop(stats: &[GradStats], pairs_per_epoch: usize, patience: usize) -> Result<StopDecision> {
    let disparity = stats
        .iter()
        .map(|s| {
            s.disparity(pairs_per_epoch, s.epoch as u64).ok_or_else(|| {
                Error::Unsupported(format!(
                    "gradient disparity needs at least two retained batches, epoch {} has {}",
                    s.epoch,
                    s.batch_grads.len()
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    gd_stop_series(&disparity, patience)
}

/// Stops after `patience` consecutive strict increases and reports the
/// epoch just before the run began.
pub fn gd_stop_series(disparity: &[f64], patience: usize) -> Result<StopDecision> {
    if disparity.is_empty() {
        return Err(Error::MissingSeries("grad_disparity1"));
    }
    if patience == 0 {
        return Err(Error::InvalidConfig("patience must be at least 1".into()));
    }
    let mut run = 0;
    for t in 1..disparity.len() {
        if disparity[t] > disparity[t - 1] {
            run += 1;
            if run == patience {
                let start = t - patience;
                return Ok(StopDecision::stopped("gd", start + 1, disparity[start]));
            }
        } else {
            run = 0;
        }
    }
    Ok(StopDecision::exhausted("gd", disparity.len(), *disparity.last().unwrap()))
}

/// Disparity series of a trace; errors when some epoch had fewer than two
/// retained batches.
pub fn trace_disparity(trace: &TwinTrace) -> Result<Vec<f64>> {
    trace
        .records()
        .iter()
        .map(|r| {
            r.grad.disparity.ok_or_else(|| {
                Error::Unsupported(format!(
                    "epoch {} has fewer than two retained batch gradients (full-batch training?)",
                    r.epoch
                ))
            })
        })
        .collect()
}
