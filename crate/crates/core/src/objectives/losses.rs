use serde::{Deserialize, Serialize};

use super::groups::QueryGroups;
use crate::error::{mismatch, Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Rmse,
    #[serde(rename = "listnet")]
    ListNet,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Rmse => "rmse",
            LossKind::ListNet => "listnet",
        }
    }
}

/// Numerically stable in-place softmax.
pub(crate) fn softmax_inplace(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean softmax cross-entropy over rows; gradient is `(softmax − onehot)/N`.
pub fn cross_entropy(logits: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(mismatch("cross_entropy", format!("{n} labels"), labels.len()));
    }
    let mut grad = logits.clone();
    let mut loss = 0.0;
    let inv_n = 1.0 / n.max(1) as f64;
    for (i, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(Error::LabelOutOfRange {
                row: i,
                label: label as f64,
                classes: c,
            });
        }
        let row = grad.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        for v in row.iter_mut() {
            *v = (*v - lse).exp() * inv_n;
        }
        row[label] -= inv_n;
    }
    Ok((loss * inv_n, grad))
}

/// Mean squared error and its gradient `2(preds − targets)/count`.
///
/// The squared form is what gets optimized; report `loss.sqrt()` as the RMSE.
pub fn rmse_loss(preds: &DenseMatrix, targets: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    if preds.shape() != targets.shape() {
        return Err(mismatch(
            "rmse_loss",
            format!("{:?}", targets.shape()),
            format!("{:?}", preds.shape()),
        ));
    }
    let count = preds.data().len().max(1) as f64;
    let mut grad = preds.sub(targets)?;
    let mse = grad.data().iter().map(|d| d * d).sum::<f64>() / count;
    for v in grad.data_mut() {
        *v *= 2.0 / count;
    }
    Ok((mse, grad))
}

/// Top-one ListNet: per query, cross-entropy between `softmax(labels)` and
/// `softmax(scores)`, averaged over queries.
pub fn listnet_loss(
    scores: &[f64],
    labels: &[f64],
    groups: &QueryGroups,
) -> Result<(f64, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(mismatch("listnet_loss", labels.len(), scores.len()));
    }
    groups.check_rows(scores.len())?;
    let q = groups.num_groups() as f64;
    let mut grad = vec![0.0; scores.len()];
    let mut loss = 0.0;
    for range in groups.iter() {
        let mut p = labels[range.clone()].to_vec();
        softmax_inplace(&mut p);
        let s = &scores[range.clone()];
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (k, i) in range.enumerate() {
            let log_q = s[k] - lse;
            loss -= p[k] * log_q;
            grad[i] = (log_q.exp() - p[k]) / q;
        }
    }
    Ok((loss / q, grad))
}
