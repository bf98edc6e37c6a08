//! Training losses with gradients and evaluation metrics.

mod groups;
mod losses;
mod metrics;

pub use groups::QueryGroups;
pub use losses::{cross_entropy, listnet_loss, rmse_loss, LossKind};
pub use metrics::{accuracy, ndcg_at_k};

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::numerics::DenseMatrix;

/// Test-set metric recorded per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    Accuracy,
    NdcgAt10,
}

impl EvalMetric {
    pub fn name(self) -> &'static str {
        match self {
            EvalMetric::Accuracy => "accuracy",
            EvalMetric::NdcgAt10 => "ndcg@10",
        }
    }

    pub fn evaluate(
        self,
        outputs: &DenseMatrix,
        labels: &[f64],
        groups: Option<&QueryGroups>,
    ) -> Result<f64> {
        match self {
            EvalMetric::Accuracy => Ok(accuracy(outputs, &class_indices(labels, outputs.cols())?)),
            EvalMetric::NdcgAt10 => {
                let groups = groups
                    .ok_or_else(|| Error::InvalidGroups("NDCG needs query groups".into()))?;
                ndcg_at_k(single_column(outputs, "ndcg")?, labels, groups, 10)
            }
        }
    }
}

pub(crate) fn class_indices(labels: &[f64], classes: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .enumerate()
        .map(|(row, &l)| {
            if l >= 0.0 && l.fract() == 0.0 && (l as usize) < classes {
                Ok(l as usize)
            } else {
                Err(Error::LabelOutOfRange {
                    row,
                    label: l,
                    classes,
                })
            }
        })
        .collect()
}

fn single_column<'a>(outputs: &'a DenseMatrix, op: &'static str) -> Result<&'a [f64]> {
    if outputs.cols() != 1 {
        return Err(mismatch(op, "1 output column", outputs.cols()));
    }
    Ok(outputs.data())
}

/// Loss of model outputs against row-aligned labels, with the gradient with
/// respect to the outputs.
///
/// RMSE regresses the label directly for one output and a one-hot encoding
/// otherwise; ListNet needs a single output column and query groups.
pub fn loss_and_output_grad(
    kind: LossKind,
    outputs: &DenseMatrix,
    labels: &[f64],
    groups: Option<&QueryGroups>,
) -> Result<(f64, DenseMatrix)> {
    let (n, c) = outputs.shape();
    if labels.len() != n {
        return Err(mismatch("loss_and_output_grad", format!("{n} labels"), labels.len()));
    }
    match kind {
        LossKind::CrossEntropy => cross_entropy(outputs, &class_indices(labels, c)?),
        LossKind::Rmse => {
            let targets = if c == 1 {
                DenseMatrix::from_vec(n, 1, labels.to_vec())?
            } else {
                let idx = class_indices(labels, c)?;
                let mut t = DenseMatrix::zeros(n, c);
                for (i, &k) in idx.iter().enumerate() {
                    t.set(i, k, 1.0);
                }
                t
            };
            rmse_loss(outputs, &targets)
        }
        LossKind::ListNet => {
            let groups = groups
                .ok_or_else(|| Error::InvalidGroups("ListNet needs query groups".into()))?;
            let (l, g) = listnet_loss(single_column(outputs, "listnet")?, labels, groups)?;
            Ok((l, DenseMatrix::from_vec(n, 1, g)?))
        }
    }
}
