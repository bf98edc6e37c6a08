use super::CfSample;
use crate::error::{mismatch, Error, Result};
use crate::numerics::{cosine_distance, mean_column_cosine_distance, pseudoinverse, DenseMatrix};

/// Instance 1's own predictions and instance 2's predictions, both mapped
/// back through the pseudoinverse of instance 1's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    /// `A₁⁺·Ŷ₁`
    pub projected: DenseMatrix,
    /// `A₁⁺·Ŷ₂`
    pub counterfactual: DenseMatrix,
    pub rank: usize,
    pub rank_deficient: bool,
}

pub fn counterfactual_weights(
    a1: &DenseMatrix,
    y1: &DenseMatrix,
    y2: &DenseMatrix,
    rcond: Option<f64>,
) -> Result<Counterfactual> {
    if y1.shape() != y2.shape() || y1.rows() != a1.rows() {
        return Err(mismatch(
            "counterfactual_weights",
            format!("predictions of shape ({}, _)", a1.rows()),
            format!("{:?} and {:?}", y1.shape(), y2.shape()),
        ));
    }
    let pinv = pseudoinverse(a1, rcond)?;
    let projected = pinv.matrix.matmul(y1)?;
    let counterfactual = pinv.matrix.matmul(y2)?;
    for (name, m) in [("projected", &projected), ("counterfactual", &counterfactual)] {
        for c in 0..m.cols() {
            if m.column(c).iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroNorm {
                    context: format!("{name} weight column {c}"),
                });
            }
        }
    }
    Ok(Counterfactual {
        projected,
        counterfactual,
        rank: pinv.rank,
        rank_deficient: pinv.rank < a1.rows().min(a1.cols()),
    })
}

/// Mean column cosine distance between `A₁⁺·Ŷ₁` and `A₁⁺·Ŷ₂`, and whether
/// `A₁` is rank deficient.
pub fn counterfactual_distance(
    a1: &DenseMatrix,
    y1: &DenseMatrix,
    y2: &DenseMatrix,
    rcond: Option<f64>,
) -> Result<(f64, bool)> {
    let cf = counterfactual_weights(a1, y1, y2, rcond)?;
    Ok((cf.distance()?, cf.rank_deficient))
}

impl Counterfactual {
    pub fn distance(&self) -> Result<f64> {
        mean_column_cosine_distance(&self.projected, &self.counterfactual)
    }

    /// Distance from the raw last-layer weights of instance 1 to the
    /// counterfactual weights.
    pub fn raw_distance(&self, raw: &DenseMatrix) -> Result<f64> {
        if raw.shape() != self.counterfactual.shape() {
            return Err(mismatch(
                "Counterfactual::raw_distance",
                format!("{:?}", self.counterfactual.shape()),
                format!("{:?}", raw.shape()),
            ));
        }
        let c = raw.cols();
        let mut total = 0.0;
        for j in 0..c {
            total += cosine_distance(&raw.column(j), &self.counterfactual.column(j))?;
        }
        Ok(total / c as f64)
    }

    pub(crate) fn summarize(&self, raw: &DenseMatrix) -> Result<CfSample> {
        Ok(CfSample {
            projected: self.distance()?,
            raw: self.raw_distance(raw)?,
            rank_deficient: self.rank_deficient,
        })
    }
}
