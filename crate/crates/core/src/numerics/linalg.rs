use nalgebra::DMatrix;

use super::matrix::{DenseMatrix, DenseVector};
use crate::error::{mismatch, Error, Result};

const SVD_MAX_ITERATIONS: usize = 10_000;

/// Moore-Penrose inverse with its numerical rank.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    pub matrix: DenseMatrix,
    pub rank: usize,
}

/// Default relative cutoff for singular values: machine epsilon × max(rows, cols).
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

/// Pseudoinverse through the SVD, zeroing singular values `≤ rcond · σ_max`.
///
/// `rcond = None` uses [`default_rcond`].
pub fn pseudoinverse(m: &DenseMatrix, rcond: Option<f64>) -> Result<Pseudoinverse> {
    let (rows, cols) = m.shape();
    let rcond = rcond.unwrap_or_else(|| default_rcond(rows, cols));
    if !(rcond >= 0.0) {
        return Err(Error::InvalidConfig(format!("rcond must be >= 0, got {rcond}")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "pseudoinverse input".into(),
        });
    }
    if rows == 0 || cols == 0 {
        return Ok(Pseudoinverse {
            matrix: DenseMatrix::zeros(cols, rows),
            rank: 0,
        });
    }

    let a = DMatrix::from_row_slice(rows, cols, m.data());
    let svd = nalgebra::linalg::SVD::try_new(a, true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or(Error::SvdNotConverged {
            rows,
            cols,
            max_iterations: SVD_MAX_ITERATIONS,
        })?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("both singular bases were requested"),
    };
    let sigma = svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * sigma_max;

    // M⁺ = V_r · Σ_r⁻¹ · U_rᵀ over the retained singular triplets.
    let kept: Vec<usize> = (0..sigma.len())
        .filter(|&k| sigma[k] > cutoff && sigma[k] > 0.0)
        .collect();
    let rank = kept.len();
    if rank == 0 {
        return Ok(Pseudoinverse {
            matrix: DenseMatrix::zeros(cols, rows),
            rank,
        });
    }
    let v_scaled = DenseMatrix::from_fn(cols, rank, |i, r| v_t[(kept[r], i)] / sigma[kept[r]]);
    let u_kept = DenseMatrix::from_fn(rows, rank, |j, r| u[(j, kept[r])]);
    let matrix = v_scaled.matmul_t(&u_kept)?;
    Ok(Pseudoinverse { matrix, rank })
}

/// Minimum-ℓ2-norm least-squares solution `A⁺·Y`.
pub fn min_norm_solution(a: &DenseMatrix, y: &[f64]) -> Result<DenseVector> {
    if a.rows() != y.len() {
        return Err(mismatch("min_norm_solution", a.rows(), y.len()));
    }
    let pinv = pseudoinverse(a, None)?;
    let y = DenseMatrix::from_vec(y.len(), 1, y.to_vec())?;
    Ok(pinv.matrix.matmul(&y)?.into_vec().into())
}

/// Multi-column variant of [`min_norm_solution`]: `A⁺·Y` for an `N×C` target.
pub fn min_norm_solution_matrix(a: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != y.rows() {
        return Err(mismatch("min_norm_solution_matrix", a.rows(), y.rows()));
    }
    pseudoinverse(a, None)?.matrix.matmul(y)
}
