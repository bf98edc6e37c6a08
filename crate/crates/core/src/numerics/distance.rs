use super::matrix::{dot, DenseMatrix};
use crate::error::{mismatch, Error, Result};

/// `1 − cos(u, v)`, in `[0, 2]`.
///
/// Zero-norm inputs are an error rather than a NaN.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(mismatch("cosine_distance", u.len(), v.len()));
    }
    let (uu, vv) = (dot(u, u), dot(v, v));
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroNorm {
            context: format!(
                "cosine_distance ({} operand)",
                if uu == 0.0 { "first" } else { "second" }
            ),
        });
    }
    let cos = dot(u, v) / (uu.sqrt() * vv.sqrt());
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Mean of the column-wise cosine distances of two equally shaped matrices.
pub fn mean_column_cosine_distance(u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(mismatch(
            "mean_column_cosine_distance",
            format!("{}x{}", u.rows(), u.cols()),
            format!("{}x{}", v.rows(), v.cols()),
        ));
    }
    let cols = u.cols();
    if cols == 0 {
        return Err(mismatch("mean_column_cosine_distance", "at least one column", 0));
    }
    // one pass over both row-major buffers
    let mut uv = vec![0.0; cols];
    let mut uu = vec![0.0; cols];
    let mut vv = vec![0.0; cols];
    for i in 0..u.rows() {
        for (c, (a, b)) in u.row(i).iter().zip(v.row(i)).enumerate() {
            uv[c] += a * b;
            uu[c] += a * a;
            vv[c] += b * b;
        }
    }
    let mut total = 0.0;
    for c in 0..cols {
        if uu[c] == 0.0 || vv[c] == 0.0 {
            return Err(Error::ZeroNorm {
                context: format!("column {c}"),
            });
        }
        let cos = uv[c] / (uu[c].sqrt() * vv[c].sqrt());
        total += (1.0 - cos).clamp(0.0, 2.0);
    }
    Ok(total / cols as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_abs_diff_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(cosine_distance(&[3.0, 3.0], &[1.0, 1.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cosine_distance(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_norm_and_length_errors() {
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm { .. })
        ));
        assert!(matches!(
            cosine_distance(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn column_examples() {
        let eye = DenseMatrix::identity(2);
        assert_abs_diff_eq!(mean_column_cosine_distance(&eye, &eye).unwrap(), 0.0, epsilon = 1e-15);
        let anti = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(mean_column_cosine_distance(&eye, &anti).unwrap(), 1.0);
        // columns [1,0],[1,1] vs [0,1],[1,1]
        let u = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(mean_column_cosine_distance(&u, &v).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn column_errors() {
        let u = DenseMatrix::zeros(2, 2);
        let v = DenseMatrix::identity(2);
        assert!(matches!(
            mean_column_cosine_distance(&u, &v),
            Err(Error::ZeroNorm { .. })
        ));
        assert!(mean_column_cosine_distance(&v, &DenseMatrix::zeros(3, 2)).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(
            pair in (1usize..20).prop_flat_map(|n| (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let (u, v) = pair;
            prop_assume!(dot(&u, &u) > 1e-6 && dot(&v, &v) > 1e-6);
            let d = cosine_distance(&u, &v).unwrap();
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert!((d - cosine_distance(&v, &u).unwrap()).abs() < 1e-12);
            let su: Vec<f64> = u.iter().map(|x| a * x).collect();
            let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
            prop_assert!((d - cosine_distance(&su, &sv).unwrap()).abs() < 1e-9);
        }
    }
}
