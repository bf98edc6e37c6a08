use super::groups::QueryGroups;
use crate::error::{mismatch, Error, Result};
use crate::numerics::DenseMatrix;

/// Index of the row maximum; ties go to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize]) -> f64 {
    let n = logits.rows().min(labels.len());
    if n == 0 {
        return 0.0;
    }
    let hits = (0..n).filter(|&i| argmax(logits.row(i)) == labels[i]).count();
    hits as f64 / n as f64
}

fn dcg(gains_in_rank_order: impl Iterator<Item = f64>, k: usize) -> f64 {
    gains_in_rank_order
        .take(k)
        .enumerate()
        .map(|(r, rel)| (2f64.powf(rel) - 1.0) / ((r + 2) as f64).log2())
        .sum()
}

/// Mean NDCG@k over queries with a positive ideal DCG.
pub fn ndcg_at_k(scores: &[f64], labels: &[f64], groups: &QueryGroups, k: usize) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(mismatch("ndcg_at_k", labels.len(), scores.len()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("ndcg cutoff k must be at least 1".into()));
    }
    groups.check_rows(scores.len())?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for range in groups.iter() {
        let s = &scores[range.clone()];
        let l = &labels[range];
        let mut ideal = l.to_vec();
        ideal.sort_by(|a, b| b.total_cmp(a));
        let idcg = dcg(ideal.into_iter(), k);
        if idcg <= 0.0 {
            continue;
        }
        let mut order: Vec<usize> = (0..s.len()).collect();
        // stable sort keeps original index order among equal scores
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        total += dcg(order.into_iter().map(|i| l[i]), k) / idcg;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::NoRelevantQueries);
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        let labels = [2usize, 0, 1];
        let onehot = DenseMatrix::from_fn(3, 3, |i, j| if labels[i] == j { 10.0 } else { 0.0 });
        assert_eq!(accuracy(&onehot, &labels), 1.0);
        assert_eq!(accuracy(&onehot, &[0, 1, 2]), 0.0);
        assert_abs_diff_eq!(accuracy(&onehot, &[2, 0, 0]), 2.0 / 3.0);
        // ties resolve to the lowest class
        assert_eq!(accuracy(&DenseMatrix::zeros(1, 4), &[0]), 1.0);
    }

    #[test]
    fn ndcg_examples() {
        let g = QueryGroups::from_sizes(&[2]).unwrap();
        let v = ndcg_at_k(&[0.0, 1.0], &[1.0, 0.0], &g, 10).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.63093, epsilon = 1e-5);
        assert_eq!(ndcg_at_k(&[1.0, 0.0], &[1.0, 0.0], &g, 10).unwrap(), 1.0);

        let g2 = QueryGroups::from_sizes(&[2, 2]).unwrap();
        let v = ndcg_at_k(&[0.0, 1.0, 0.3, 0.2], &[1.0, 0.0, 0.0, 0.0], &g2, 10).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3f64.log2(), epsilon = 1e-12);
        assert!(matches!(
            ndcg_at_k(&[0.0, 1.0], &[0.0, 0.0], &g, 10),
            Err(Error::NoRelevantQueries)
        ));
    }

    #[test]
    fn ndcg_tie_break_uses_original_order() {
        let g = QueryGroups::from_sizes(&[3]).unwrap();
        // equal scores: docs ranked 0,1,2 -> gains 0, 3, 1
        let v = ndcg_at_k(&[0.5, 0.5, 0.5], &[0.0, 2.0, 1.0], &g, 10).unwrap();
        let dcg = 3.0 / 3f64.log2() + 1.0 / 2.0;
        let idcg = 3.0 + 1.0 / 3f64.log2();
        assert_abs_diff_eq!(v, dcg / idcg, epsilon = 1e-12);
        // cutoff
        let v1 = ndcg_at_k(&[0.5, 0.5, 0.5], &[0.0, 2.0, 1.0], &g, 1).unwrap();
        assert_eq!(v1, 0.0);
    }

    proptest! {
        #[test]
        fn ndcg_monotone_invariance(
            docs in prop::collection::vec((-5.0f64..5.0, 0u8..5), 2..12),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let scores: Vec<f64> = docs.iter().map(|d| d.0).collect();
            let mut labels: Vec<f64> = docs.iter().map(|d| d.1 as f64).collect();
            labels[0] = 1.0;
            let g = QueryGroups::from_sizes(&[scores.len()]).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| (scale * s + shift).exp()).collect();
            let a = ndcg_at_k(&scores, &labels, &g, 10).unwrap();
            let b = ndcg_at_k(&t, &labels, &g, 10).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        }

        #[test]
        fn accuracy_monotone_invariance(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..10),
        ) {
            let m = DenseMatrix::from_rows(&rows).unwrap();
            let labels: Vec<usize> = (0..rows.len()).map(|i| (i * 7) % 4).collect();
            let t = m.map(|v| v.powi(3) + 2.0 * v);
            prop_assert_eq!(accuracy(&m, &labels), accuracy(&t, &labels));
        }
    }
}
