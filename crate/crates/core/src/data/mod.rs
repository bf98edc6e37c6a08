//! Datasets, file loaders, label noise and synthetic tasks.

mod images;
mod svmlight;
mod synthetic;

pub use images::{load_cifar10, load_idx};
pub use svmlight::{format_g17, load_svmlight_qid, load_svmlight_qid_with_dim, write_svmlight_qid};
pub use synthetic::{
    inject_label_noise, label_noise_indices, make_synthetic, make_synthetic_ranking, make_synthetic_with,
    sample_queries, NoiseSpec, RankingSpec, SyntheticSpec,
};

use crate::error::{mismatch, Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::objectives::QueryGroups;

/// Features plus class indices, grades or regression targets, with an
/// optional partition into queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: DenseMatrix,
    labels: DenseVector,
    groups: Option<QueryGroups>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: DenseMatrix,
        labels: DenseVector,
        groups: Option<QueryGroups>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(mismatch(
                "Dataset::new",
                format!("{} labels", features.rows()),
                labels.len(),
            ));
        }
        if let Some(g) = &groups {
            g.check_rows(features.rows())?;
        }
        if !features.is_finite() {
            return Err(Error::NonFinite {
                context: "dataset features".into(),
            });
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            groups,
        })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &DenseVector {
        &self.labels
    }

    pub fn groups(&self) -> Option<&QueryGroups> {
        self.groups.as_ref()
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Labels as class indices in `[0, classes)`.
    pub fn class_labels(&self, classes: usize) -> Result<Vec<usize>> {
        crate::objectives::class_indices(&self.labels, classes)
    }

    /// Largest label plus one, for integer class labels.
    pub fn infer_classes(&self) -> usize {
        self.labels.iter().fold(0.0f64, |m, &l| m.max(l)) as usize + 1
    }

    pub fn with_labels(&self, labels: DenseVector) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.features.clone(),
            labels,
            self.groups.clone(),
        )
    }

    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        Self::new(
            self.name.clone(),
            features,
            self.labels.clone(),
            self.groups.clone(),
        )
    }

    /// Rows in the given order; any query grouping is dropped.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect::<Vec<_>>().into(),
            groups: None,
        }
    }

    /// Whole queries in the given order, with groups rebuilt.
    pub fn select_groups(&self, which: &[usize]) -> Result<Self> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| Error::InvalidGroups("dataset has no query groups".into()))?;
        let mut rows = Vec::new();
        let mut sizes = Vec::with_capacity(which.len());
        for &g in which {
            let r = groups.range(g);
            sizes.push(r.len());
            rows.extend(r);
        }
        let mut out = self.select_rows(&rows);
        out.groups = Some(QueryGroups::from_sizes(&sizes)?);
        Ok(out)
    }

    /// Takes the first `n` rows (or queries, for grouped data).
    pub fn head(&self, n: usize) -> Result<Self> {
        match &self.groups {
            Some(g) => self.select_groups(&(0..n.min(g.num_groups())).collect::<Vec<_>>()),
            None => Ok(self.select_rows(&(0..n.min(self.len())).collect::<Vec<_>>())),
        }
    }
}

/// Scales every row to unit Euclidean norm; all-zero rows stay zero.
pub fn normalize_rows(ds: &Dataset) -> Dataset {
    let mut features = ds.features.clone();
    for i in 0..features.rows() {
        let row = features.row_mut(i);
        let n = crate::numerics::norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    Dataset {
        features,
        ..ds.clone()
    }
}

/// Per-feature affine map fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero mean, unit population variance per column; constant columns are
    /// only centred.
    pub fn fit(ds: &Dataset) -> Self {
        let (n, d) = ds.features.shape();
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        for i in 0..n {
            for (j, &v) in ds.features.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        let inv = 1.0 / n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        for i in 0..n {
            for (j, &v) in ds.features.row(i).iter().enumerate() {
                m2[j] += (v - mean[j]).powi(2);
            }
        }
        let scale = m2
            .into_iter()
            .map(|s| {
                let sd = (s * inv).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.mean.len() {
            return Err(mismatch("Standardizer::apply", self.mean.len(), ds.dim()));
        }
        let mut features = ds.features.clone();
        for i in 0..features.rows() {
            for (j, v) in features.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        Ok(Dataset {
            features,
            ..ds.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let x = DenseMatrix::from_rows(&[
            vec![3.0, 4.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![5.0, -1.0],
        ])
        .unwrap();
        Dataset::new(
            "toy",
            x,
            vec![0.0, 2.0, 1.0, 2.0].into(),
            Some(QueryGroups::from_sizes(&[1, 3]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        let x = DenseMatrix::zeros(2, 1);
        assert!(Dataset::new("a", x.clone(), vec![0.0].into(), None).is_err());
        let g = QueryGroups::from_sizes(&[3]).unwrap();
        assert!(Dataset::new("a", x, vec![0.0, 1.0].into(), Some(g)).is_err());
    }

    #[test]
    fn class_labels_and_selection() {
        let ds = toy();
        assert_eq!(ds.class_labels(3).unwrap(), vec![0, 2, 1, 2]);
        assert!(ds.class_labels(2).is_err());
        assert_eq!(ds.infer_classes(), 3);
        let s = ds.select_groups(&[1, 0]).unwrap();
        assert_eq!(s.groups().unwrap().sizes(), vec![3, 1]);
        assert_eq!(s.features().row(3), &[3.0, 4.0]);
        assert_eq!(s.labels()[0], 2.0);
    }

    #[test]
    fn preprocessing() {
        let ds = toy();
        let n = normalize_rows(&ds);
        assert_eq!(n.features().row(0), &[0.6, 0.8]);
        assert_eq!(n.features().row(1), &[0.0, 0.0]);

        let st = Standardizer::fit(&ds);
        let z = st.apply(&ds).unwrap();
        for j in 0..2 {
            let col = z.features().column(j);
            let mean: f64 = col.iter().sum::<f64>() / 4.0;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}
