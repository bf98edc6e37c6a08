use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Model;
use crate::error::{mismatch, Result};
use crate::numerics::DenseMatrix;

/// Frozen random-features map `x ↦ ReLU(x·P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub seed: u64,
    projection: DenseMatrix,
}

impl Featurizer {
    pub fn input_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn projection(&self) -> &DenseMatrix {
        &self.projection
    }
}

/// Gaussian projection with entry variance `2/d`.
pub fn build_featurizer(d: usize, feature_dim: usize, seed: u64) -> Featurizer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (2.0 / d.max(1) as f64).sqrt();
    let projection = DenseMatrix::from_fn(d, feature_dim, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    });
    Featurizer { seed, projection }
}

pub fn featurize(f: &Featurizer, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != f.input_dim() {
        return Err(mismatch("featurize", format!("{} input columns", f.input_dim()), x.cols()));
    }
    let mut a = x.matmul(&f.projection)?;
    a.relu_inplace();
    Ok(a)
}

pub(crate) fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..=limit))
}

/// Trainable map `A·W` on featurized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub seed: u64,
    pub weights: DenseMatrix,
}

impl LinearModel {
    pub fn zeros(features: usize, outputs: usize) -> Self {
        Self {
            seed: 0,
            weights: DenseMatrix::zeros(features, outputs),
        }
    }
}

/// Xavier-uniform weights on `±√(6/(D+C))`.
pub fn init_linear(features: usize, outputs: usize, seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinearModel {
        seed,
        weights: xavier(features, outputs, &mut rng),
    }
}

pub fn forward_linear(m: &LinearModel, a: &DenseMatrix) -> Result<DenseMatrix> {
    a.matmul(&m.weights)
}

impl Model for LinearModel {
    type Cache = ();

    fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    fn num_outputs(&self) -> usize {
        self.weights.cols()
    }

    fn num_params(&self) -> usize {
        self.weights.data().len()
    }

    fn params(&self) -> Vec<f64> {
        self.weights.data().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(mismatch("LinearModel::set_params", self.num_params(), p.len()));
        }
        self.weights.data_mut().copy_from_slice(p);
        Ok(())
    }

    fn last_layer(&self) -> &DenseMatrix {
        &self.weights
    }

    fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        forward_linear(self, x)
    }

    fn forward_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<(DenseMatrix, ())> {
        if x.cols() != self.input_dim() {
            return Err(mismatch("forward_linear", self.input_dim(), x.cols()));
        }
        let c = self.num_outputs();
        let w = self.weights.data();
        let mut out = DenseMatrix::zeros(rows.len(), c);
        for (r, &i) in rows.iter().enumerate() {
            let o = out.row_mut(r);
            for (&a, wk) in x.row(i).iter().zip(w.chunks_exact(c)) {
                o.iter_mut().zip(wk).for_each(|(o, &w)| *o += a * w);
            }
        }
        Ok((out, ()))
    }

    fn backward_step(
        &mut self,
        x: &DenseMatrix,
        rows: &[usize],
        _cache: (),
        g: &DenseMatrix,
        lr: f64,
        mut grad_out: Option<&mut [f64]>,
    ) -> Result<()> {
        let c = self.num_outputs();
        let w = self.weights.data_mut();
        for (r, &i) in rows.iter().enumerate() {
            let gr = g.row(r);
            let xr = x.row(i);
            if let Some(buf) = grad_out.as_deref_mut() {
                for (&a, bk) in xr.iter().zip(buf.chunks_exact_mut(c)) {
                    bk.iter_mut().zip(gr).for_each(|(b, &g)| *b += a * g);
                }
            }
            if lr != 0.0 {
                for (&a, wk) in xr.iter().zip(w.chunks_exact_mut(c)) {
                    let s = lr * a;
                    wk.iter_mut().zip(gr).for_each(|(w, &g)| *w -= s * g);
                }
            }
        }
        Ok(())
    }
}
