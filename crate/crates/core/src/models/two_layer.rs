use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::xavier;
use super::Model;
use crate::error::{mismatch, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// `ReLU(X·W₀)·W₁` with both layers trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    pub seed: u64,
    pub activation: Activation,
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
}

/// Each layer Xavier-uniform with its own fan-in and fan-out; the two layers
/// draw from one seeded stream in order.
pub fn init_two_layer(d: usize, hidden: usize, outputs: usize, seed: u64) -> TwoLayerNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = xavier(d, hidden, &mut rng);
    let w1 = xavier(hidden, outputs, &mut rng);
    TwoLayerNet {
        seed,
        activation: Activation::Relu,
        w0,
        w1,
    }
}

/// Returns the hidden activations `A = ReLU(X·W₀)` and outputs `A·W₁`.
pub fn forward_two_layer(m: &TwoLayerNet, x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut h = x.matmul(&m.w0)?;
    h.relu_inplace();
    let out = h.matmul(&m.w1)?;
    Ok((h, out))
}

pub struct TwoLayerCache {
    x: DenseMatrix,
    h: DenseMatrix,
}

impl Model for TwoLayerNet {
    type Cache = TwoLayerCache;

    fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    fn num_outputs(&self) -> usize {
        self.w1.cols()
    }

    fn num_params(&self) -> usize {
        self.w0.data().len() + self.w1.data().len()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.w0.data().to_vec();
        p.extend_from_slice(self.w1.data());
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(mismatch("TwoLayerNet::set_params", self.num_params(), p.len()));
        }
        let split = self.w0.data().len();
        self.w0.data_mut().copy_from_slice(&p[..split]);
        self.w1.data_mut().copy_from_slice(&p[split..]);
        Ok(())
    }

    fn last_layer(&self) -> &DenseMatrix {
        &self.w1
    }

    fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(forward_two_layer(self, x)?.1)
    }

    fn forward_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<(DenseMatrix, TwoLayerCache)> {
        let xb = x.select_rows(rows);
        let (h, out) = forward_two_layer(self, &xb)?;
        Ok((out, TwoLayerCache { x: xb, h }))
    }

    fn backward_step(
        &mut self,
        _x: &DenseMatrix,
        _rows: &[usize],
        cache: TwoLayerCache,
        g: &DenseMatrix,
        lr: f64,
        grad_out: Option<&mut [f64]>,
    ) -> Result<()> {
        let TwoLayerCache { x, h } = cache;
        let dw1 = h.t_matmul(g)?;
        let mut dh = g.matmul_t(&self.w1)?;
        for (d, &a) in dh.data_mut().iter_mut().zip(h.data()) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let dw0 = x.t_matmul(&dh)?;
        if let Some(buf) = grad_out {
            let split = dw0.data().len();
            buf[..split].iter_mut().zip(dw0.data()).for_each(|(b, &g)| *b += g);
            buf[split..].iter_mut().zip(dw1.data()).for_each(|(b, &g)| *b += g);
        }
        if lr != 0.0 {
            self.w0.axpy(-lr, &dw0)?;
            self.w1.axpy(-lr, &dw1)?;
        }
        Ok(())
    }
}
