use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::rng::Rng as StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
}

/// Two-layer perceptron `F -> hidden -> d` with a tanh between the layers.
/// Weights are stored row-major as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of a forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Forward {
    pub hidden: Matrix,
    /// Pre-normalization outputs.
    pub pre: Matrix,
    /// Unit-norm embeddings.
    pub z: Matrix,
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(shape: EncoderShape, rng: &mut StreamRng) -> Self {
        let mut layer = |fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect::<Vec<f64>>()
        };
        let w1 = layer(shape.input_dim, shape.hidden_dim);
        let w2 = layer(shape.hidden_dim, shape.embed_dim);
        EncoderParams {
            shape,
            w1,
            b1: vec![0.0; shape.hidden_dim],
            w2,
            b2: vec![0.0; shape.embed_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            shape: self.shape,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn check_shape(&self) -> Result<()> {
        let s = self.shape;
        let ok = self.w1.len() == s.input_dim * s.hidden_dim
            && self.b1.len() == s.hidden_dim
            && self.w2.len() == s.hidden_dim * s.embed_dim
            && self.b2.len() == s.embed_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::Checkpoint("parameter lengths do not match the declared shape".into()))
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Forward> {
        let s = self.shape;
        if x.cols() != s.input_dim {
            return Err(Error::DimensionMismatch {
                what: "encoder input".into(),
                expected: s.input_dim,
                got: x.cols(),
            });
        }
        let mut hidden = Matrix::zeros(x.rows(), s.hidden_dim);
        let mut pre = Matrix::zeros(x.rows(), s.embed_dim);
        let mut z = Matrix::zeros(x.rows(), s.embed_dim);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let hr = hidden.row_mut(r);
            for (j, h) in hr.iter_mut().enumerate() {
                *h = (self.b1[j] + dot(&self.w1[j * s.input_dim..(j + 1) * s.input_dim], xr)).tanh();
            }
            let hr = hidden.row(r);
            let pr = pre.row_mut(r);
            for (k, p) in pr.iter_mut().enumerate() {
                *p = self.b2[k] + dot(&self.w2[k * s.hidden_dim..(k + 1) * s.hidden_dim], hr);
            }
            let n = norm(pre.row(r)).max(1e-12);
            for (zo, p) in z.row_mut(r).iter_mut().zip(pre.row(r)) {
                *zo = p / n;
            }
        }
        Ok(Forward { hidden, pre, z })
    }

    /// Parameter gradient given `d_pre = dL/d(pre-normalization output)`.
    pub fn backward(&self, x: &Matrix, fwd: &Forward, d_pre: &Matrix) -> EncoderParams {
        let s = self.shape;
        let mut g = self.zeros_like();
        let mut d_hidden = vec![0.0; s.hidden_dim];
        for r in 0..x.rows() {
            let dp = d_pre.row(r);
            let hr = fwd.hidden.row(r);
            d_hidden.iter_mut().for_each(|v| *v = 0.0);
            for (k, &gk) in dp.iter().enumerate() {
                if gk == 0.0 {
                    continue;
                }
                g.b2[k] += gk;
                let wrow = &self.w2[k * s.hidden_dim..(k + 1) * s.hidden_dim];
                let grow = &mut g.w2[k * s.hidden_dim..(k + 1) * s.hidden_dim];
                for j in 0..s.hidden_dim {
                    grow[j] += gk * hr[j];
                    d_hidden[j] += gk * wrow[j];
                }
            }
            let xr = x.row(r);
            for j in 0..s.hidden_dim {
                let da = d_hidden[j] * (1.0 - hr[j] * hr[j]);
                if da == 0.0 {
                    continue;
                }
                g.b1[j] += da;
                let grow = &mut g.w1[j * s.input_dim..(j + 1) * s.input_dim];
                for (gw, xv) in grow.iter_mut().zip(xr) {
                    *gw += da * xv;
                }
            }
        }
        g
    }
}
