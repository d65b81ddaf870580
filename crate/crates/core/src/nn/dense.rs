//! Fully connected layer.

use crate::nn::{init, take_weight, Layer, LayerSpec, Param};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::Result;

/// `y = W x + b` applied per sample. Weights are `[outputs, inputs]`
/// row-major, so each output neuron's weights are contiguous.
#[derive(Debug)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weight: Tensor,
    bias: Tensor,
    grad_weight: Tensor,
    grad_bias: Tensor,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        assert!(inputs > 0 && outputs > 0, "dense dims must be positive");
        Self {
            inputs,
            outputs,
            weight: init::he_normal(&[outputs, inputs], inputs, rng),
            bias: Tensor::zeros(vec![outputs]),
            grad_weight: Tensor::zeros(vec![outputs, inputs]),
            grad_bias: Tensor::zeros(vec![outputs]),
            cache: None,
        }
    }
}

impl Layer for Dense {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Dense {
            inputs: self.inputs,
            outputs: self.outputs,
        }
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.shape().len() != 2 || input.shape()[1] != self.inputs {
            return Err(crate::Error::Shape(format!(
                "dense: expected [n, {}], got {:?}",
                self.inputs,
                input.shape()
            )));
        }
        let n = input.shape()[0];
        let mut out = vec![0.0f32; n * self.outputs];
        let w = self.weight.data();
        let b = self.bias.data();
        for i in 0..n {
            let x = input.sample(i);
            let y = &mut out[i * self.outputs..(i + 1) * self.outputs];
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                let mut acc = b[o];
                for (wk, xk) in row.iter().zip(x) {
                    acc += wk * xk;
                }
                *yo = acc;
            }
        }
        self.cache = Some(input.clone());
        Tensor::new(vec![n, self.outputs], out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let input = self.cache.take().expect("backward called before forward");
        let n = input.shape()[0];
        if grad.shape() != [n, self.outputs] {
            return Err(crate::Error::Shape(format!(
                "dense backward: expected [{n}, {}], got {:?}",
                self.outputs,
                grad.shape()
            )));
        }
        let w = self.weight.data();
        let gw = self.grad_weight.data_mut();
        let gb = self.grad_bias.data_mut();
        let mut gx = vec![0.0f32; n * self.inputs];
        for i in 0..n {
            let x = input.sample(i);
            let g = grad.sample(i);
            let gxi = &mut gx[i * self.inputs..(i + 1) * self.inputs];
            for (o, &go) in g.iter().enumerate() {
                gb[o] += go;
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
                for k in 0..self.inputs {
                    grow[k] += go * x[k];
                    gxi[k] += go * row[k];
                }
            }
        }
        Tensor::new(vec![n, self.inputs], gx)
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        vec![
            Param {
                value: self.weight.data_mut(),
                grad: self.grad_weight.data_mut(),
            },
            Param {
                value: self.bias.data_mut(),
                grad: self.grad_bias.data_mut(),
            },
        ]
    }

    fn weights(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn set_weights(&mut self, weights: Vec<Tensor>) -> Result<()> {
        let mut it = weights.into_iter();
        self.weight = take_weight(&mut it, &[self.outputs, self.inputs], "dense weight")?;
        self.bias = take_weight(&mut it, &[self.outputs], "dense bias")?;
        Ok(())
    }

    fn zero_grad(&mut self) {
        self.grad_weight.data_mut().fill(0.0);
        self.grad_bias.data_mut().fill(0.0);
    }
}
