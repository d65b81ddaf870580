//! Elementwise activations.

use crate::nn::{Layer, LayerSpec};
use crate::tensor::Tensor;
use crate::Result;

/// Rectified linear unit. The backward mask is taken from the cached output
/// (`out > 0`), so the gradient at exactly zero is zero.
#[derive(Debug, Default)]
pub struct Relu {
    cache: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl Layer for Relu {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Relu
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let data: Vec<f32> = input.data().iter().map(|&x| x.max(0.0)).collect();
        let out = Tensor::new(input.shape().to_vec(), data)?;
        self.cache = Some(out.clone());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let out = self.cache.take().expect("backward called before forward");
        if grad.shape() != out.shape() {
            return Err(crate::Error::Shape(format!(
                "relu backward: grad shape {:?} does not match output {:?}",
                grad.shape(),
                out.shape()
            )));
        }
        let data: Vec<f32> = grad
            .data()
            .iter()
            .zip(out.data())
            .map(|(&g, &y)| if y > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::new(out.shape().to_vec(), data)
    }
}

/// Flattens `[n, ...]` to `[n, prod(...)]`; backward restores the shape.
#[derive(Debug, Default)]
pub struct Flatten {
    in_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self { in_shape: None }
    }
}

impl Layer for Flatten {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Flatten
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.shape().is_empty() {
            return Err(crate::Error::Shape("flatten: scalar input".into()));
        }
        self.in_shape = Some(input.shape().to_vec());
        let n = input.shape()[0];
        let rest = input.numel() / n.max(1);
        Tensor::new(vec![n, rest], input.data().to_vec())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let shape = self.in_shape.take().expect("backward called before forward");
        if grad.numel() != shape.iter().product::<usize>() {
            return Err(crate::Error::Shape(format!(
                "flatten backward: {} elements, expected {}",
                grad.numel(),
                shape.iter().product::<usize>()
            )));
        }
        Tensor::new(shape, grad.data().to_vec())
    }
}
