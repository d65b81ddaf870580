//! Spatial pooling layers.

use crate::nn::{Layer, LayerSpec};
use crate::tensor::Tensor;
use crate::Result;

/// 2x2 max pooling with stride 2. Odd trailing rows/columns are dropped.
/// Ties inside a window go to the first element in row-major order, and the
/// backward pass routes the gradient to that same element.
#[derive(Debug, Default)]
pub struct MaxPool2 {
    /// Flat input index of each window's argmax, plus the input shape.
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl Layer for MaxPool2 {
    fn spec(&self) -> LayerSpec {
        LayerSpec::MaxPool
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let &[n, c, h, w] = input.shape() else {
            return Err(crate::Error::Shape(format!(
                "maxpool: expected [n, c, h, w], got {:?}",
                input.shape()
            )));
        };
        let (ho, wo) = (h / 2, w / 2);
        if ho == 0 || wo == 0 {
            return Err(crate::Error::Shape(format!(
                "maxpool: input {h}x{w} smaller than the 2x2 window"
            )));
        }
        let x = input.data();
        let mut out = vec![0.0f32; n * c * ho * wo];
        let mut argmax = vec![0usize; out.len()];
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * h * w;
                let obase = (i * c + ch) * ho * wo;
                for oh in 0..ho {
                    for ow in 0..wo {
                        let mut best = base + (2 * oh) * w + 2 * ow;
                        let mut val = x[best];
                        for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = base + (2 * oh + di) * w + 2 * ow + dj;
                            if x[idx] > val {
                                val = x[idx];
                                best = idx;
                            }
                        }
                        out[obase + oh * wo + ow] = val;
                        argmax[obase + oh * wo + ow] = best;
                    }
                }
            }
        }
        self.cache = Some((argmax, input.shape().to_vec()));
        Tensor::new(vec![n, c, ho, wo], out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (argmax, in_shape) =
            self.cache.take().expect("backward called before forward");
        if grad.numel() != argmax.len() {
            return Err(crate::Error::Shape(format!(
                "maxpool backward: {} elements, expected {}",
                grad.numel(),
                argmax.len()
            )));
        }
        let mut gx = vec![0.0f32; in_shape.iter().product()];
        for (&idx, &g) in argmax.iter().zip(grad.data()) {
            gx[idx] += g;
        }
        Tensor::new(in_shape, gx)
    }
}

/// Mean over each channel plane: `[n, c, h, w] -> [n, c]`.
#[derive(Debug, Default)]
pub struct GlobalAvgPool {
    in_shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self { in_shape: None }
    }
}

impl Layer for GlobalAvgPool {
    fn spec(&self) -> LayerSpec {
        LayerSpec::GlobalAvgPool
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let &[n, c, h, w] = input.shape() else {
            return Err(crate::Error::Shape(format!(
                "global avg pool: expected [n, c, h, w], got {:?}",
                input.shape()
            )));
        };
        let plane = h * w;
        let x = input.data();
        let mut out = vec![0.0f32; n * c];
        for (slot, chunk) in out.iter_mut().zip(x.chunks_exact(plane)) {
            *slot = chunk.iter().sum::<f32>() / plane as f32;
        }
        self.in_shape = Some(input.shape().to_vec());
        Tensor::new(vec![n, c], out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let shape = self.in_shape.take().expect("backward called before forward");
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        if grad.shape() != [n, c] {
            return Err(crate::Error::Shape(format!(
                "global avg pool backward: expected [{n}, {c}], got {:?}",
                grad.shape()
            )));
        }
        let plane = h * w;
        let mut gx = vec![0.0f32; n * c * plane];
        for (chunk, &g) in gx.chunks_exact_mut(plane).zip(grad.data()) {
            chunk.fill(g / plane as f32);
        }
        Tensor::new(shape, gx)
    }
}
