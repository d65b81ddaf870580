//! 2-D convolution (cross-correlation, as usual in nets) with zero padding.

use crate::nn::{init, take_weight, Layer, LayerSpec, Param};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::Result;

/// Convolution over `[n, c, h, w]` activations with a square kernel.
/// Output spatial size is `floor((dim + 2*padding - kernel) / stride) + 1`.
#[derive(Debug)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    weight: Tensor,
    bias: Tensor,
    grad_weight: Tensor,
    grad_bias: Tensor,
    cache: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> Self {
        assert!(in_channels > 0 && out_channels > 0, "channels must be positive");
        assert!(kernel > 0 && stride > 0, "kernel and stride must be positive");
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: init::he_normal(
                &[out_channels, in_channels, kernel, kernel],
                fan_in,
                rng,
            ),
            bias: Tensor::zeros(vec![out_channels]),
            grad_weight: Tensor::zeros(vec![out_channels, in_channels, kernel, kernel]),
            grad_bias: Tensor::zeros(vec![out_channels]),
            cache: None,
        }
    }

    fn out_dim(&self, dim: usize) -> Result<usize> {
        let padded = dim + 2 * self.padding;
        if padded < self.kernel {
            return Err(crate::Error::Shape(format!(
                "conv: input dim {dim} too small for kernel {} with padding {}",
                self.kernel, self.padding
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }
}

impl Layer for Conv2d {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Conv {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
        }
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let &[n, c, h, w] = input.shape() else {
            return Err(crate::Error::Shape(format!(
                "conv: expected [n, c, h, w], got {:?}",
                input.shape()
            )));
        };
        if c != self.in_channels {
            return Err(crate::Error::Shape(format!(
                "conv: expected {} input channels, got {c}",
                self.in_channels
            )));
        }
        let (ho, wo) = (self.out_dim(h)?, self.out_dim(w)?);
        let k = self.kernel;
        let (s, p) = (self.stride, self.padding as isize);
        let x = input.data();
        let wt = self.weight.data();
        let b = self.bias.data();
        let mut out = vec![0.0f32; n * self.out_channels * ho * wo];
        for i in 0..n {
            for oc in 0..self.out_channels {
                let obase = (i * self.out_channels + oc) * ho * wo;
                for oh in 0..ho {
                    for ow in 0..wo {
                        let mut acc = b[oc];
                        for ic in 0..self.in_channels {
                            let xbase = (i * c + ic) * h * w;
                            let wbase = ((oc * c + ic) * k) * k;
                            for ki in 0..k {
                                let ih = (oh * s) as isize - p + ki as isize;
                                if ih < 0 || ih >= h as isize {
                                    continue;
                                }
                                let xrow = xbase + ih as usize * w;
                                let wrow = wbase + ki * k;
                                for kj in 0..k {
                                    let iw = (ow * s) as isize - p + kj as isize;
                                    if iw < 0 || iw >= w as isize {
                                        continue;
                                    }
                                    acc += wt[wrow + kj] * x[xrow + iw as usize];
                                }
                            }
                        }
                        out[obase + oh * wo + ow] = acc;
                    }
                }
            }
        }
        self.cache = Some(input.clone());
        Tensor::new(vec![n, self.out_channels, ho, wo], out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let input = self.cache.take().expect("backward called before forward");
        let &[n, c, h, w] = input.shape() else { unreachable!() };
        let (ho, wo) = (self.out_dim(h)?, self.out_dim(w)?);
        if grad.shape() != [n, self.out_channels, ho, wo] {
            return Err(crate::Error::Shape(format!(
                "conv backward: expected {:?}, got {:?}",
                [n, self.out_channels, ho, wo],
                grad.shape()
            )));
        }
        let k = self.kernel;
        let (s, p) = (self.stride, self.padding as isize);
        let x = input.data();
        let wt = self.weight.data();
        let g = grad.data();
        let gw = self.grad_weight.data_mut();
        let gb = self.grad_bias.data_mut();
        let mut gx = vec![0.0f32; x.len()];
        for i in 0..n {
            for oc in 0..self.out_channels {
                let obase = (i * self.out_channels + oc) * ho * wo;
                for oh in 0..ho {
                    for ow in 0..wo {
                        let go = g[obase + oh * wo + ow];
                        if go == 0.0 {
                            continue;
                        }
                        gb[oc] += go;
                        for ic in 0..c {
                            let xbase = (i * c + ic) * h * w;
                            let wbase = ((oc * c + ic) * k) * k;
                            for ki in 0..k {
                                let ih = (oh * s) as isize - p + ki as isize;
                                if ih < 0 || ih >= h as isize {
                                    continue;
                                }
                                let xrow = xbase + ih as usize * w;
                                let wrow = wbase + ki * k;
                                for kj in 0..k {
                                    let iw = (ow * s) as isize - p + kj as isize;
                                    if iw < 0 || iw >= w as isize {
                                        continue;
                                    }
                                    gw[wrow + kj] += go * x[xrow + iw as usize];
                                    gx[xrow + iw as usize] += go * wt[wrow + kj];
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![n, c, h, w], gx)
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
        let k = self.kernel;
        let mut it = weights.into_iter();
        self.weight = take_weight(
            &mut it,
            &[self.out_channels, self.in_channels, k, k],
            "conv weight",
        )?;
        self.bias = take_weight(&mut it, &[self.out_channels], "conv bias")?;
        Ok(())
    }

    fn zero_grad(&mut self) {
        self.grad_weight.data_mut().fill(0.0);
        self.grad_bias.data_mut().fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// 1x1x3x3 input, single 2x2 kernel, stride 1, no padding.
    #[test]
    fn forward_matches_hand_computation() {
        let mut conv = Conv2d::new(1, 1, 2, 1, 0, &mut rng::seeded(0));
        conv.weight = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        conv.bias = Tensor::new(vec![1], vec![0.5]).unwrap();
        let x = Tensor::new(
            vec![1, 1, 3, 3],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        ).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        // window top-left minus bottom-right, plus bias
        assert_eq!(y.data(), &[1.0 - 5.0 + 0.5, 2.0 - 6.0 + 0.5, 4.0 - 8.0 + 0.5, 5.0 - 9.0 + 0.5]);
    }

    #[test]
    fn padding_preserves_size_for_3x3() {
        let mut conv = Conv2d::new(2, 4, 3, 1, 1, &mut rng::seeded(1));
        let x = Tensor::zeros(vec![2, 2, 8, 8]);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4, 8, 8]);
    }

    #[test]
    fn stride_two_halves_size() {
        let mut conv = Conv2d::new(1, 1, 2, 2, 0, &mut rng::seeded(2));
        let x = Tensor::zeros(vec![1, 1, 8, 8]);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
    }

    #[test]
    fn backward_identity_kernel_passes_gradient() {
        // 1x1 kernel with weight 1 is the identity map, so the input gradient
        // must equal the output gradient and the weight gradient is sum(g*x).
        let mut conv = Conv2d::new(1, 1, 1, 1, 0, &mut rng::seeded(3));
        conv.weight = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        conv.bias = Tensor::new(vec![1], vec![0.0]).unwrap();
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        conv.forward(&x).unwrap();
        let g = Tensor::new(vec![1, 1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let gx = conv.backward(&g).unwrap();
        assert_eq!(gx.data(), g.data());
        let gw = conv.grad_weight.data()[0];
        assert!((gw - (0.1 + 0.4 + 0.9 + 1.6)).abs() < 1e-6);
        assert!((conv.grad_bias.data()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let mut conv = Conv2d::new(3, 1, 3, 1, 1, &mut rng::seeded(4));
        let x = Tensor::zeros(vec![1, 2, 8, 8]);
        assert!(conv.forward(&x).is_err());
    }
}
