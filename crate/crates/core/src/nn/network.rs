//! Layer stack with named activation taps.

use crate::nn::activation::Flatten;
use crate::nn::{Conv2d, Dense, GlobalAvgPool, Layer, LayerSpec, MaxPool2, Param, Relu};
use crate::rng;
use crate::tensor::Tensor;
use crate::Result;

/// A named activation recorded during [`Network::forward_taps`]: the input
/// itself plus the output of every layer, in order.
#[derive(Debug, Clone)]
pub struct Tap {
    pub name: String,
    pub tensor: Tensor,
}

/// A feed-forward stack built from [`LayerSpec`]s. Each layer is named by its
/// kind plus a per-kind counter: `conv1`, `relu1`, `pool1`, `conv2`, ...
pub struct Network {
    specs: Vec<LayerSpec>,
    names: Vec<String>,
    layers: Vec<Box<dyn Layer>>,
}

impl Network {
    /// Builds the stack with freshly initialized weights. All randomness
    /// comes from `seed` through the `INIT` stream, so equal seeds give
    /// bit-identical weights.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(crate::Error::InvalidArgument("empty network".into()));
        }
        let mut r = rng::seeded(rng::derive(seed, rng::stream::INIT));
        let mut layers: Vec<Box<dyn Layer>> = Vec::with_capacity(specs.len());
        for spec in specs {
            layers.push(match *spec {
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => Box::new(Conv2d::new(
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    &mut r,
                )),
                LayerSpec::Relu => Box::new(Relu::new()),
                LayerSpec::MaxPool => Box::new(MaxPool2::new()),
                LayerSpec::GlobalAvgPool => Box::new(GlobalAvgPool::new()),
                LayerSpec::Flatten => Box::new(Flatten::new()),
                LayerSpec::Dense { inputs, outputs } => {
                    Box::new(Dense::new(inputs, outputs, &mut r))
                }
            });
        }
        let mut counts = std::collections::HashMap::new();
        let names = specs
            .iter()
            .map(|s| {
                let c = counts.entry(s.tag()).or_insert(0usize);
                *c += 1;
                format!("{}{}", s.tag(), c)
            })
            .collect();
        Ok(Self {
            specs: specs.to_vec(),
            names,
            layers,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layer_names(&self) -> &[String] {
        &self.names
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate activation. The first tap
    /// is named `input`; the rest follow [`Network::layer_names`].
    pub fn forward_taps(&mut self, input: &Tensor) -> Result<Vec<Tap>> {
        let mut taps = Vec::with_capacity(self.layers.len() + 1);
        taps.push(Tap {
            name: "input".to_string(),
            tensor: input.clone(),
        });
        let mut x = input.clone();
        for (layer, name) in self.layers.iter_mut().zip(&self.names) {
            x = layer.forward(&x)?;
            taps.push(Tap {
                name: name.clone(),
                tensor: x.clone(),
            });
        }
        Ok(taps)
    }

    /// Propagates a loss gradient through the stack, accumulating weight
    /// gradients. Call after `forward` on the same batch.
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grad();
        }
    }

    pub fn params(&mut self) -> Vec<Param<'_>> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    /// All weight tensors in layer order, for serialization.
    pub fn weights(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.weights()).collect()
    }

    /// Replaces every weight tensor; `weights` must match the layout of
    /// [`Network::weights`] exactly.
    pub fn set_weights(&mut self, weights: Vec<Tensor>) -> Result<()> {
        let mut it = weights.into_iter();
        for layer in &mut self.layers {
            let want = layer.weights().len();
            let chunk: Vec<Tensor> = it.by_ref().take(want).collect();
            if chunk.len() != want {
                return Err(crate::Error::InvalidArgument(
                    "too few weight tensors for this architecture".into(),
                ));
            }
            layer.set_weights(chunk)?;
        }
        if it.next().is_some() {
            return Err(crate::Error::InvalidArgument(
                "too many weight tensors for this architecture".into(),
            ));
        }
        Ok(())
    }

    pub fn predict(&mut self, input: &Tensor) -> Result<Vec<usize>> {
        let logits = self.forward(input)?;
        Ok(crate::nn::loss::argmax_rows(&logits))
    }

    pub fn num_params(&self) -> usize {
        self.weights().iter().map(|t| t.numel()).sum()
    }

    /// One label per parameter group, aligned with [`Network::params`] and
    /// [`Network::weights`]: `conv1.w`, `conv1.b`, `dense1.w`, ...
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(&self.names) {
            for i in 0..layer.weights().len() {
                let suffix = match i {
                    0 => "w".to_string(),
                    1 => "b".to_string(),
                    n => format!("p{n}"),
                };
                out.push(format!("{name}.{suffix}"));
            }
        }
        out
    }
}

/// The standard probe subject: `blocks` repeats of conv(3x3, pad 1) + relu +
/// 2x2 maxpool, all with `channels` filters, then global average pooling and
/// a dense classifier. Input spatial dims must survive `blocks` halvings.
pub fn uniform_cnn(
    in_channels: usize,
    channels: usize,
    blocks: usize,
    classes: usize,
) -> Vec<LayerSpec> {
    assert!(blocks > 0, "need at least one block");
    let mut specs = Vec::new();
    for b in 0..blocks {
        specs.push(LayerSpec::Conv {
            in_channels: if b == 0 { in_channels } else { channels },
            out_channels: channels,
            kernel: 3,
            stride: 1,
            padding: 1,
        });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::MaxPool);
    }
    specs.push(LayerSpec::GlobalAvgPool);
    specs.push(LayerSpec::Dense {
        inputs: channels,
        outputs: classes,
    });
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax_cross_entropy;

    #[test]
    fn shapes_flow_through_uniform_cnn() {
        let specs = uniform_cnn(3, 8, 2, 10);
        let mut net = Network::new(&specs, 0).unwrap();
        let x = Tensor::zeros(vec![2, 3, 16, 16]);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 10]);
    }

    #[test]
    fn taps_cover_input_and_every_layer() {
        let specs = uniform_cnn(1, 4, 1, 3);
        let mut net = Network::new(&specs, 0).unwrap();
        let x = Tensor::zeros(vec![1, 1, 8, 8]);
        let taps = net.forward_taps(&x).unwrap();
        let names: Vec<&str> = taps.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(
            names,
            ["input", "conv1", "relu1", "pool1", "gap1", "dense1"]
        );
        assert_eq!(taps[3].tensor.shape(), &[1, 4, 4, 4]);
        assert_eq!(taps[5].tensor.shape(), &[1, 3]);
    }

    #[test]
    fn same_seed_same_weights() {
        let specs = uniform_cnn(1, 4, 1, 3);
        let a = Network::new(&specs, 42).unwrap();
        let b = Network::new(&specs, 42).unwrap();
        let c = Network::new(&specs, 43).unwrap();
        for (wa, wb) in a.weights().iter().zip(b.weights()) {
            assert_eq!(wa.data(), wb.data());
        }
        let differs = a
            .weights()
            .iter()
            .zip(c.weights())
            .any(|(wa, wc)| wa.data() != wc.data());
        assert!(differs, "different seeds produced identical weights");
    }

    #[test]
    fn weight_round_trip_preserves_outputs() {
        let specs = uniform_cnn(1, 4, 1, 3);
        let mut a = Network::new(&specs, 1).unwrap();
        let mut b = Network::new(&specs, 2).unwrap();
        let saved: Vec<Tensor> = a.weights().into_iter().cloned().collect();
        b.set_weights(saved).unwrap();
        let x = Tensor::new(vec![1, 1, 8, 8], (0..64).map(|i| i as f32 / 64.0).collect()).unwrap();
        assert_eq!(a.forward(&x).unwrap().data(), b.forward(&x).unwrap().data());
    }

    #[test]
    fn set_weights_rejects_wrong_count() {
        let specs = uniform_cnn(1, 4, 1, 3);
        let mut net = Network::new(&specs, 1).unwrap();
        assert!(net.set_weights(Vec::new()).is_err());
    }

    #[test]
    fn one_sgd_step_lowers_loss_on_a_tiny_batch() {
        let specs = vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 4, outputs: 2 },
        ];
        let mut net = Network::new(&specs, 5).unwrap();
        let x = Tensor::new(
            vec![4, 1, 2, 2],
            vec![
                1.0, 0.0, 0.0, 0.0, //
                0.9, 0.1, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.1, 0.1, 0.9,
            ],
        ).unwrap();
        let labels = [0u8, 0, 1, 1];
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            net.zero_grad();
            let logits = net.forward(&x).unwrap();
            let (loss, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
            net.backward(&grad).unwrap();
            for p in net.params() {
                for (v, g) in p.value.iter_mut().zip(p.grad.iter()) {
                    *v -= 0.5 * g;
                }
            }
            assert!(loss < last, "loss {loss} did not drop below {last}");
            last = loss;
        }
    }
}
