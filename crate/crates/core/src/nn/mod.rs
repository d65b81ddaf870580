//! The network: explicit-loop layers with hand-written backprop.
//!
//! Layers own their weights, weight gradients, and whatever forward state
//! their backward pass needs. `forward` caches, `backward` consumes the cache
//! and returns the gradient with respect to the layer input, so a network is
//! just a stack walked forwards and then backwards.
//!
//! Shape errors at the API boundary come back as [`crate::Error::Shape`];
//! calling `backward` without a preceding `forward` is a programming error
//! and panics.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod network;
pub mod optim;
pub mod pool;

pub use activation::{Flatten, Relu};
pub use conv::Conv2d;
pub use dense::Dense;
pub use gradcheck::{check_gradients, GradCheckReport};
pub use network::{uniform_cnn, Network, Tap};
pub use optim::Sgd;
pub use pool::{GlobalAvgPool, MaxPool2};

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::Result;

/// A mutable view of one parameter tensor and its gradient, handed to the
/// optimizer. The two slices always have equal length.
pub struct Param<'a> {
    pub value: &'a mut [f32],
    pub grad: &'a mut [f32],
}

/// Serializable description of a layer, enough to rebuild it (weights are
/// stored separately in the model container).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    MaxPool,
    /// Collapses each channel plane to its mean, `[n,c,h,w] -> [n,c]`.
    GlobalAvgPool,
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    /// Short lowercase tag used to build tap names ("conv", "relu", ...).
    pub fn tag(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool => "pool",
            LayerSpec::GlobalAvgPool => "gap",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }
}

/// One stage of the network.
pub trait Layer {
    fn spec(&self) -> LayerSpec;

    fn forward(&mut self, input: &Tensor) -> Result<Tensor>;

    /// Propagates `grad` (w.r.t. this layer's output) back to the input,
    /// accumulating weight gradients along the way.
    fn backward(&mut self, grad: &Tensor) -> Result<Tensor>;

    /// Weight/gradient pairs for the optimizer; empty for stateless layers.
    fn params(&mut self) -> Vec<Param<'_>> {
        Vec::new()
    }

    /// Read-only weight tensors in a fixed order (weight, then bias).
    fn weights(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    /// Replaces weights, checking shapes. Order matches [`Layer::weights`].
    fn set_weights(&mut self, weights: Vec<Tensor>) -> Result<()> {
        if weights.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument(
                "layer has no weights to set".into(),
            ))
        }
    }

    fn zero_grad(&mut self) {}
}

/// Checks an incoming weight tensor against the expected shape.
pub(crate) fn take_weight(
    weights: &mut std::vec::IntoIter<Tensor>,
    expect: &[usize],
    what: &str,
) -> Result<Tensor> {
    let t = weights.next().ok_or_else(|| {
        crate::Error::InvalidArgument(format!("missing {what} tensor"))
    })?;
    if t.shape() != expect {
        return Err(crate::Error::Shape(format!(
            "{what}: expected shape {:?}, got {:?}",
            expect,
            t.shape()
        )));
    }
    Ok(t)
}
