//! Datasets: CIFAR-10 binary batches and seeded synthetic tasks.

pub mod cifar;
pub mod synthetic;

use crate::linalg::Matrix;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// A labelled image set with layout `[n, channels, height, width]`, pixel
/// values in `[0, 1]` unless a preprocessing step has replaced them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<u8>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::Shape(format!(
                "dataset images must be [n, c, h, w], got {:?}",
                images.shape()
            )));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { images, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(channels, height, width)` of a single image.
    pub fn image_dims(&self) -> (usize, usize, usize) {
        let s = self.images.shape();
        (s[1], s[2], s[3])
    }

    /// First `n` samples (file order), cheap way to cap experiment size.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let sample_len = self.images.sample_len();
        let (c, h, w) = self.image_dims();
        let images = Tensor::new(
            vec![n, c, h, w],
            self.images.data()[..n * sample_len].to_vec(),
        )
        .expect("prefix of a valid dataset");
        Dataset {
            images,
            labels: self.labels[..n].to_vec(),
            num_classes: self.num_classes,
        }
    }

    /// Gathers the given sample indices into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let sample_len = self.images.sample_len();
        let (c, h, w) = self.image_dims();
        let mut data = Vec::with_capacity(indices.len() * sample_len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.images.sample(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            images: Tensor::new(vec![indices.len(), c, h, w], data).expect("gathered samples"),
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Flattens each image to a row of an `n x (c*h*w)` f64 matrix, the form
    /// the probes consume.
    pub fn to_rows(&self) -> Matrix {
        let n = self.len();
        let d = self.images.sample_len();
        let data: Vec<f64> = self.images.data().iter().map(|&x| x as f64).collect();
        Matrix::from_vec(n, d, data).expect("flattened dataset")
    }
}
