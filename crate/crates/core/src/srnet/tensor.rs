//! Minimal NCHW tensor for the from-scratch network.

use crate::error::{Error, Result};
use crate::raster::Image;

/// Dense f64 tensor with shape `(batch, channels, height, width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            shape: [n, c, h, w],
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let hw = self.shape[2] * self.shape[3];
        let off = (n * self.shape[1] + c) * hw;
        &self.data[off..off + hw]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let hw = self.shape[2] * self.shape[3];
        let off = (n * self.shape[1] + c) * hw;
        &mut self.data[off..off + hw]
    }

    /// Debug-mode guard against NaN/Inf escaping an op.
    pub fn debug_check_finite(&self, label: &str) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite value in {label}"
        );
    }
}

/// Image as a batch-1 tensor.
pub fn image_to_tensor(img: &Image) -> Tensor {
    let (w, h) = img.dims();
    let mut t = Tensor::zeros(1, img.channels(), h, w);
    for c in 0..img.channels() {
        t.plane_mut(0, c).copy_from_slice(img.plane(c));
    }
    t
}

/// Batch-1 tensor back to an image, clamping into `[0,1]`.
pub fn tensor_to_image(t: &Tensor) -> Result<Image> {
    let [n, c, h, w] = t.shape();
    if n != 1 {
        return Err(Error::DimensionMismatch(format!("batch {n} tensor is not an image")));
    }
    let mut samples = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        samples.extend(t.plane(0, ch).iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Image::from_planar(w, h, c, samples)
}
