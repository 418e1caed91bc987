//! Camera-lens super-resolution toolkit: paired-capture rectification,
//! synthetic degradation modeling with quantitative comparison, and a small
//! trainable residual convolutional super-resolver.
//!
//! Data-parallel inner loops run on rayon when the default `parallel`
//! feature is enabled and sequentially otherwise; results are identical in
//! both modes and for any thread count.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod metrics;
mod par;
pub mod raster;
pub mod rectify;
pub mod resample;
pub mod srnet;
pub mod synth;

pub use dataset::{load_dataset, Dataset, Manifest, PairedScene, Split};
pub use error::{Error, Result};
pub use raster::{load_image, save_image, Image};
pub use resample::{
    cubic_weight, decimate, degrade_bicubic, degrade_gaussian, degrade_gaussian_ordered,
    gaussian_blur, gaussian_kernel, resize_bicubic, resize_bicubic_window, BicubicKernel,
    BlurOrder, GaussianParams, ScaleFactor,
};
