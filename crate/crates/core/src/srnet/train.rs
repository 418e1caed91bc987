//! Mini-batch training of the super-resolver under a chosen degradation
//! model, plus whole-image inference.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::resample::{
    degrade_bicubic, degrade_gaussian, resize_bicubic, resize_bicubic_window, GaussianParams,
    ScaleFactor,
};

use super::conv::LayerGrads;
use super::model::{to_f32_grid, SrModel};
use super::tensor::{image_to_tensor, tensor_to_image, Tensor};

/// Which LR observation the network trains against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Degradation {
    Bicubic,
    Gaussian(GaussianParams),
    /// The dataset's own stored LR frames.
    Camera,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    #[default]
    Adam,
}

/// Training hyperparameters. Defaults: desk-scale depth 8 / width 32
/// residual network, 64-pixel HR patches, batch 16, adaptive moments at
/// learning rate 1e-4.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_patch")]
    pub patch: usize,
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_residual")]
    pub residual: bool,
}

fn default_batch() -> usize {
    16
}
fn default_patch() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-4
}
fn default_depth() -> usize {
    8
}
fn default_width() -> usize {
    32
}
fn default_residual() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: default_batch(),
            patch: default_patch(),
            steps: 0,
            learning_rate: default_lr(),
            seed: 0,
            optimizer: OptimizerKind::default(),
            clip: None,
            depth: default_depth(),
            width: default_width(),
            residual: default_residual(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.patch < 16 {
            return Err(Error::InvalidParameter("patch must be >= 16".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Mean-square loss and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape()[0], pred.shape()[1], pred.shape()[2], pred.shape()[3]);
    let mut loss = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / count;
    }
    Ok((loss / count, grad))
}

/// Mean-square loss restricted to the spatial interior, `margin` pixels in
/// from every patch edge. Zero-padded convolutions cannot predict the
/// border ring, so training scores only pixels with a full receptive field.
fn masked_mse_loss(pred: &Tensor, target: &Tensor, margin: usize) -> Result<(f64, Tensor)> {
    if margin == 0 {
        return mse_loss(pred, target);
    }
    let [n, c, h, w] = pred.shape();
    if pred.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    debug_assert!(2 * margin < h && 2 * margin < w);
    let count = (n * c * (h - 2 * margin) * (w - 2 * margin)) as f64;
    let mut grad = Tensor::zeros(n, c, h, w);
    let mut loss = 0.0;
    for b in 0..n {
        for ch in 0..c {
            let p = pred.plane(b, ch);
            let t = target.plane(b, ch);
            let g = grad.plane_mut(b, ch);
            for y in margin..h - margin {
                for x in margin..w - margin {
                    let i = y * w + x;
                    let d = p[i] - t[i];
                    loss += d * d;
                    g[i] = 2.0 * d / count;
                }
            }
        }
    }
    Ok((loss / count, grad))
}

struct OptState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl OptState {
    fn new(model: &SrModel) -> Self {
        let sizes: Vec<usize> = model
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Self {
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }
}

const MOMENTUM_BETA: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(
    model: &mut SrModel,
    grads: &[LayerGrads],
    config: &TrainConfig,
    state: &mut OptState,
) {
    let mut flat: Vec<(&mut [f64], &[f64])> = Vec::with_capacity(model.layers.len() * 2);
    for (layer, g) in model.layers.iter_mut().zip(grads) {
        flat.push((&mut layer.weights, &g.weights));
        flat.push((&mut layer.bias, &g.bias));
    }

    let scale = match config.clip {
        Some(limit) => {
            let norm: f64 = flat
                .iter()
                .map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > limit {
                limit / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };

    state.t += 1;
    let lr = config.learning_rate;
    for (pi, (params, grads)) in flat.into_iter().enumerate() {
        match config.optimizer {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = to_f32_grid(*p - lr * scale * g);
                }
            }
            OptimizerKind::Momentum => {
                let m = &mut state.m[pi];
                for ((p, &g), mv) in params.iter_mut().zip(grads).zip(m.iter_mut()) {
                    *mv = MOMENTUM_BETA * *mv + scale * g;
                    *p = to_f32_grid(*p - lr * *mv);
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
                let (m, v) = (&mut state.m[pi], &mut state.v[pi]);
                for (((p, &g), mv), vv) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    let g = scale * g;
                    *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * g;
                    *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * g * g;
                    let mh = *mv / bc1;
                    let vh = *vv / bc2;
                    *p = to_f32_grid(*p - lr * mh / (vh.sqrt() + ADAM_EPS));
                }
            }
        }
    }
}

/// Train on random HR patches from the training split. Per step: sample
/// `batch_size` patches, form the degraded observation, interpolate it back
/// to the patch grid, and take one optimizer step on the mean-square loss.
/// Returns the model and the per-step loss trace.
pub fn train(
    dataset: &Dataset,
    degradation: Degradation,
    config: &TrainConfig,
) -> Result<(SrModel, Vec<f64>)> {
    config.validate()?;
    let scenes = dataset.train_pairs();
    if scenes.is_empty() {
        return Err(Error::InvalidParameter("training split is empty".into()));
    }
    for scene in &scenes {
        if scene.hr.width() < config.patch || scene.hr.height() < config.patch {
            return Err(Error::InvalidParameter(format!(
                "scene {} ({}x{}) is smaller than the {}px patch",
                scene.id,
                scene.hr.width(),
                scene.hr.height(),
                config.patch
            )));
        }
    }
    let channels = scenes[0].hr.channels();

    // The Y side of every training pair, fixed for the whole run.
    let observations: Vec<Image> = scenes
        .iter()
        .map(|scene| -> Result<Image> {
            let scale = ScaleFactor::new(dataset.nominal_scale.unwrap_or(scene.scale))?;
            match degradation {
                Degradation::Camera => Ok(scene.lr.clone()),
                Degradation::Bicubic => degrade_bicubic(&scene.hr, scale),
                Degradation::Gaussian(params) => degrade_gaussian(&scene.hr, params, scale),
            }
        })
        .collect::<Result<_>>()?;

    let mut model = SrModel::init(channels, config.depth, config.width, config.residual, config.seed)?;
    let mut state = OptState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut trace = Vec::with_capacity(config.steps);

    let p = config.patch;
    let n = config.batch_size;
    for step in 0..config.steps {
        let mut input = Tensor::zeros(n, channels, p, p);
        let mut target = Tensor::zeros(n, channels, p, p);
        for b in 0..n {
            let si = rng.random_range(0..scenes.len());
            let scene = scenes[si];
            let (hw, hh) = scene.hr.dims();
            let x0 = rng.random_range(0..=hw - p);
            let y0 = rng.random_range(0..=hh - p);
            let hr_patch = scene.hr.crop(x0, y0, p, p)?;
            // Interpolated observation on the same HR-grid window.
            let y_patch = resize_bicubic_window(&observations[si], hw, hh, x0, y0, p, p)?;
            for c in 0..channels {
                input.plane_mut(b, c).copy_from_slice(y_patch.plane(c));
                target.plane_mut(b, c).copy_from_slice(hr_patch.plane(c));
            }
        }

        let (pred, cache) = model.forward_cached(&input)?;
        let margin = config.depth.min(p / 4);
        let (loss, grad) = masked_mse_loss(&pred, &target, margin)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        trace.push(loss);
        let grads = model.backward(&cache, &grad)?;
        apply_update(&mut model, &grads, config, &mut state);
    }
    Ok((model, trace))
}

/// Super-resolve to explicit output dimensions: bicubic interpolation to
/// the target grid, one forward pass (tiled if requested), clamp.
pub fn super_resolve_to(
    model: &SrModel,
    lr: &Image,
    out_w: usize,
    out_h: usize,
    tile: Option<usize>,
) -> Result<Image> {
    if lr.channels() != model.channels {
        return Err(Error::DimensionMismatch(format!(
            "{}-channel input for {}-channel model",
            lr.channels(),
            model.channels
        )));
    }
    let interp = resize_bicubic(lr, out_w, out_h)?;
    let tile = tile.filter(|&t| t > 0 && (t < out_w || t < out_h));
    match tile {
        None => tensor_to_image(&model.forward(&image_to_tensor(&interp))?),
        Some(t) => {
            // A halo of `depth` pixels covers the receptive field, so kept
            // interiors match the whole-frame pass exactly.
            let halo = model.depth;
            let mut out = Image::new(out_w, out_h, interp.channels())?;
            let mut y0 = 0;
            while y0 < out_h {
                let th = t.min(out_h - y0);
                let ys = y0.saturating_sub(halo);
                let ye = (y0 + th + halo).min(out_h);
                let mut x0 = 0;
                while x0 < out_w {
                    let tw = t.min(out_w - x0);
                    let xs = x0.saturating_sub(halo);
                    let xe = (x0 + tw + halo).min(out_w);
                    let patch = interp.crop(xs, ys, xe - xs, ye - ys)?;
                    let sr = tensor_to_image(&model.forward(&image_to_tensor(&patch))?)?;
                    for c in 0..out.channels() {
                        for y in 0..th {
                            for x in 0..tw {
                                let v = sr.get(x0 - xs + x, y0 - ys + y, c);
                                out.set(x0 + x, y0 + y, c, v);
                            }
                        }
                    }
                    x0 += t;
                }
                y0 += t;
            }
            Ok(out)
        }
    }
}

/// Super-resolve by the scale convention the model was trained for:
/// output dims are `round(scale · input dims)`.
pub fn super_resolve(model: &SrModel, lr: &Image, scale: ScaleFactor, tile: Option<usize>) -> Result<Image> {
    let out_w = (scale.ratio() * lr.width() as f64).round() as usize;
    let out_h = (scale.ratio() * lr.height() as f64).round() as usize;
    super_resolve_to(model, lr, out_w, out_h, tile)
}
