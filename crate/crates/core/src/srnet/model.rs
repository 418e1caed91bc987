//! The residual super-resolver: a stack of 3×3 convolutions with
//! rectifier nonlinearities, predicting the residual on top of the
//! interpolated LR input.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::conv::{conv2d_backward, conv2d_forward, Conv2d, LayerGrads};
use super::tensor::Tensor;

/// Network parameters. The first layer maps image channels to `width`
/// features, the last maps back; only the last layer skips the rectifier.
#[derive(Clone, Debug, PartialEq)]
pub struct SrModel {
    pub channels: usize,
    pub depth: usize,
    pub width: usize,
    pub residual: bool,
    pub layers: Vec<Conv2d>,
}

/// Round to the nearest f32; parameters live on the f32 grid so the
/// checkpoint payload is lossless.
#[inline]
pub(crate) fn to_f32_grid(v: f64) -> f64 {
    v as f32 as f64
}

fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl SrModel {
    /// Fan-in-scaled normal init for all layers except the final one,
    /// which starts at zero so the initial network is the identity.
    pub fn init(channels: usize, depth: usize, width: usize, residual: bool, seed: u64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidParameter("depth must be >= 1".into()));
        }
        if width == 0 || (channels != 1 && channels != 3) {
            return Err(Error::InvalidParameter(format!(
                "bad width {width} or channels {channels}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let in_c = if i == 0 { channels } else { width };
            let out_c = if i == depth - 1 { channels } else { width };
            let mut layer = Conv2d::zeros(in_c, out_c);
            if i != depth - 1 {
                let std = (2.0 / (in_c as f64 * 9.0)).sqrt();
                for w in &mut layer.weights {
                    *w = to_f32_grid(std * normal_sample(&mut rng));
                }
            }
            layers.push(layer);
        }
        Ok(Self {
            channels,
            depth,
            width,
            residual,
            layers,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape()[1] != self.channels {
            return Err(Error::DimensionMismatch(format!(
                "input has {} channels, model expects {}",
                input.shape()[1],
                self.channels
            )));
        }
        Ok(())
    }

    /// The conv stack consumes the input centered around mid-gray; display
    /// range [0,1] would otherwise leak a large shared DC component into
    /// every feature and stall training.
    fn centered(input: &Tensor) -> Tensor {
        let mut c = input.clone();
        for v in c.data_mut() {
            *v -= 0.5;
        }
        c
    }

    /// Inference pass; keeps only the current activation alive.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut act = conv2d_forward(&Self::centered(input), &self.layers[0])?;
        for layer in self.layers.iter().skip(1) {
            relu_in_place(&mut act);
            act = conv2d_forward(&act, layer)?;
        }
        if self.residual {
            for (o, &x) in act.data_mut().iter_mut().zip(input.data()) {
                *o += x;
            }
        }
        act.debug_check_finite("forward output");
        Ok(act)
    }

    /// Forward pass that caches per-layer inputs for `backward`.
    pub fn forward_cached(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.depth);
        activations.push(Self::centered(input));
        let mut act = conv2d_forward(&activations[0], &self.layers[0])?;
        for layer in self.layers.iter().skip(1) {
            relu_in_place(&mut act);
            activations.push(act.clone());
            act = conv2d_forward(&act, layer)?;
        }
        if self.residual {
            for (o, &x) in act.data_mut().iter_mut().zip(input.data()) {
                *o += x;
            }
        }
        Ok((act, ForwardCache { activations }))
    }

    /// Exact gradients for every layer given the gradient at the output.
    /// The residual connection passes `grad_out` straight to the last conv.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<Vec<LayerGrads>> {
        if cache.activations.len() != self.depth {
            return Err(Error::InvalidParameter(
                "forward cache does not match model depth".into(),
            ));
        }
        let mut grads: Vec<Option<LayerGrads>> = (0..self.depth).map(|_| None).collect();
        let mut g = grad_out.clone();
        for i in (0..self.depth).rev() {
            let (layer_grads, mut grad_in) = conv2d_backward(&cache.activations[i], &self.layers[i], &g)?;
            grads[i] = Some(layer_grads);
            if i > 0 {
                // Rectifier derivative: 1 where the layer input was positive.
                for (gv, &a) in grad_in.data_mut().iter_mut().zip(cache.activations[i].data()) {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                }
                g = grad_in;
            }
        }
        Ok(grads.into_iter().map(|g| g.expect("all layers visited")).collect())
    }
}

fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Per-layer inputs captured by `forward_cached`.
pub struct ForwardCache {
    /// `activations[0]` is the network input; `activations[i]` the
    /// rectified input of layer `i`.
    pub activations: Vec<Tensor>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap()
    }

    #[test]
    fn zero_final_layer_is_identity() {
        let model = SrModel::init(3, 4, 8, true, 1).unwrap();
        let input = random_tensor([2, 3, 12, 12], 2);
        let out = model.forward(&input).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn depth_one_is_conv_plus_input() {
        let mut model = SrModel::init(1, 1, 8, true, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for w in &mut model.layers[0].weights {
            *w = rng.random_range(-0.2..0.2);
        }
        let input = random_tensor([1, 1, 9, 9], 5);
        let centered = {
            let mut c = input.clone();
            for v in c.data_mut() {
                *v -= 0.5;
            }
            c
        };
        let direct = conv2d_forward(&centered, &model.layers[0]).unwrap();
        let out = model.forward(&input).unwrap();
        for ((o, d), x) in out.data().iter().zip(direct.data()).zip(input.data()) {
            assert!((o - (d + x)).abs() < 1e-12);
        }
    }

    /// Independent straight-line evaluator: materializes zero-padded planes
    /// and walks the taps directly.
    fn naive_forward(model: &SrModel, input: &Tensor) -> Tensor {
        let [n, _, h, w] = input.shape();
        let mut act: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|b| {
                (0..model.channels)
                    .map(|c| input.plane(b, c).iter().map(|v| v - 0.5).collect())
                    .collect()
            })
            .collect();
        for (li, layer) in model.layers.iter().enumerate() {
            let mut next: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
            for item in &act {
                let mut planes = Vec::with_capacity(layer.out_channels);
                for oc in 0..layer.out_channels {
                    let mut plane = vec![0.0f64; h * w];
                    for (y, row) in plane.chunks_mut(w).enumerate() {
                        for (x, v) in row.iter_mut().enumerate() {
                            let mut acc = layer.bias[oc];
                            for (ic, src) in item.iter().enumerate() {
                                for ky in 0..3usize {
                                    for kx in 0..3usize {
                                        let sy = y as i64 + ky as i64 - 1;
                                        let sx = x as i64 + kx as i64 - 1;
                                        if sy < 0 || sy >= h as i64 || sx < 0 || sx >= w as i64 {
                                            continue;
                                        }
                                        let wv = layer.weights
                                            [((oc * layer.in_channels + ic) * 3 + ky) * 3 + kx];
                                        acc += wv * src[sy as usize * w + sx as usize];
                                    }
                                }
                            }
                            *v = acc;
                        }
                    }
                    planes.push(plane);
                }
                next.push(planes);
            }
            if li != model.depth - 1 {
                for item in &mut next {
                    for plane in item {
                        for v in plane {
                            *v = v.max(0.0);
                        }
                    }
                }
            }
            act = next;
        }
        let mut out = Tensor::zeros(n, model.channels, h, w);
        for b in 0..n {
            for c in 0..model.channels {
                let plane = out.plane_mut(b, c);
                for (i, v) in act[b][c].iter().enumerate() {
                    plane[i] = v + if model.residual { input.plane(b, c)[i] } else { 0.0 };
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_naive_evaluator() {
        let mut model = SrModel::init(3, 3, 6, true, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Give the zero-initialized final layer real weights too.
        let last = model.depth - 1;
        for w in &mut model.layers[last].weights {
            *w = rng.random_range(-0.3..0.3);
        }
        for b in &mut model.layers[last].bias {
            *b = rng.random_range(-0.1..0.1);
        }
        let input = random_tensor([2, 3, 10, 11], 9);
        let fast = model.forward(&input).unwrap();
        let slow = naive_forward(&model, &input);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let model = SrModel::init(1, 2, 4, true, 11).unwrap();
        let input = random_tensor([1, 1, 8, 8], 12);
        let (out, cache) = model.forward_cached(&input).unwrap();
        let gz = Tensor::zeros(1, 1, 8, 8);
        let _ = out;
        let grads = model.backward(&cache, &gz).unwrap();
        for g in grads {
            assert!(g.weights.iter().all(|&v| v == 0.0));
            assert!(g.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = SrModel::init(3, 5, 16, true, 99).unwrap();
        let b = SrModel::init(3, 5, 16, true, 99).unwrap();
        assert_eq!(a, b);
        let c = SrModel::init(3, 5, 16, true, 100).unwrap();
        assert_ne!(a, c);
    }
}
