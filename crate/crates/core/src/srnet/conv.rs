//! 3×3 same-padding convolution layers: forward cross-correlation and
//! exact reverse-mode gradients.

use crate::error::{Error, Result};
use crate::par;

use super::tensor::Tensor;

/// Spatial kernel size; layers are 3×3 with 1-pixel zero padding.
pub const KERNEL: usize = 3;

/// One convolution layer. Weights are `(out, in, 3, 3)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * KERNEL * KERNEL],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn weight_block(&self, oc: usize, ic: usize) -> &[f64] {
        let off = (oc * self.in_channels + ic) * KERNEL * KERNEL;
        &self.weights[off..off + KERNEL * KERNEL]
    }
}

/// Cross-correlation with 1-pixel zero padding; output spatial dims equal
/// the input's. Parallel over `(batch, out-channel)` planes.
pub fn conv2d_forward(input: &Tensor, layer: &Conv2d) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if c != layer.in_channels {
        return Err(Error::DimensionMismatch(format!(
            "input has {c} channels, layer expects {}",
            layer.in_channels
        )));
    }
    let oc_n = layer.out_channels;
    let mut out = Tensor::zeros(n, oc_n, h, w);
    par::for_each_chunk_mut(out.data_mut(), h * w, |plane_i, out_plane| {
        let b = plane_i / oc_n;
        let oc = plane_i % oc_n;
        out_plane.fill(layer.bias[oc]);
        for ic in 0..layer.in_channels {
            let in_plane = input.plane(b, ic);
            let wb = layer.weight_block(oc, ic);
            for ky in 0..KERNEL {
                for y in 0..h {
                    let sy = y as i64 + ky as i64 - 1;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    let in_row = &in_plane[sy as usize * w..(sy as usize + 1) * w];
                    let out_row = &mut out_plane[y * w..(y + 1) * w];
                    for kx in 0..KERNEL {
                        let wv = wb[ky * KERNEL + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = match kx {
                            0 => (1, w),
                            1 => (0, w),
                            _ => (0, w - 1),
                        };
                        for x in x0..x1 {
                            out_row[x] += wv * in_row[x + kx - 1];
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Gradients of one layer. Same layouts as the parameters.
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Reverse-mode gradients: (weight grads, bias grads, input grads).
/// Weight accumulation runs parallel over out-channels and input grads over
/// `(batch, in-channel)` planes, each with a fixed inner order.
pub fn conv2d_backward(
    input: &Tensor,
    layer: &Conv2d,
    grad_out: &Tensor,
) -> Result<(LayerGrads, Tensor)> {
    let [n, _, h, w] = input.shape();
    let [gn, gc, gh, gw] = grad_out.shape();
    if gn != n || gc != layer.out_channels || gh != h || gw != w {
        return Err(Error::DimensionMismatch(format!(
            "grad shape {:?} does not match layer output ({n},{},{h},{w})",
            grad_out.shape(),
            layer.out_channels
        )));
    }

    let ic_n = layer.in_channels;
    let kk = KERNEL * KERNEL;
    // d.len() == out_channels * (in_channels*9 + 1), weight grads then bias.
    let per_oc = ic_n * kk + 1;
    let mut packed = vec![0.0f64; layer.out_channels * per_oc];
    par::for_each_chunk_mut(&mut packed, per_oc, |oc, slot| {
        for b in 0..n {
            let g_plane = grad_out.plane(b, oc);
            for ic in 0..ic_n {
                let in_plane = input.plane(b, ic);
                for ky in 0..KERNEL {
                    for y in 0..h {
                        let sy = y as i64 + ky as i64 - 1;
                        if sy < 0 || sy >= h as i64 {
                            continue;
                        }
                        let in_row = &in_plane[sy as usize * w..(sy as usize + 1) * w];
                        let g_row = &g_plane[y * w..(y + 1) * w];
                        for kx in 0..KERNEL {
                            let (x0, x1) = match kx {
                                0 => (1, w),
                                1 => (0, w),
                                _ => (0, w - 1),
                            };
                            let mut acc = 0.0;
                            for x in x0..x1 {
                                acc += g_row[x] * in_row[x + kx - 1];
                            }
                            slot[ic * kk + ky * KERNEL + kx] += acc;
                        }
                    }
                }
            }
            slot[per_oc - 1] += g_plane.iter().sum::<f64>();
        }
    });
    let mut grads = LayerGrads {
        weights: vec![0.0; layer.weights.len()],
        bias: vec![0.0; layer.out_channels],
    };
    for oc in 0..layer.out_channels {
        let slot = &packed[oc * per_oc..(oc + 1) * per_oc];
        grads.weights[oc * ic_n * kk..(oc + 1) * ic_n * kk].copy_from_slice(&slot[..ic_n * kk]);
        grads.bias[oc] = slot[per_oc - 1];
    }

    let mut grad_in = Tensor::zeros(n, ic_n, h, w);
    par::for_each_chunk_mut(grad_in.data_mut(), h * w, |plane_i, gi_plane| {
        let b = plane_i / ic_n;
        let ic = plane_i % ic_n;
        for oc in 0..layer.out_channels {
            let g_plane = grad_out.plane(b, oc);
            let wb = layer.weight_block(oc, ic);
            for ky in 0..KERNEL {
                for sy in 0..h {
                    let y = sy as i64 - ky as i64 + 1;
                    if y < 0 || y >= h as i64 {
                        continue;
                    }
                    let g_row = &g_plane[y as usize * w..(y as usize + 1) * w];
                    let gi_row = &mut gi_plane[sy * w..(sy + 1) * w];
                    for kx in 0..KERNEL {
                        let wv = wb[ky * KERNEL + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        // sx ranges where x = sx - kx + 1 stays in bounds.
                        let (sx0, sx1) = match kx {
                            0 => (0, w - 1),
                            1 => (0, w),
                            _ => (1, w),
                        };
                        for sx in sx0..sx1 {
                            gi_row[sx] += wv * g_row[sx + 1 - kx];
                        }
                    }
                }
            }
        }
    });
    Ok((grads, grad_in))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(shape: [usize; 4], f: impl Fn(usize) -> f64) -> Tensor {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(f).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_passthrough() {
        let input = filled([1, 1, 4, 5], |i| (i as f64) / 20.0);
        let mut layer = Conv2d::zeros(1, 1);
        layer.weights[4] = 1.0; // center tap
        let out = conv2d_forward(&input, &layer).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn ones_kernel_counts_neighbors() {
        let input = Tensor::from_vec([1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let mut layer = Conv2d::zeros(1, 1);
        layer.weights.fill(1.0);
        let out = conv2d_forward(&input, &layer).unwrap();
        assert_eq!(out.plane(0, 0)[4], 9.0);
        assert_eq!(out.plane(0, 0)[0], 4.0);
        assert_eq!(out.plane(0, 0)[2], 4.0);
        assert_eq!(out.plane(0, 0)[1], 6.0);
    }

    #[test]
    fn zero_weights_bias_only() {
        let input = filled([2, 3, 4, 4], |i| (i % 7) as f64 * 0.1);
        let mut layer = Conv2d::zeros(3, 2);
        layer.bias = vec![0.25, -0.5];
        let out = conv2d_forward(&input, &layer).unwrap();
        for b in 0..2 {
            assert!(out.plane(b, 0).iter().all(|&v| v == 0.25));
            assert!(out.plane(b, 1).iter().all(|&v| v == -0.5));
        }
    }

    #[test]
    fn backward_zero_grad_is_zero() {
        let input = filled([1, 2, 5, 5], |i| (i as f64).sin() * 0.3);
        let mut layer = Conv2d::zeros(2, 3);
        for (i, v) in layer.weights.iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f64 * 0.01 - 0.05;
        }
        let gz = Tensor::zeros(1, 3, 5, 5);
        let (grads, grad_in) = conv2d_backward(&input, &layer, &gz).unwrap();
        assert!(grads.weights.iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
        assert!(grad_in.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_grad_out() {
        let input = filled([2, 2, 6, 6], |i| ((i * 13) % 17) as f64 * 0.05);
        let mut layer = Conv2d::zeros(2, 2);
        for (i, v) in layer.weights.iter_mut().enumerate() {
            *v = ((i * 7) % 13) as f64 * 0.02 - 0.1;
        }
        let g1 = filled([2, 2, 6, 6], |i| ((i * 5) % 9) as f64 * 0.03);
        let g2 = Tensor::from_vec(g1.shape(), g1.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        let (grads1, gi1) = conv2d_backward(&input, &layer, &g1).unwrap();
        let (grads2, gi2) = conv2d_backward(&input, &layer, &g2).unwrap();
        for (a, b) in grads1.weights.iter().zip(&grads2.weights) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        for (a, b) in grads1.bias.iter().zip(&grads2.bias) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        for (a, b) in gi1.data().iter().zip(gi2.data()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
