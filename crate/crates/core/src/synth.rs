//! Synthetic paired-capture generator: textured HR scenes pushed through a
//! hidden degradation chain (blur → downsample → shift → bias → color map →
//! noise), reproducible from a seed. Stands in for real captures in
//! hermetic tests.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, Split};
use crate::error::{Error, Result};
use crate::raster::{save_image, Image};
use crate::rectify::{apply_color_calibration, shift_image, ColorCalibration};
use crate::resample::{degrade_bicubic, degrade_gaussian, GaussianParams, ScaleFactor};

/// The corruption applied between the clean HR frame and the stored LR frame.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HiddenChain {
    /// Blur+decimate parameters; `None` degrades bicubicly instead.
    #[serde(default)]
    pub gauss: Option<(usize, f64)>,
    /// Translation applied to the LR frame, in LR pixels.
    #[serde(default)]
    pub shift: Option<(f64, f64)>,
    #[serde(default)]
    pub bias: f64,
    /// Per-channel polynomial (constant term first) applied pointwise.
    #[serde(default)]
    pub color: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub noise_sigma: f64,
}

/// Scene content family.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TextureKind {
    /// Gradients, checkerboards, strokes, blobs: sharp, detail-heavy.
    #[default]
    Detail,
    /// Plane-wave mixture with periods in `[min_period, max_period]`:
    /// band-limited, resampling-exact.
    Waves { min_period: f64, max_period: f64 },
}

/// Recipe for a reproducible synthetic dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_scenes: usize,
    /// HR frames are square `hr_size × hr_size`.
    pub hr_size: usize,
    pub scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub texture: TextureKind,
    #[serde(default)]
    pub hidden: HiddenChain,
    #[serde(default)]
    pub n_val: usize,
    #[serde(default)]
    pub n_test: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_scenes: 8,
            hr_size: 192,
            scale: 2.9,
            seed: 0,
            texture: TextureKind::default(),
            hidden: HiddenChain::default(),
            n_val: 0,
            n_test: 0,
        }
    }
}

/// One generated scene.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub id: String,
    pub hr: Image,
    pub lr: Image,
}

fn gaussian_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Textured RGB (or gray) frame: gradient base plus checkerboard patches,
/// text-like strokes, and soft blobs. The mean is normalized to 0.5 and a
/// border band fades to mid-gray so downstream resampling keeps the DC.
fn generate_texture(size: usize, channels: usize, rng: &mut ChaCha8Rng) -> Image {
    let n = size * size;
    let mut planes = vec![vec![0.5f64; n]; channels];

    // Gradient base.
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let amp: f64 = rng.random_range(0.05..0.12);
    let (ca, sa) = (angle.cos(), angle.sin());
    for (c, plane) in planes.iter_mut().enumerate() {
        let tint = 1.0 + 0.3 * (c as f64 - 1.0) * rng.random_range(-1.0..1.0);
        for y in 0..size {
            for x in 0..size {
                let t = (x as f64 * ca + y as f64 * sa) / size as f64;
                plane[y * size + x] += amp * tint * (t - 0.5);
            }
        }
    }

    // Checkerboard patches.
    for _ in 0..rng.random_range(2..4usize) {
        let period = rng.random_range(3..14usize).max(2);
        let px = rng.random_range(0..size / 2);
        let py = rng.random_range(0..size / 2);
        let pw = rng.random_range(size / 4..size / 2);
        let ph = rng.random_range(size / 4..size / 2);
        let amp: f64 = rng.random_range(0.08..0.2);
        let tints: Vec<f64> = (0..channels).map(|_| rng.random_range(0.6..1.0)).collect();
        for y in py..(py + ph).min(size) {
            for x in px..(px + pw).min(size) {
                let sign = if (x / period + y / period) % 2 == 0 { 1.0 } else { -1.0 };
                for (c, plane) in planes.iter_mut().enumerate() {
                    plane[y * size + x] += sign * amp * tints[c];
                }
            }
        }
    }

    // Text-like strokes: short thick segments of a random color.
    for _ in 0..rng.random_range(25..60usize) {
        let x0 = rng.random_range(0.0..size as f64);
        let y0 = rng.random_range(0.0..size as f64);
        let len = rng.random_range(6.0..30.0);
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let half_w = rng.random_range(0.6..1.6);
        let color: Vec<f64> = (0..channels).map(|_| rng.random_range(0.15..0.85)).collect();
        let (dx, dy) = (ang.cos(), ang.sin());
        let x1 = x0 + len * dx;
        let y1 = y0 + len * dy;
        let (bx0, bx1) = ((x0.min(x1) - 2.0).max(0.0) as usize, ((x0.max(x1) + 2.0) as usize).min(size - 1));
        let (by0, by1) = ((y0.min(y1) - 2.0).max(0.0) as usize, ((y0.max(y1) + 2.0) as usize).min(size - 1));
        for y in by0..=by1 {
            for x in bx0..=bx1 {
                // Distance from pixel center to the segment.
                let (px, py) = (x as f64 - x0, y as f64 - y0);
                let t = ((px * dx + py * dy) / len).clamp(0.0, 1.0);
                let (qx, qy) = (px - t * len * dx, py - t * len * dy);
                if (qx * qx + qy * qy).sqrt() <= half_w {
                    for (c, plane) in planes.iter_mut().enumerate() {
                        plane[y * size + x] = color[c];
                    }
                }
            }
        }
    }

    // Soft blobs.
    for _ in 0..rng.random_range(3..7usize) {
        let cx = rng.random_range(0.0..size as f64);
        let cy = rng.random_range(0.0..size as f64);
        let sigma = rng.random_range(4.0..(size as f64 / 6.0).max(4.5));
        let amp: f64 = rng.random_range(-0.12..0.12);
        let tints: Vec<f64> = (0..channels).map(|_| rng.random_range(0.5..1.0)).collect();
        let reach = (3.0 * sigma) as usize;
        let (x0, x1) = ((cx as usize).saturating_sub(reach), ((cx as usize) + reach).min(size - 1));
        let (y0, y1) = ((cy as usize).saturating_sub(reach), ((cy as usize) + reach).min(size - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let g = (-d2 / (2.0 * sigma * sigma)).exp();
                for (c, plane) in planes.iter_mut().enumerate() {
                    plane[y * size + x] += amp * tints[c] * g;
                }
            }
        }
    }

    // Keep headroom for additive corruptions, re-center the mean, and fade
    // an 8-pixel border band to mid-gray so edge replication in later
    // resampling stays DC-neutral.
    let mut samples = Vec::with_capacity(n * channels);
    for plane in &planes {
        samples.extend(plane.iter().map(|v| v.clamp(0.08, 0.92)));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let offset = 0.5 - mean;
    let fade = 8.0f64.min(size as f64 / 4.0);
    for c in 0..channels {
        for y in 0..size {
            for x in 0..size {
                let i = c * n + y * size + x;
                let v = (samples[i] + offset).clamp(0.06, 0.94);
                let d = x.min(y).min(size - 1 - x).min(size - 1 - y) as f64;
                let f = (d / fade).min(1.0);
                samples[i] = 0.5 + f * (v - 0.5);
            }
        }
    }
    Image::from_planar(size, size, channels, samples).expect("generated texture is valid")
}

/// One textured frame; convenience for tests.
pub fn test_texture(size: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_texture(size, channels, &mut rng)
}

/// Band-pass texture: a mixture of random plane waves with periods in
/// `[min_period, max_period]` pixels around mid-gray, faded to mid-gray at
/// the border. Content below the decimation Nyquist rate survives
/// downsampling attenuated rather than aliased, which keeps interpolation
/// residuals recoverable and resampling phase exact.
pub fn wave_texture(size: usize, channels: usize, seed: u64, min_period: f64, max_period: f64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_waves = 30;
    let amp = 0.30 / (n_waves as f64).sqrt();
    let waves: Vec<(f64, f64, f64, f64)> = (0..n_waves)
        .map(|_| {
            let period = rng.random_range(min_period..max_period);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let f = std::f64::consts::TAU / period;
            (f * theta.cos(), f * theta.sin(), phase, amp)
        })
        .collect();
    let gains: Vec<Vec<f64>> = (0..channels)
        .map(|_| (0..n_waves).map(|_| rng.random_range(0.6..1.4)).collect())
        .collect();
    let fade = 8.0f64.min(size as f64 / 4.0);
    let mut samples = Vec::with_capacity(size * size * channels);
    for c in 0..channels {
        for y in 0..size {
            for x in 0..size {
                let mut v = 0.5;
                for (i, &(fx, fy, phase, a)) in waves.iter().enumerate() {
                    v += gains[c][i] * a * (fx * x as f64 + fy * y as f64 + phase).cos();
                }
                let d = x.min(y).min(size - 1 - x).min(size - 1 - y) as f64;
                let f = (d / fade).min(1.0);
                samples.push(0.5 + f * (v.clamp(0.03, 0.97) - 0.5));
            }
        }
    }
    Image::from_planar(size, size, channels, samples).expect("wave texture is valid")
}

/// A flat-block checker chart with `rows × cols` cells of `cell` pixels.
pub fn checker_chart(rows: usize, cols: usize, cell: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (cols * cell, rows * cell);
    let mut img = Image::new(w, h, 3).expect("valid chart shape");
    for r in 0..rows {
        for c in 0..cols {
            let color: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..0.9)).collect();
            for ch in 0..3 {
                for y in r * cell..(r + 1) * cell {
                    for x in c * cell..(c + 1) * cell {
                        img.set(x, y, ch, color[ch]);
                    }
                }
            }
        }
    }
    img
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::InvalidParameter("n_scenes must be >= 1".into()));
        }
        if self.hr_size < 32 {
            return Err(Error::InvalidParameter("hr_size must be >= 32".into()));
        }
        if self.n_val + self.n_test >= self.n_scenes {
            return Err(Error::InvalidParameter(
                "n_val + n_test must leave at least one training scene".into(),
            ));
        }
        Ok(())
    }

    /// Apply the hidden chain to a clean HR frame.
    pub fn corrupt(&self, hr: &Image, rng: &mut ChaCha8Rng) -> Result<Image> {
        let scale = ScaleFactor::new(self.scale)?;
        let mut lr = match self.hidden.gauss {
            Some((k, sigma)) => degrade_gaussian(hr, GaussianParams::new(k, sigma)?, scale)?,
            None => degrade_bicubic(hr, scale)?,
        };
        if let Some((dx, dy)) = self.hidden.shift {
            lr = shift_image(&lr, dx, dy)?;
        }
        if self.hidden.bias != 0.0 {
            lr = lr.add_bias(self.hidden.bias);
        }
        if let Some(coeffs) = &self.hidden.color {
            let calib = ColorCalibration {
                degree: coeffs[0].len().saturating_sub(1),
                coeffs: coeffs.clone(),
                fit_rms: vec![0.0; coeffs.len()],
            };
            lr = apply_color_calibration(&lr, &calib)?;
        }
        if self.hidden.noise_sigma > 0.0 {
            let sigma = self.hidden.noise_sigma;
            lr = lr.map_samples(|v| v + sigma * gaussian_sample(rng));
        }
        Ok(lr)
    }

    /// Generate all scenes in memory.
    pub fn generate(&self) -> Result<Vec<SynthScene>> {
        self.validate()?;
        let mut scenes = Vec::with_capacity(self.n_scenes);
        for i in 0..self.n_scenes {
            let scene_seed = self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
            let hr = match self.texture {
                TextureKind::Detail => generate_texture(self.hr_size, 3, &mut rng),
                TextureKind::Waves {
                    min_period,
                    max_period,
                } => wave_texture(self.hr_size, 3, scene_seed, min_period, max_period),
            };
            let lr = self.corrupt(&hr, &mut rng)?;
            scenes.push(SynthScene {
                id: format!("{:03}", i + 1),
                hr,
                lr,
            });
        }
        Ok(scenes)
    }

    /// Split for the generated ids: training scenes first, then validation,
    /// then test.
    pub fn split(&self) -> Split {
        let ids: Vec<String> = (0..self.n_scenes).map(|i| format!("{:03}", i + 1)).collect();
        let n_train = self.n_scenes - self.n_val - self.n_test;
        Split {
            train: ids[..n_train].to_vec(),
            val: ids[n_train..n_train + self.n_val].to_vec(),
            test: ids[n_train + self.n_val..].to_vec(),
        }
    }

    /// Write the paired layout, manifest, and hidden-truth JSON into `dir`.
    /// Frames are stored as 16-bit PNG.
    pub fn write_dataset(&self, dir: impl AsRef<std::path::Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.into(),
            source,
        })?;
        let scenes = self.generate()?;
        for scene in &scenes {
            save_image(&scene.hr, dir.join(format!("{}_hr.png", scene.id)), 16)?;
            save_image(&scene.lr, dir.join(format!("{}_lr.png", scene.id)), 16)?;
        }
        let manifest = Manifest {
            scale: self.scale,
            splits: Some(self.split()),
        };
        let write_json = |path: std::path::PathBuf, text: String| -> Result<()> {
            std::fs::write(&path, text).map_err(|source| Error::Write { path, source })
        };
        write_json(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        write_json(
            dir.join("truth.json"),
            serde_json::to_string_pretty(self).expect("spec serializes"),
        )?;
        Ok(())
    }
}
