//! Planar raster images with display-referred samples in `[0,1]`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A 1- or 3-channel image. Samples are stored planar (channel-major,
/// then row-major) and are kept finite and clamped to `[0,1]` by every
/// mutating operation.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl Image {
    /// All-zero image. `channels` must be 1 or 3; dimensions must be ≥ 1.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::validate_shape(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            samples: vec![0.0; width * height * channels],
        })
    }

    /// Constant-valued image.
    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        let mut img = Self::new(width, height, channels)?;
        let v = value.clamp(0.0, 1.0);
        img.samples.fill(v);
        Ok(img)
    }

    /// Build from planar samples (`channels * height * width` values,
    /// channel-major). Non-finite samples are rejected; values are clamped.
    pub fn from_planar(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        Self::validate_shape(width, height, channels)?;
        if samples.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite sample".into()));
        }
        let mut img = Self {
            width,
            height,
            channels,
            samples,
        };
        img.clamp_in_place();
        Ok(img)
    }

    fn validate_shape(width: usize, height: usize, channels: usize) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "unsupported channel count {channels}"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.samples[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.samples[(c * self.height + y) * self.width + x] = value.clamp(0.0, 1.0);
    }

    /// One channel plane, row-major.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.samples[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.samples[c * n..(c + 1) * n]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn clamp_in_place(&mut self) {
        for v in &mut self.samples {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Arithmetic mean over all samples of all channels.
    pub fn mean_intensity(&self) -> f64 {
        let w = self.width;
        let rows = self.height * self.channels;
        let sum = crate::par::sum_indexed(rows, |r| {
            self.samples[r * w..(r + 1) * w].iter().sum::<f64>()
        });
        sum / self.samples.len() as f64
    }

    /// Add a constant to every sample, clamping to `[0,1]`.
    pub fn add_bias(&self, bias: f64) -> Image {
        let mut out = self.clone();
        for v in &mut out.samples {
            *v = (*v + bias).clamp(0.0, 1.0);
        }
        out
    }

    /// BT.601 luminance. 1-channel images pass through unchanged.
    pub fn to_luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.width * self.height;
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let y = LUMA_WEIGHTS[0] * r[i] + LUMA_WEIGHTS[1] * g[i] + LUMA_WEIGHTS[2] * b[i];
            samples.push(y.clamp(0.0, 1.0));
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            samples,
        }
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::OutOfBounds(format!(
                "crop ({x0},{y0}) {w}x{h} of {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Image::new(w, h, self.channels)?;
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = out.plane_mut(c);
            for y in 0..h {
                let s = (y0 + y) * self.width + x0;
                dst[y * w..(y + 1) * w].copy_from_slice(&src[s..s + w]);
            }
        }
        Ok(out)
    }

    /// Apply `f` to every sample, clamping results.
    pub fn map_samples(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        let mut out = self.clone();
        for v in &mut out.samples {
            *v = f(*v).clamp(0.0, 1.0);
        }
        out
    }
}

// Quantization goes through f32 before scaling, matching the arithmetic of
// common 8/16-bit raster pipelines.
fn quantize(v: f64, max: f64) -> u32 {
    ((v as f32 as f64) * max).round().clamp(0.0, max) as u32
}

/// Load an 8- or 16-bit gray/RGB PNG, mapping samples to `[0,1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = image::ImageReader::open(path)
        .map_err(|source| Error::Read {
            path: path.into(),
            source,
        })?
        .decode()
        .map_err(|e| Error::Decode {
            path: path.into(),
            reason: e.to_string(),
        })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let samples = buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
            Image::from_planar(w, h, 1, samples)
        }
        DynamicImage::ImageLuma16(buf) => {
            let samples = buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
            Image::from_planar(w, h, 1, samples)
        }
        DynamicImage::ImageRgb8(buf) => {
            let mut samples = vec![0.0; w * h * 3];
            for (i, p) in buf.pixels().enumerate() {
                for c in 0..3 {
                    samples[c * w * h + i] = p.0[c] as f64 / 255.0;
                }
            }
            Image::from_planar(w, h, 3, samples)
        }
        DynamicImage::ImageRgb16(buf) => {
            let mut samples = vec![0.0; w * h * 3];
            for (i, p) in buf.pixels().enumerate() {
                for c in 0..3 {
                    samples[c * w * h + i] = p.0[c] as f64 / 65535.0;
                }
            }
            Image::from_planar(w, h, 3, samples)
        }
        other => Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!("color type {:?}", other.color()),
        }),
    }
}

/// Save as PNG at the requested bit depth (8 or 16).
pub fn save_image(img: &Image, path: impl AsRef<Path>, bit_depth: u8) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width as u32, img.height as u32);
    let n = img.width * img.height;
    let wrap = |e: image::ImageError| Error::Write {
        path: path.into(),
        source: std::io::Error::other(e.to_string()),
    };
    match (img.channels, bit_depth) {
        (1, 8) => {
            let data: Vec<u8> = img.plane(0).iter().map(|&v| quantize(v, 255.0) as u8).collect();
            let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(w, h, data).unwrap();
            buf.save_with_format(path, image::ImageFormat::Png).map_err(wrap)
        }
        (1, 16) => {
            let data: Vec<u16> = img.plane(0).iter().map(|&v| quantize(v, 65535.0) as u16).collect();
            let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(w, h, data).unwrap();
            buf.save_with_format(path, image::ImageFormat::Png).map_err(wrap)
        }
        (3, 8) => {
            let mut data = vec![0u8; n * 3];
            for c in 0..3 {
                let plane = img.plane(c);
                for i in 0..n {
                    data[i * 3 + c] = quantize(plane[i], 255.0) as u8;
                }
            }
            let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, data).unwrap();
            buf.save_with_format(path, image::ImageFormat::Png).map_err(wrap)
        }
        (3, 16) => {
            let mut data = vec![0u16; n * 3];
            for c in 0..3 {
                let plane = img.plane(c);
                for i in 0..n {
                    data[i * 3 + c] = quantize(plane[i], 65535.0) as u16;
                }
            }
            let buf: ImageBuffer<Rgb<u16>, _> = ImageBuffer::from_raw(w, h, data).unwrap();
            buf.save_with_format(path, image::ImageFormat::Png).map_err(wrap)
        }
        (_, d) => Err(Error::InvalidParameter(format!("bit depth {d} not in {{8,16}}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_mean() {
        let img = Image::constant(7, 5, 3, 0.25).unwrap();
        assert_eq!(img.mean_intensity(), 0.25);
    }

    #[test]
    fn mean_of_two_sample_gray() {
        let img = Image::from_planar(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(img.mean_intensity(), 0.5);
    }

    #[test]
    fn mean_matches_bruteforce_accumulation() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..31 * 17 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let img = Image::from_planar(31, 17, 3, samples.clone()).unwrap();
        let brute = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((img.mean_intensity() - brute).abs() < 1e-12);
    }

    #[test]
    fn add_bias_shifts_and_clamps() {
        let img = Image::constant(4, 4, 1, 0.4).unwrap();
        assert_eq!(img.add_bias(0.0), img);
        assert!((img.add_bias(0.05).get(0, 0, 0) - 0.45).abs() < 1e-15);
        let hot = Image::constant(4, 4, 1, 0.99).unwrap();
        assert_eq!(hot.add_bias(0.05).get(3, 3, 0), 1.0);
    }

    #[test]
    fn luminance_weights() {
        let white = Image::constant(2, 2, 3, 1.0).unwrap();
        assert!((white.to_luminance().get(0, 0, 0) - 1.0).abs() < 1e-12);

        let mut red = Image::new(1, 1, 3).unwrap();
        red.set(0, 0, 0, 1.0);
        assert!((red.to_luminance().get(0, 0, 0) - 0.299).abs() < 1e-12);

        let mut mix = Image::new(1, 1, 3).unwrap();
        mix.set(0, 0, 0, 0.2);
        mix.set(0, 0, 1, 0.4);
        mix.set(0, 0, 2, 0.6);
        // 0.299*0.2 + 0.587*0.4 + 0.114*0.6
        assert!((mix.to_luminance().get(0, 0, 0) - 0.363).abs() < 1e-12);
    }

    #[test]
    fn crop_cases() {
        let mut img = Image::new(3, 2, 1).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                img.set(x, y, 0, (y * 3 + x) as f64 / 10.0);
            }
        }
        assert_eq!(img.crop(0, 0, 3, 2).unwrap(), img);
        let tl = img.crop(0, 0, 1, 1).unwrap();
        assert_eq!(tl.get(0, 0, 0), 0.0);
        assert!(img.crop(0, 0, 4, 2).is_err());
    }

    #[test]
    fn crop_composition() {
        let mut img = Image::new(8, 8, 3).unwrap();
        for c in 0..3 {
            for y in 0..8 {
                for x in 0..8 {
                    img.set(x, y, c, ((c * 64 + y * 8 + x) as f64) / 255.0);
                }
            }
        }
        let nested = img.crop(1, 2, 6, 5).unwrap().crop(2, 1, 3, 3).unwrap();
        let direct = img.crop(3, 3, 3, 3).unwrap();
        assert_eq!(nested, direct);
    }

    #[test]
    fn png_roundtrip_8bit_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let img = Image::from_planar(2, 1, 1, vec![0.0, 1.0]).unwrap();
        save_image(&img, &path, 8).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.samples(), &[0.0, 1.0]);
    }

    #[test]
    fn eight_bit_quantization_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.png");
        let img = Image::from_planar(2, 1, 1, vec![1.0, 0.3]).unwrap();
        save_image(&img, &path, 8).unwrap();
        let bytes = {
            let decoded = image::open(&path).unwrap().into_luma8();
            decoded.into_raw()
        };
        assert_eq!(bytes, vec![255, 77]);
    }

    #[test]
    fn rgb8_mid_gray_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mid.png");
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(1, 1, vec![128, 128, 128]).unwrap();
        buf.save(&path).unwrap();
        let img = load_image(&path).unwrap();
        for c in 0..3 {
            assert!((img.get(0, 0, c) - 128.0 / 255.0).abs() < 1e-15);
        }
        assert!((img.get(0, 0, 0) - 0.5019607843137255).abs() < 1e-15);
    }

    #[test]
    fn sixteen_bit_roundtrip_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.png");
        let img = Image::constant(3, 3, 3, 0.5).unwrap();
        save_image(&img, &path, 16).unwrap();
        let back = load_image(&path).unwrap();
        for (a, b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn truncated_file_is_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        std::fs::write(&path, [0x89, b'P', b'N', b'G', 0, 1, 2]).unwrap();
        match load_image(&path) {
            Err(Error::Decode { .. }) => {}
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_read_error() {
        match load_image("/nonexistent/nope.png") {
            Err(Error::Read { .. }) => {}
            other => panic!("expected read error, got {other:?}"),
        }
    }
}
