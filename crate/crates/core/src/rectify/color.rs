//! Checker-based polynomial color calibration: block-mean sampling,
//! per-channel least-squares polynomial fits, and pointwise application.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Per-block per-channel mean values sampled from a checker grid,
/// row-major block order.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckerSamples {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    /// `means[(row * cols + col) * channels + c]`
    pub means: Vec<f64>,
}

impl CheckerSamples {
    pub fn channel_values(&self, c: usize) -> Vec<f64> {
        self.means
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }
}

/// Mean color of each cell of a `rows × cols` grid laid over the image.
/// `margin` (fraction of the cell size, `0 ≤ margin < 0.45`) shrinks each
/// cell on all sides to stay clear of block borders.
pub fn sample_checker(img: &Image, rows: usize, cols: usize, margin: f64) -> Result<CheckerSamples> {
    if rows == 0 || cols == 0 || rows > img.height() || cols > img.width() {
        return Err(Error::InvalidParameter(format!(
            "grid {rows}x{cols} does not fit {}x{}",
            img.width(),
            img.height()
        )));
    }
    if !(0.0..0.45).contains(&margin) {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} outside [0, 0.45)"
        )));
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let cell_w = w / cols as f64;
    let cell_h = h / rows as f64;
    let mut means = Vec::with_capacity(rows * cols * img.channels());
    for r in 0..rows {
        for c in 0..cols {
            let x0 = (c as f64 * cell_w + margin * cell_w).round() as usize;
            let x1 = (((c + 1) as f64 * cell_w - margin * cell_w).round() as usize).min(img.width());
            let y0 = (r as f64 * cell_h + margin * cell_h).round() as usize;
            let y1 = (((r + 1) as f64 * cell_h - margin * cell_h).round() as usize).min(img.height());
            if x1 <= x0 || y1 <= y0 || (x1 - x0) * (y1 - y0) < 4 {
                return Err(Error::Degenerate(format!(
                    "cell ({r},{c}) shrinks below 4 pixels at margin {margin}"
                )));
            }
            for ch in 0..img.channels() {
                let plane = img.plane(ch);
                let mut sum = 0.0;
                for y in y0..y1 {
                    sum += plane[y * img.width() + x0..y * img.width() + x1].iter().sum::<f64>();
                }
                means.push(sum / ((x1 - x0) * (y1 - y0)) as f64);
            }
        }
    }
    Ok(CheckerSamples {
        rows,
        cols,
        channels: img.channels(),
        means,
    })
}

/// Per-channel polynomial maps from LR colors to HR colors.
/// Coefficient vectors are constant-term first.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ColorCalibration {
    pub degree: usize,
    #[serde(rename = "channels")]
    pub coeffs: Vec<Vec<f64>>,
    pub fit_rms: Vec<f64>,
}

/// Least-squares polynomial fit of `ys ≈ P(xs)` via Householder QR of the
/// Vandermonde system.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let m = xs.len();
    let n = degree + 1;
    if m < n {
        return Err(Error::SingularFit(format!(
            "{m} samples cannot determine degree {degree}"
        )));
    }
    // Vandermonde, row-major m x n.
    let mut a = vec![0.0f64; m * n];
    for (i, &x) in xs.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..n {
            a[i * n + j] = p;
            p *= x;
        }
    }
    let mut b = ys.to_vec();

    for k in 0..n {
        let mut norm = 0.0;
        for i in k..m {
            norm += a[i * n + k] * a[i * n + k];
        }
        let norm = norm.sqrt();
        if norm < 1e-12 {
            return Err(Error::SingularFit(format!(
                "rank-deficient Vandermonde column {k}"
            )));
        }
        let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0f64; m - k];
        v[0] = a[k * n + k] - alpha;
        for i in k + 1..m {
            v[i - k] = a[i * n + k];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv < 1e-300 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * a[i * n + j]).sum();
            let f = 2.0 * dot / vtv;
            for i in k..m {
                a[i * n + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
        let f = 2.0 * dot / vtv;
        for i in k..m {
            b[i] -= f * v[i - k];
        }
    }

    // Back-substitution on the upper-triangular factor.
    let mut coeffs = vec![0.0f64; n];
    for j in (0..n).rev() {
        let mut acc = b[j];
        for l in j + 1..n {
            acc -= a[j * n + l] * coeffs[l];
        }
        let d = a[j * n + j];
        if d.abs() < 1e-12 {
            return Err(Error::SingularFit(format!("zero pivot at column {j}")));
        }
        coeffs[j] = acc / d;
    }
    Ok(coeffs)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Fit one polynomial per channel mapping LR block means to HR block means.
pub fn fit_color_calibration(
    lr: &CheckerSamples,
    hr: &CheckerSamples,
    degree: usize,
) -> Result<ColorCalibration> {
    if degree == 0 {
        return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
    }
    if lr.channels != hr.channels || lr.rows != hr.rows || lr.cols != hr.cols {
        return Err(Error::DimensionMismatch(format!(
            "checker grids {}x{}x{} vs {}x{}x{}",
            lr.rows, lr.cols, lr.channels, hr.rows, hr.cols, hr.channels
        )));
    }
    let mut coeffs = Vec::with_capacity(lr.channels);
    let mut fit_rms = Vec::with_capacity(lr.channels);
    for c in 0..lr.channels {
        let xs = lr.channel_values(c);
        let ys = hr.channel_values(c);
        let mut distinct: Vec<f64> = xs.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if distinct.len() < degree + 1 {
            return Err(Error::SingularFit(format!(
                "channel {c}: {} distinct abscissae for degree {degree}",
                distinct.len()
            )));
        }
        let poly = polyfit(&xs, &ys, degree)?;
        let rms = (xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (horner(&poly, x) - y).powi(2))
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        coeffs.push(poly);
        fit_rms.push(rms);
    }
    Ok(ColorCalibration {
        degree,
        coeffs,
        fit_rms,
    })
}

/// Apply the per-channel polynomials pointwise (Horner order), clamping.
pub fn apply_color_calibration(img: &Image, calib: &ColorCalibration) -> Result<Image> {
    if calib.coeffs.len() != img.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}-channel calibration on {}-channel image",
            calib.coeffs.len(),
            img.channels()
        )));
    }
    let mut out = img.clone();
    for c in 0..img.channels() {
        let poly = &calib.coeffs[c];
        for v in out.plane_mut(c) {
            *v = horner(poly, *v).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Pixelwise arithmetic mean of a burst of same-shape captures,
/// accumulated in list order.
pub fn average_burst(images: &[Image]) -> Result<Image> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty burst".into()))?;
    for img in images {
        if img.dims() != first.dims() || img.channels() != first.channels() {
            return Err(Error::DimensionMismatch(format!(
                "burst member {}x{}x{} differs from {}x{}x{}",
                img.width(),
                img.height(),
                img.channels(),
                first.width(),
                first.height(),
                first.channels()
            )));
        }
    }
    let mut acc = vec![0.0f64; first.sample_count()];
    for img in images {
        for (a, &v) in acc.iter_mut().zip(img.samples()) {
            *a += v;
        }
    }
    let n = images.len() as f64;
    Image::from_planar(
        first.width(),
        first.height(),
        first.channels(),
        acc.into_iter().map(|v| v / n).collect(),
    )
}
