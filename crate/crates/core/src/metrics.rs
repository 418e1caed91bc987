//! Full-reference quality metrics: PSNR and single-scale SSIM.

use serde::{Deserialize, Serialize};

use crate::dataset::PairedScene;
use crate::error::{Error, Result};
use crate::par;
use crate::raster::Image;
use crate::resample::resize_bicubic;

/// SSIM window: 11 taps, sigma 1.5.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// Serialize possibly-infinite PSNR values as the JSON string `"inf"`.
pub mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad psnr value {t:?}"))),
        }
    }
}

/// PSNR/SSIM of one candidate against one reference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_channel_psnr_db: Option<Vec<f64>>,
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn mse_planes(a: &Image, b: &Image) -> f64 {
    let w = a.width();
    let rows = a.height() * a.channels();
    let sa = a.samples();
    let sb = b.samples();
    let sum = par::sum_indexed(rows, |r| {
        let (ra, rb) = (&sa[r * w..(r + 1) * w], &sb[r * w..(r + 1) * w]);
        ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    });
    sum / sa.len() as f64
}

/// `10·log10(peak² / MSE)` over all samples and channels; `+inf` when the
/// images are identical.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    check_dims(a, b)?;
    let mse = mse_planes(a, b);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// PSNR of the BT.601 luminance channels.
pub fn psnr_luminance(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    psnr(&a.to_luminance(), &b.to_luminance(), peak)
}

fn per_channel_psnr(a: &Image, b: &Image, peak: f64) -> Vec<f64> {
    (0..a.channels())
        .map(|c| {
            let n = a.plane(c).len() as f64;
            let mse = a
                .plane(c)
                .iter()
                .zip(b.plane(c))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / n;
            if mse == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (peak * peak / mse).log10()
            }
        })
        .collect()
}

/// Gaussian-weighted valid-region filtering along both axes; the output
/// shrinks by `window - 1` in each dimension.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut tmp = vec![0.0f64; h * ow];
    par::for_each_chunk_mut(&mut tmp, ow, |y, row| {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            row[x] = kernel.iter().enumerate().map(|(i, kw)| kw * src[x + i]).sum();
        }
    });
    let mut out = vec![0.0f64; oh * ow];
    par::for_each_chunk_mut(&mut out, ow, |y, row| {
        for x in 0..ow {
            row[x] = kernel
                .iter()
                .enumerate()
                .map(|(i, kw)| kw * tmp[(y + i) * ow + x])
                .sum();
        }
    });
    (out, ow, oh)
}

/// Single-scale SSIM on luminance: 11×11 Gaussian window (σ = 1.5),
/// C1 = (0.01·peak)², C2 = (0.03·peak)², averaged over valid windows.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let la = a.to_luminance();
    let lb = b.to_luminance();
    let xa = la.plane(0);
    let xb = lb.plane(0);

    let kernel: Vec<f64> = {
        let c = (SSIM_WINDOW - 1) as f64 / 2.0;
        let mut k: Vec<f64> = (0..SSIM_WINDOW)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    };

    let n = w * h;
    let mut aa = vec![0.0; n];
    let mut bb = vec![0.0; n];
    let mut ab = vec![0.0; n];
    for i in 0..n {
        aa[i] = xa[i] * xa[i];
        bb[i] = xb[i] * xb[i];
        ab[i] = xa[i] * xb[i];
    }
    let (mu_a, ow, oh) = filter_valid(xa, w, h, &kernel);
    let (mu_b, _, _) = filter_valid(xb, w, h, &kernel);
    let (s_aa, _, _) = filter_valid(&aa, w, h, &kernel);
    let (s_bb, _, _) = filter_valid(&bb, w, h, &kernel);
    let (s_ab, _, _) = filter_valid(&ab, w, h, &kernel);

    const PEAK: f64 = 1.0;
    let c1 = (0.01 * PEAK) * (0.01 * PEAK);
    let c2 = (0.03 * PEAK) * (0.03 * PEAK);

    let total = par::sum_indexed(oh, |y| {
        let mut row_sum = 0.0;
        for x in 0..ow {
            let i = y * ow + x;
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = s_aa[i] - ma * ma;
            let vb = s_bb[i] - mb * mb;
            let cov = s_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            row_sum += num / den;
        }
        row_sum
    });
    Ok(total / (ow * oh) as f64)
}

/// PSNR (RGB average) and SSIM (luminance) of `candidate` against the
/// scene's HR ground truth.
pub fn evaluate_pair(scene: &PairedScene, candidate: &Image) -> Result<MetricsReport> {
    check_dims(&scene.hr, candidate)?;
    let psnr_db = psnr(&scene.hr, candidate, 1.0)?;
    let ssim_v = ssim(&scene.hr, candidate)?;
    let per_channel = if scene.hr.channels() == 3 {
        Some(per_channel_psnr(&scene.hr, candidate, 1.0))
    } else {
        None
    };
    Ok(MetricsReport {
        psnr_db,
        ssim: ssim_v,
        per_channel_psnr_db: per_channel,
    })
}

/// The bicubic-interpolation baseline candidate for a scene.
pub fn interp_baseline(scene: &PairedScene) -> Result<Image> {
    resize_bicubic(&scene.lr, scene.hr.width(), scene.hr.height())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..w * h * c).map(|_| rng.random_range(0.0..1.0)).collect();
        Image::from_planar(w, h, c, samples).unwrap()
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = random_image(8, 8, 3, 1);
        assert!(psnr(&img, &img, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn psnr_constant_offset() {
        let a = Image::constant(16, 16, 1, 0.0).unwrap();
        let b = Image::constant(16, 16, 1, 0.1).unwrap();
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_bruteforce_mse() {
        let a = random_image(13, 9, 3, 2);
        let b = random_image(13, 9, 3, 3);
        let mut sq = 0.0;
        for c in 0..3 {
            for y in 0..9 {
                for x in 0..13 {
                    let d = a.get(x, y, c) - b.get(x, y, c);
                    sq += d * d;
                }
            }
        }
        let mse = sq / (13.0 * 9.0 * 3.0);
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_symmetry() {
        let a = random_image(12, 12, 3, 4);
        let b = random_image(12, 12, 3, 5);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn ssim_self_similarity() {
        let img = random_image(24, 18, 3, 6);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_offset_closed_form() {
        let a = Image::constant(16, 16, 1, 0.0).unwrap();
        let b = Image::constant(16, 16, 1, 0.1).unwrap();
        let c1 = 1e-4;
        let expect = c1 / (0.01 + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 0.009900990099009901).abs() < 1e-12);
    }

    #[test]
    fn ssim_anticorrelated_is_negative() {
        // Zero-mean checkerboard about 0.5, and its inversion.
        let mut a = Image::new(16, 16, 1).unwrap();
        let mut b = Image::new(16, 16, 1).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let s = if (x + y) % 2 == 0 { 0.3 } else { 0.7 };
                a.set(x, y, 0, s);
                b.set(x, y, 0, 1.0 - s);
            }
        }
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_too_small_rejected() {
        let img = Image::constant(8, 8, 1, 0.5).unwrap();
        assert!(ssim(&img, &img).is_err());
    }

    #[test]
    fn evaluate_pair_perfect_candidate() {
        let hr = random_image(32, 24, 3, 7);
        let lr = crate::resample::degrade_bicubic(&hr, crate::resample::ScaleFactor::new(2.0).unwrap()).unwrap();
        let scene = crate::dataset::PairedScene::new("t", lr, hr.clone()).unwrap();
        let report = evaluate_pair(&scene, &hr).unwrap();
        assert!(report.psnr_db.is_infinite());
        assert!((report.ssim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_json_inf_sentinel() {
        let report = MetricsReport {
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            per_channel_psnr_db: None,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"psnr_db\":\"inf\""));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert!(back.psnr_db.is_infinite());

        let finite = MetricsReport {
            psnr_db: 28.15,
            ssim: 0.8113,
            per_channel_psnr_db: None,
        };
        let json = serde_json::to_string(&finite).unwrap();
        assert!(json.contains("28.15"));
    }
}
