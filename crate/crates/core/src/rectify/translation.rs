//! Global 2D translation estimation between two same-size images:
//! Harris corners on the reference, patch matching by normalized
//! cross-correlation, RANSAC over the one-match translation model, and
//! subpixel refinement by a parabolic fit of the whole-frame NCC.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::resample::{separable_resample, shift_axis_taps, DEFAULT_KERNEL_A};

/// Estimated displacement of `moving` relative to `reference`:
/// `moving(x, y) ≈ reference(x - dx, y - dy)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TranslationEstimate {
    pub dx: f64,
    pub dy: f64,
    pub inliers: usize,
    pub total_matches: usize,
    pub rms_residual: f64,
}

/// Tuning knobs for the estimator.
#[derive(Clone, Copy, Debug)]
pub struct RansacParams {
    /// Consensus distance in pixels.
    pub inlier_threshold: f64,
    pub iterations: usize,
    /// Below this many candidate matches the estimate is refused.
    pub min_matches: usize,
    pub min_inlier_ratio: f64,
    pub seed: u64,
    pub max_corners: usize,
    /// Half-size of the matching patch.
    pub patch_radius: usize,
    /// Largest displacement searched, per axis.
    pub search_radius: usize,
    /// Minimum NCC for a candidate match.
    pub ncc_threshold: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 1.0,
            iterations: 1000,
            min_matches: 8,
            min_inlier_ratio: 0.2,
            seed: 0x5EED,
            max_corners: 128,
            patch_radius: 7,
            search_radius: 24,
            ncc_threshold: 0.6,
        }
    }
}

/// Separable blur on a raw plane (no clamping; gradients can be negative).
fn blur_plane(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let c = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let ix = (x as i64 + i as i64 - c).clamp(0, w as i64 - 1) as usize;
                acc += kw * data[y * w + ix];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kw) in kernel.iter().enumerate() {
                let iy = (y as i64 + i as i64 - c).clamp(0, h as i64 - 1) as usize;
                acc += kw * tmp[iy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Harris corner positions in `plane`, strongest first, at least `margin`
/// pixels away from every border.
fn harris_corners(plane: &[f64], w: usize, h: usize, margin: usize, max_corners: usize) -> Vec<(usize, usize)> {
    if w <= 2 * margin || h <= 2 * margin {
        return Vec::new();
    }
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    let at = |x: i64, y: i64| -> f64 {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        plane[y * w + x]
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            // Sobel
            ix[y as usize * w + x as usize] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            iy[y as usize * w + x as usize] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
        }
    }
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for i in 0..w * h {
        ixx[i] = ix[i] * ix[i];
        iyy[i] = iy[i] * iy[i];
        ixy[i] = ix[i] * iy[i];
    }
    let g: Vec<f64> = {
        let sigma: f64 = 1.0;
        let mut k: Vec<f64> = (-2..=2i64)
            .map(|i| (-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    };
    let sxx = blur_plane(&ixx, w, h, &g);
    let syy = blur_plane(&iyy, w, h, &g);
    let sxy = blur_plane(&ixy, w, h, &g);

    let mut response = vec![0.0; w * h];
    let mut max_r: f64 = 0.0;
    for i in 0..w * h {
        let r = sxx[i] * syy[i] - sxy[i] * sxy[i] - 0.04 * (sxx[i] + syy[i]).powi(2);
        response[i] = r;
        max_r = max_r.max(r);
    }
    if max_r <= 0.0 {
        return Vec::new();
    }
    let threshold = 0.01 * max_r;

    let mut corners: Vec<(f64, usize, usize)> = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            let r = response[y * w + x];
            if r < threshold {
                continue;
            }
            // 3x3 non-max suppression; ties broken toward the first in scan order.
            let mut is_max = true;
            'nms: for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if (ny, nx) == (y, x) {
                        continue;
                    }
                    let nr = response[ny * w + nx];
                    if nr > r || (nr == r && (ny, nx) < (y, x)) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                corners.push((r, x, y));
            }
        }
    }
    corners.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| (a.2, a.1).cmp(&(b.2, b.1))));
    corners.truncate(max_corners);
    corners.into_iter().map(|(_, x, y)| (x, y)).collect()
}

/// Zero-normalized cross-correlation of two equal-length slices given
/// precomputed mean/deviation of the first.
fn ncc_against(ref_dev: &[f64], ref_norm: f64, probe: &[f64]) -> f64 {
    let n = probe.len() as f64;
    let mean: f64 = probe.iter().sum::<f64>() / n;
    let mut dot = 0.0;
    let mut norm = 0.0;
    for (rd, &p) in ref_dev.iter().zip(probe) {
        let pd = p - mean;
        dot += rd * pd;
        norm += pd * pd;
    }
    if norm <= 1e-12 || ref_norm <= 1e-12 {
        return -1.0;
    }
    dot / (ref_norm * norm).sqrt()
}

fn gather_patch(plane: &[f64], w: usize, cx: usize, cy: usize, r: usize, out: &mut Vec<f64>) {
    out.clear();
    for y in cy - r..=cy + r {
        out.extend_from_slice(&plane[y * w + cx - r..y * w + cx + r + 1]);
    }
}

/// One candidate displacement per matched corner.
fn candidate_matches(
    ref_plane: &[f64],
    mov_plane: &[f64],
    w: usize,
    h: usize,
    params: &RansacParams,
) -> Vec<(f64, f64)> {
    let r = params.patch_radius;
    let s = params.search_radius as i64;
    let margin = r + 1;
    let corners = harris_corners(ref_plane, w, h, margin, params.max_corners);

    let mut patch = Vec::with_capacity((2 * r + 1) * (2 * r + 1));
    let mut probe = Vec::with_capacity((2 * r + 1) * (2 * r + 1));
    let mut out = Vec::new();
    for (cx, cy) in corners {
        gather_patch(ref_plane, w, cx, cy, r, &mut patch);
        let n = patch.len() as f64;
        let mean: f64 = patch.iter().sum::<f64>() / n;
        let dev: Vec<f64> = patch.iter().map(|v| v - mean).collect();
        let norm: f64 = dev.iter().map(|v| v * v).sum();
        if norm <= 1e-12 {
            continue;
        }

        let mut best = (-2.0, 0i64, 0i64);
        for v in -s..=s {
            let my = cy as i64 + v;
            if my < r as i64 || my + r as i64 >= h as i64 {
                continue;
            }
            for u in -s..=s {
                let mx = cx as i64 + u;
                if mx < r as i64 || mx + r as i64 >= w as i64 {
                    continue;
                }
                gather_patch(mov_plane, w, mx as usize, my as usize, r, &mut probe);
                let score = ncc_against(&dev, norm, &probe);
                if score > best.0 {
                    best = (score, u, v);
                }
            }
        }
        if best.0 >= params.ncc_threshold {
            out.push((best.1 as f64, best.2 as f64));
        }
    }
    out
}

/// Whole-frame NCC between `ref` and `moving` shifted by the integer
/// displacement `(u, v)`, over the overlap region. A border band is
/// excluded: replicated edges do not move with the content and would drag
/// the correlation peak toward zero.
fn global_ncc(ref_plane: &[f64], mov_plane: &[f64], w: usize, h: usize, u: i64, v: i64) -> f64 {
    let band = ((0.04 * w.min(h) as f64).ceil() as usize).max(4);
    let x0 = (-u).max(0) as usize + band;
    let x1 = ((w as i64 - u.max(0)) as usize).saturating_sub(band);
    let y0 = (-v).max(0) as usize + band;
    let y1 = ((h as i64 - v.max(0)) as usize).saturating_sub(band);
    if x1 <= x0 + 4 || y1 <= y0 + 4 {
        return -1.0;
    }
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            sa += ref_plane[y * w + x];
            sb += mov_plane[(y as i64 + v) as usize * w + (x as i64 + u) as usize];
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            let a = ref_plane[y * w + x] - ma;
            let b = mov_plane[(y as i64 + v) as usize * w + (x as i64 + u) as usize] - mb;
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
    }
    if na <= 1e-12 || nb <= 1e-12 {
        return -1.0;
    }
    dot / (na * nb).sqrt()
}

/// Peak offset of a parabola through `(-1, l)`, `(0, m)`, `(1, r)`,
/// clamped to `[-0.5, 0.5]`.
fn parabolic_offset(l: f64, m: f64, r: f64) -> f64 {
    let denom = l + r - 2.0 * m;
    if denom >= -1e-15 {
        return 0.0;
    }
    ((l - r) / (2.0 * denom)).clamp(-0.5, 0.5)
}

/// Bicubic translation of a raw plane (no clamping).
fn shift_plane(plane: &[f64], w: usize, h: usize, dx: f64, dy: f64) -> Vec<f64> {
    let xt = shift_axis_taps(w, dx, DEFAULT_KERNEL_A);
    let yt = shift_axis_taps(h, dy, DEFAULT_KERNEL_A);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for (x, t) in xt.iter().enumerate() {
            tmp[y * w + x] = t.w[0] * row[t.idx[0]]
                + t.w[1] * row[t.idx[1]]
                + t.w[2] * row[t.idx[2]]
                + t.w[3] * row[t.idx[3]];
        }
    }
    let mut out = vec![0.0; w * h];
    for (y, t) in yt.iter().enumerate() {
        for x in 0..w {
            out[y * w + x] = t.w[0] * tmp[t.idx[0] * w + x]
                + t.w[1] * tmp[t.idx[1] * w + x]
                + t.w[2] * tmp[t.idx[2] * w + x]
                + t.w[3] * tmp[t.idx[3] * w + x];
        }
    }
    out
}

/// NCC at a fractional displacement: the moving plane is resampled onto the
/// reference grid first, then correlated at zero offset with a band wide
/// enough to exclude every resampled border.
fn frac_ncc(ref_plane: &[f64], mov_plane: &[f64], w: usize, h: usize, dx: f64, dy: f64) -> f64 {
    let aligned = shift_plane(mov_plane, w, h, -dx, -dy);
    let reach = dx.abs().max(dy.abs()).ceil() as usize + 2;
    let band = ((0.04 * w.min(h) as f64).ceil() as usize).max(4).max(reach);
    let (x0, x1) = (band, w.saturating_sub(band));
    let (y0, y1) = (band, h.saturating_sub(band));
    if x1 <= x0 + 4 || y1 <= y0 + 4 {
        return -1.0;
    }
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            sa += ref_plane[y * w + x];
            sb += aligned[y * w + x];
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            let a = ref_plane[y * w + x] - ma;
            let b = aligned[y * w + x] - mb;
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
    }
    if na <= 1e-12 || nb <= 1e-12 {
        return -1.0;
    }
    dot / (na * nb).sqrt()
}

pub fn estimate_translation(reference: &Image, moving: &Image) -> Result<TranslationEstimate> {
    estimate_translation_with(reference, moving, &RansacParams::default())
}

pub fn estimate_translation_with(
    reference: &Image,
    moving: &Image,
    params: &RansacParams,
) -> Result<TranslationEstimate> {
    if reference.dims() != moving.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            moving.width(),
            moving.height()
        )));
    }
    let (w, h) = reference.dims();
    let ref_lum = reference.to_luminance();
    let mov_lum = moving.to_luminance();
    let rp = ref_lum.plane(0);
    let mp = mov_lum.plane(0);

    let candidates = candidate_matches(rp, mp, w, h, params);
    if candidates.len() < params.min_matches {
        return Err(Error::InsufficientFeatures {
            found: candidates.len(),
            needed: params.min_matches,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best_inliers: Vec<usize> = Vec::new();
    for _ in 0..params.iterations {
        let pick = candidates[rng.random_range(0..candidates.len())];
        let inliers: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let (du, dv) = (c.0 - pick.0, c.1 - pick.1);
                (du * du + dv * dv).sqrt() <= params.inlier_threshold
            })
            .map(|(i, _)| i)
            .collect();
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
        }
    }
    let ratio = best_inliers.len() as f64 / candidates.len() as f64;
    if ratio < params.min_inlier_ratio {
        return Err(Error::UnreliableEstimate {
            ratio,
            min: params.min_inlier_ratio,
        });
    }

    let mean_dx = best_inliers.iter().map(|&i| candidates[i].0).sum::<f64>() / best_inliers.len() as f64;
    let mean_dy = best_inliers.iter().map(|&i| candidates[i].1).sum::<f64>() / best_inliers.len() as f64;

    // Refinement runs on blurred planes: smoothing widens the correlation
    // peak so the parabolic model holds and integer-locking bias stays low.
    let smooth_kernel: Vec<f64> = {
        let sigma: f64 = 1.5;
        let mut k: Vec<f64> = (-4..=4i64)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    };
    let rp_s = blur_plane(rp, w, h, &smooth_kernel);
    let mp_s = blur_plane(mp, w, h, &smooth_kernel);

    // Walk to the integer NCC optimum near the consensus mean, then refine
    // each axis with a parabola through the neighboring correlations.
    let mut cu = mean_dx.round() as i64;
    let mut cv = mean_dy.round() as i64;
    let mut grid = [[0.0f64; 3]; 3];
    for _walk in 0..5 {
        for (j, dv) in (-1..=1).enumerate() {
            for (i, du) in (-1..=1).enumerate() {
                grid[j][i] = global_ncc(&rp_s, &mp_s, w, h, cu + du, cv + dv);
            }
        }
        let mut arg = (1usize, 1usize);
        for j in 0..3 {
            for i in 0..3 {
                if grid[j][i] > grid[arg.1][arg.0] {
                    arg = (i, j);
                }
            }
        }
        if arg == (1, 1) {
            break;
        }
        cu += arg.0 as i64 - 1;
        cv += arg.1 as i64 - 1;
    }
    let mut dx = cu as f64 + parabolic_offset(grid[1][0], grid[1][1], grid[1][2]);
    let mut dy = cv as f64 + parabolic_offset(grid[0][1], grid[1][1], grid[2][1]);

    // Narrow the fit: quarter-pixel parabolas on genuinely resampled
    // planes cut the model error of the unit-spacing fit.
    for _pass in 0..2 {
        let step = 0.25;
        let cx = [
            frac_ncc(&rp_s, &mp_s, w, h, dx - step, dy),
            frac_ncc(&rp_s, &mp_s, w, h, dx, dy),
            frac_ncc(&rp_s, &mp_s, w, h, dx + step, dy),
        ];
        dx += step * parabolic_offset(cx[0], cx[1], cx[2]);
        let cy = [
            frac_ncc(&rp_s, &mp_s, w, h, dx, dy - step),
            frac_ncc(&rp_s, &mp_s, w, h, dx, dy),
            frac_ncc(&rp_s, &mp_s, w, h, dx, dy + step),
        ];
        dy += step * parabolic_offset(cy[0], cy[1], cy[2]);
    }

    let rms = (best_inliers
        .iter()
        .map(|&i| {
            let (du, dv) = (candidates[i].0 - dx, candidates[i].1 - dy);
            du * du + dv * dv
        })
        .sum::<f64>()
        / best_inliers.len() as f64)
        .sqrt();

    Ok(TranslationEstimate {
        dx,
        dy,
        inliers: best_inliers.len(),
        total_matches: candidates.len(),
        rms_residual: rms,
    })
}

/// Translate image content by `(dx, dy)` with bicubic resampling:
/// output pixel `(x, y)` samples source coordinate `(x - dx, y - dy)`.
pub fn shift_image(img: &Image, dx: f64, dy: f64) -> Result<Image> {
    let limit = img.width().min(img.height()) as f64 / 2.0;
    if dx.abs() >= limit || dy.abs() >= limit {
        return Err(Error::InvalidParameter(format!(
            "shift ({dx}, {dy}) exceeds half the image extent"
        )));
    }
    let xtaps = shift_axis_taps(img.width(), dx, DEFAULT_KERNEL_A);
    let ytaps = shift_axis_taps(img.height(), dy, DEFAULT_KERNEL_A);
    Ok(separable_resample(img, &xtaps, &ytaps))
}
