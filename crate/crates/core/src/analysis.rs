//! Degradation-matching analysis: sweep Gaussian parameters against the
//! realistic LR observations and compare degradation models per scene.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{psnr, psnr_serde, ssim, MetricsReport};
use crate::par;
use crate::raster::Image;
use crate::resample::{
    degrade_bicubic, degrade_gaussian_ordered, resize_bicubic, BlurOrder, GaussianParams,
    ScaleFactor,
};

/// Cartesian grid of blur parameters to traverse.
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub k_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(k_values: Vec<usize>, sigma_values: Vec<f64>) -> Result<Self> {
        if k_values.is_empty() || sigma_values.is_empty() {
            return Err(Error::InvalidParameter("empty sweep grid".into()));
        }
        if !k_values.windows(2).all(|w| w[0] < w[1]) || k_values.iter().any(|k| k % 2 == 0) {
            return Err(Error::InvalidParameter(
                "k values must be odd and strictly increasing".into(),
            ));
        }
        if !sigma_values.windows(2).all(|w| w[0] < w[1]) || sigma_values.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidParameter(
                "sigma values must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            k_values,
            sigma_values,
        })
    }

    /// k in {3,5,7,9}, sigma from 0.5 to 4.0 in steps of 0.05.
    pub fn default_grid() -> Self {
        let sigmas: Vec<f64> = (0..=70).map(|i| 0.5 + 0.05 * i as f64).collect();
        Self::new(vec![3, 5, 7, 9], sigmas).expect("default grid is valid")
    }

    pub fn cells(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.k_values.len() * self.sigma_values.len());
        for &k in &self.k_values {
            for &s in &self.sigma_values {
                out.push((k, s));
            }
        }
        out
    }
}

/// Mean PSNR of one grid cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub sigma: f64,
    #[serde(with = "psnr_serde")]
    pub mean_psnr_db: f64,
    pub n_scenes: usize,
}

/// Full sweep output: one row per grid cell in grid order, plus every
/// argmax cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best: Vec<(usize, f64)>,
}

/// Traverse the grid with the default blur-first operator order.
pub fn sweep_gaussian(dataset: &Dataset, grid: &SweepGrid, scale: ScaleFactor) -> Result<SweepResult> {
    sweep_gaussian_ordered(dataset, grid, scale, BlurOrder::default())
}

/// For each `(k, σ)`: degrade every HR frame, interpolate both the synthetic
/// and the realistic LR back to HR resolution, and average their PSNR over
/// the dataset. `best` holds every argmax cell.
pub fn sweep_gaussian_ordered(
    dataset: &Dataset,
    grid: &SweepGrid,
    scale: ScaleFactor,
    order: BlurOrder,
) -> Result<SweepResult> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let cells = grid.cells();
    let mut sums = vec![0.0f64; cells.len()];
    // Scene-major so only one interpolated reference is alive at a time;
    // cells evaluate in parallel and accumulate in grid order.
    for pair in &dataset.pairs {
        let (hw, hh) = pair.hr.dims();
        let interp_real = resize_bicubic(&pair.lr, hw, hh)?;
        let scores = par::map_indexed(cells.len(), |ci| -> Result<f64> {
            let (k, sigma) = cells[ci];
            let params = GaussianParams::new(k, sigma)?;
            let lrg = degrade_gaussian_ordered(&pair.hr, params, scale, order)?;
            let interp_g = resize_bicubic(&lrg, hw, hh)?;
            psnr(&interp_g, &interp_real, 1.0)
        });
        for (sum, score) in sums.iter_mut().zip(scores) {
            *sum += score?;
        }
    }

    let n = dataset.len();
    let rows: Vec<SweepRow> = cells
        .iter()
        .zip(&sums)
        .map(|(&(k, sigma), &sum)| SweepRow {
            k,
            sigma,
            mean_psnr_db: sum / n as f64,
            n_scenes: n,
        })
        .collect();

    let best_score = rows
        .iter()
        .map(|r| r.mean_psnr_db)
        .max_by(f64::total_cmp)
        .expect("grid is non-empty");
    let best: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.mean_psnr_db == best_score)
        .map(|r| (r.k, r.sigma))
        .collect();
    Ok(SweepResult { rows, best })
}

/// Write `k,sigma,mean_psnr_db,n_scenes` rows in grid order, 6 decimals.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    assert!(!result.best.is_empty(), "sweep result without an argmax");
    writeln!(out, "k,sigma,mean_psnr_db,n_scenes")?;
    for row in &result.rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{}",
            row.k, row.sigma, row.mean_psnr_db, row.n_scenes
        )?;
    }
    Ok(())
}

pub fn emit_sweep_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Write {
        path: path.into(),
        source,
    })?;
    write_sweep_csv(result, std::io::BufWriter::new(file)).map_err(|source| Error::Write {
        path: path.into(),
        source,
    })
}

/// Per-scene metrics of the three LR candidates against the HR frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneDegradationRow {
    pub id: String,
    pub bicubic: MetricsReport,
    pub gaussian: MetricsReport,
    pub realistic: MetricsReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegradationComparison {
    pub scenes: Vec<SceneDegradationRow>,
    #[serde(with = "psnr_serde")]
    pub mean_bicubic_psnr_db: f64,
    #[serde(with = "psnr_serde")]
    pub mean_gaussian_psnr_db: f64,
    #[serde(with = "psnr_serde")]
    pub mean_realistic_psnr_db: f64,
    pub mean_bicubic_ssim: f64,
    pub mean_gaussian_ssim: f64,
    pub mean_realistic_ssim: f64,
}

/// Quantify how each degradation's interpolated LR compares to the HR
/// ground truth, per scene and on average.
pub fn compare_degradations(
    dataset: &Dataset,
    scale: ScaleFactor,
    gauss: GaussianParams,
) -> Result<DegradationComparison> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let mut scenes = Vec::with_capacity(dataset.len());
    for pair in &dataset.pairs {
        let (hw, hh) = pair.hr.dims();
        let score = |lr: &Image| -> Result<MetricsReport> {
            let interp = resize_bicubic(lr, hw, hh)?;
            Ok(MetricsReport {
                psnr_db: psnr(&interp, &pair.hr, 1.0)?,
                ssim: ssim(&interp, &pair.hr)?,
                per_channel_psnr_db: None,
            })
        };
        let bicubic = score(&degrade_bicubic(&pair.hr, scale)?)?;
        let gaussian = score(&degrade_gaussian_ordered(
            &pair.hr,
            gauss,
            scale,
            BlurOrder::default(),
        )?)?;
        let realistic = score(&pair.lr)?;
        scenes.push(SceneDegradationRow {
            id: pair.id.clone(),
            bicubic,
            gaussian,
            realistic,
        });
    }
    let n = scenes.len() as f64;
    let mean = |f: &dyn Fn(&SceneDegradationRow) -> f64| scenes.iter().map(|s| f(s)).sum::<f64>() / n;
    Ok(DegradationComparison {
        mean_bicubic_psnr_db: mean(&|s| s.bicubic.psnr_db),
        mean_gaussian_psnr_db: mean(&|s| s.gaussian.psnr_db),
        mean_realistic_psnr_db: mean(&|s| s.realistic.psnr_db),
        mean_bicubic_ssim: mean(&|s| s.bicubic.ssim),
        mean_gaussian_ssim: mean(&|s| s.gaussian.ssim),
        mean_realistic_ssim: mean(&|s| s.realistic.ssim),
        scenes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, PairedScene};
    use crate::synth::{SynthSpec, HiddenChain};

    fn synth_dataset(spec: &SynthSpec) -> Dataset {
        let scenes = spec.generate().unwrap();
        let pairs: Vec<PairedScene> = scenes
            .into_iter()
            .map(|s| PairedScene::new(s.id, s.lr, s.hr).unwrap())
            .collect();
        let split = spec.split();
        Dataset {
            pairs,
            split,
            nominal_scale: Some(spec.scale),
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset {
            pairs: vec![],
            split: Default::default(),
            nominal_scale: None,
        };
        let grid = SweepGrid::new(vec![3], vec![1.0]).unwrap();
        assert!(sweep_gaussian(&ds, &grid, ScaleFactor::new(2.0).unwrap()).is_err());
        assert!(compare_degradations(
            &ds,
            ScaleFactor::new(2.0).unwrap(),
            GaussianParams::new(3, 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn single_cell_grid_is_best() {
        let spec = SynthSpec {
            n_scenes: 2,
            hr_size: 96,
            scale: 2.9,
            seed: 5,
            hidden: HiddenChain {
                gauss: Some((5, 1.2)),
                ..HiddenChain::default()
            },
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec);
        let grid = SweepGrid::new(vec![5], vec![1.2]).unwrap();
        let result = sweep_gaussian(&ds, &grid, ScaleFactor::new(2.9).unwrap()).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.best, vec![(5, 1.2)]);
    }

    #[test]
    fn hidden_params_win_the_grid() {
        let spec = SynthSpec {
            n_scenes: 3,
            hr_size: 128,
            scale: 2.9,
            seed: 8,
            hidden: HiddenChain {
                gauss: Some((5, 1.2)),
                noise_sigma: 0.002,
                ..HiddenChain::default()
            },
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec);
        let grid = SweepGrid::new(vec![3, 5, 7], vec![0.8, 1.0, 1.2, 1.4, 1.6]).unwrap();
        let result = sweep_gaussian(&ds, &grid, ScaleFactor::new(2.9).unwrap()).unwrap();
        assert_eq!(result.best, vec![(5, 1.2)]);
        let best_score = result
            .rows
            .iter()
            .find(|r| r.k == 5 && r.sigma == 1.2)
            .unwrap()
            .mean_psnr_db;
        for row in &result.rows {
            if !(row.k == 5 && row.sigma == 1.2) {
                assert!(best_score > row.mean_psnr_db);
            }
        }
    }

    #[test]
    fn sweep_deterministic_bytes() {
        let spec = SynthSpec {
            n_scenes: 2,
            hr_size: 96,
            scale: 2.9,
            seed: 4,
            hidden: HiddenChain {
                gauss: Some((3, 1.0)),
                ..HiddenChain::default()
            },
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec);
        let grid = SweepGrid::new(vec![3, 5], vec![0.8, 1.0]).unwrap();
        let scale = ScaleFactor::new(2.9).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_sweep_csv(&sweep_gaussian(&ds, &grid, scale).unwrap(), &mut csv_a).unwrap();
        write_sweep_csv(&sweep_gaussian(&ds, &grid, scale).unwrap(), &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let text = String::from_utf8(csv_a).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("k,sigma,mean_psnr_db,n_scenes\n"));
    }

    #[test]
    fn csv_roundtrip_within_format_precision() {
        let rows = vec![
            SweepRow { k: 3, sigma: 0.55, mean_psnr_db: 31.123456789, n_scenes: 2 },
            SweepRow { k: 5, sigma: 1.25, mean_psnr_db: 29.9, n_scenes: 2 },
        ];
        let result = SweepResult {
            rows: rows.clone(),
            best: vec![(3, 0.55)],
        };
        let mut buf = Vec::new();
        write_sweep_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, row) in text.lines().skip(1).zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0].parse::<usize>().unwrap(), row.k);
            assert!((fields[1].parse::<f64>().unwrap() - row.sigma).abs() < 1e-6);
            assert!((fields[2].parse::<f64>().unwrap() - row.mean_psnr_db).abs() < 1e-6);
            assert_eq!(fields[3].parse::<usize>().unwrap(), row.n_scenes);
        }
    }

    #[test]
    fn bicubic_lr_makes_rows_agree() {
        let spec = SynthSpec {
            n_scenes: 2,
            hr_size: 96,
            scale: 2.9,
            seed: 11,
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec);
        let report = compare_degradations(
            &ds,
            ScaleFactor::new(2.9).unwrap(),
            GaussianParams::new(5, 2.65).unwrap(),
        )
        .unwrap();
        // lr was constructed exactly as degrade_bicubic(hr).
        for s in &report.scenes {
            assert!((s.bicubic.psnr_db - s.realistic.psnr_db).abs() < 1e-6
                || (s.bicubic.psnr_db.is_infinite() && s.realistic.psnr_db.is_infinite()));
        }
    }

    #[test]
    fn single_scene_mean_is_scene_value() {
        let spec = SynthSpec {
            n_scenes: 1,
            hr_size: 96,
            scale: 2.9,
            seed: 13,
            hidden: HiddenChain {
                gauss: Some((5, 2.0)),
                ..HiddenChain::default()
            },
            ..SynthSpec::default()
        };
        let ds = synth_dataset(&spec);
        let report = compare_degradations(
            &ds,
            ScaleFactor::new(2.9).unwrap(),
            GaussianParams::new(5, 2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(report.scenes.len(), 1);
        assert_eq!(report.mean_realistic_psnr_db, report.scenes[0].realistic.psnr_db);
    }
}
