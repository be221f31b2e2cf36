//! Transforming one image into another by a π-symmetric flow per channel.
//!
//! Pixels map to cells of a grid on `[0, π]²`, with image row 0 at the top.
//! A channel `v` becomes the density `(v + f)/S` with floor
//! `f = floor · mean(v)` and `S` the integral of `v + f`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use serde::Serialize;

use super::io::{read_pnm, save_pnm, series_csv, write_text};
use super::{check_well_balanced, decay_fit, label, march, write_summary, ScenarioConfig, ScenarioKind};
use crate::density::{relative_rms_error, DensityField};
use crate::diagnostics::chi2_slices;
use crate::error::{Error, Result};
use crate::generator::build_pi_symmetric;
use crate::mesh::{build_structured_grid, GridTopology, Mesh, Rect, StructuredGrid};
use crate::velocity::{cellular_stream, stream_velocity};

/// Floor and integral used to turn a channel into a unit-mass density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelScale {
    pub floor: f64,
    pub total: f64,
}

/// Channel values in cell order to a unit mass vector. A black channel gets
/// the floor of a one-level mean.
pub fn channel_to_density(values: &[f64], volumes: &[f64], floor: f64) -> Result<(DensityField, ChannelScale)> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let f = floor * if mean > 0.0 { mean } else { 1.0 };
    let total: f64 = values.iter().zip(volumes).map(|(v, c)| (v + f) * c).sum();
    let rho: Vec<f64> = values.iter().map(|v| (v + f) / total).collect();
    let m = DensityField::from_density(&rho, volumes)?;
    Ok((m, ChannelScale { floor: f, total }))
}

/// Inverse of [`channel_to_density`], rounded and clamped to `0..=255`.
pub fn density_to_channel(m: &DensityField, volumes: &[f64], scale: ChannelScale) -> Vec<u8> {
    m.density(volumes)
        .iter()
        .map(|r| (r * scale.total - scale.floor).round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelRun {
    pub well_balanced_residual: f64,
    #[serde(skip)]
    pub rms: Vec<f64>,
    #[serde(skip)]
    pub chi2: Vec<f64>,
    pub final_rms: f64,
    pub decay_rate: Option<f64>,
    pub decay_r_squared: Option<f64>,
    pub mass_error: f64,
    pub min_mass: f64,
    /// Snapshot images of this channel, `(step, pixels)` in row-major order.
    #[serde(skip)]
    pub snapshots: Vec<(usize, Vec<u8>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageRun {
    pub amplitude: f64,
    pub channels: Vec<ChannelRun>,
    /// Mean over channels of the fitted decay rates.
    pub mean_decay_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageReport {
    pub width: usize,
    pub height: usize,
    pub n_channels: usize,
    pub diffusion: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub runs: Vec<ImageRun>,
    pub files: Vec<PathBuf>,
}

/// Channels of `img` in cell order (cell `(ix, iy)` is pixel
/// `(ix, ny − 1 − iy)`).
fn channels(img: &DynamicImage, n_channels: usize, grid: &StructuredGrid) -> Vec<Vec<f64>> {
    let rgb = img.to_rgb8();
    let gray = img.to_luma8();
    (0..n_channels)
        .map(|ch| {
            (0..grid.nx * grid.ny)
                .map(|cell| {
                    let (ix, iy) = grid.cell_coords(cell);
                    let (x, y) = (ix as u32, (grid.ny - 1 - iy) as u32);
                    if n_channels == 1 {
                        gray.get_pixel(x, y).0[0] as f64
                    } else {
                        rgb.get_pixel(x, y).0[ch] as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn assemble(grid: &StructuredGrid, planes: &[&[u8]]) -> DynamicImage {
    let pixel = |ch: usize, x: u32, y: u32| planes[ch][grid.cell_index(x as usize, grid.ny - 1 - y as usize)];
    let (w, h) = (grid.nx as u32, grid.ny as u32);
    if planes.len() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_fn(w, h, |x, y| image::Luma([pixel(0, x, y)])))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([pixel(0, x, y), pixel(1, x, y), pixel(2, x, y)])
        }))
    }
}

/// Runs the transformation of `image_path` (default `cfg.target_image`) from
/// `cfg.start_image`, or from a uniform image when none is given, for each
/// amplitude in `cfg.amplitudes` (default `1000`). Defaults: `D = 0.4`,
/// `Δt = 0.01`, `k = 8`, 2000 steps, floor fraction `0.1`.
pub fn run_image(cfg: &ScenarioConfig, image_path: Option<&Path>) -> Result<ImageReport> {
    cfg.validate()?;
    cfg.expect_kind(ScenarioKind::Image)?;
    if cfg.grid.is_some() || cfg.mesh_file.is_some() {
        return Err(Error::Config(
            "the image scenario takes its grid from the image size".into(),
        ));
    }
    let target_path = image_path
        .or(cfg.target_image.as_deref())
        .ok_or_else(|| Error::Config("image scenario needs a target image".into()))?;
    let target = read_pnm(target_path)?;
    let (w, h) = (target.width() as usize, target.height() as usize);
    let n_channels = if target.color().has_color() { 3 } else { 1 };
    let start = match &cfg.start_image {
        Some(p) => {
            let img = read_pnm(p)?;
            if (img.width() as usize, img.height() as usize) != (w, h) {
                return Err(Error::Image {
                    path: p.clone(),
                    message: format!(
                        "dimension mismatch: start is {}x{}, target is {w}x{h}",
                        img.width(),
                        img.height()
                    ),
                });
            }
            Some(img)
        }
        None => None,
    };

    let d = cfg.diffusion.unwrap_or(0.4);
    let dt = cfg.dt.unwrap_or(0.01);
    let n_steps = cfg.n_steps.unwrap_or(2000);
    let k = cfg.wave_number.unwrap_or(8.0);
    let floor = cfg.floor.unwrap_or(0.1);
    let amplitudes = cfg.amplitudes.clone().unwrap_or_else(|| vec![1000.0]);
    let snaps = cfg.snapshots.clone().unwrap_or_else(|| vec![5, 80, 400, 2000]);
    let out = cfg.out_dir.as_deref();

    let mesh: Mesh = build_structured_grid(Rect::square(0.0, PI), w, h, GridTopology::Noflux)?;
    let grid = mesh.structured().expect("structured").clone();
    let vols = mesh.volumes();
    let target_ch = channels(&target, n_channels, &grid);
    let start_ch = start.as_ref().map(|s| channels(s, n_channels, &grid));

    let mut files = Vec::new();
    let mut runs = Vec::new();
    for &amp in &amplitudes {
        let u = stream_velocity(&mesh, cellular_stream(grid.domain, amp, k))?;
        let mut chans = Vec::with_capacity(n_channels);
        for ch in 0..n_channels {
            let (pi, scale) = channel_to_density(&target_ch[ch], vols, floor)?;
            let m0 = match &start_ch {
                Some(s) => channel_to_density(&s[ch], vols, floor)?.0,
                None => DensityField::uniform(vols),
            };
            let gen = build_pi_symmetric(&mesh, &u, &pi, d)?;
            let wb = check_well_balanced(&gen, &pi)?;
            let pi_rho = pi.density(vols);
            let p = pi.mass();
            let mut rms = Vec::with_capacity(n_steps + 1);
            let mut chi2 = Vec::with_capacity(n_steps + 1);
            let mut rho = vec![0.0; vols.len()];
            let run = march(&gen, &m0, dt, n_steps, &snaps, |_, m| {
                for ((r, m), v) in rho.iter_mut().zip(m).zip(vols) {
                    *r = m / v;
                }
                rms.push(relative_rms_error(&rho, &pi_rho));
                chi2.push(chi2_slices(m, p));
            })?;
            let fit = decay_fit(&rms, dt);
            chans.push(ChannelRun {
                well_balanced_residual: wb,
                final_rms: *rms.last().expect("step 0 recorded"),
                rms,
                chi2,
                decay_rate: fit.map(|f| f.0),
                decay_r_squared: fit.map(|f| f.1),
                mass_error: run.mass_error,
                min_mass: run.min_mass,
                snapshots: run
                    .snapshots
                    .iter()
                    .map(|(s, m)| (*s, density_to_channel(m, vols, scale)))
                    .collect(),
            });
        }

        if let Some(dir) = out {
            let tag = label(amp);
            let ext = if n_channels == 1 { "pgm" } else { "ppm" };
            let names: Vec<String> = match n_channels {
                1 => vec!["rms".into()],
                _ => vec!["rms_r".into(), "rms_g".into(), "rms_b".into()],
            };
            let series: Vec<Vec<f64>> = chans.iter().map(|c| c.rms.clone()).collect();
            files.push(write_text(
                dir,
                &format!("image_A{tag}_rms.csv"),
                &series_csv(&names, &series),
            )?);
            for (k, (step, _)) in chans[0].snapshots.iter().enumerate() {
                let planes: Vec<&[u8]> = chans.iter().map(|c| c.snapshots[k].1.as_slice()).collect();
                let p = dir.join(format!("image_A{tag}_step{step}.{ext}"));
                save_pnm(&p, &assemble(&grid, &planes))?;
                files.push(p);
            }
        }
        let rates: Vec<f64> = chans.iter().filter_map(|c| c.decay_rate).collect();
        runs.push(ImageRun {
            amplitude: amp,
            mean_decay_rate: (rates.len() == chans.len()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
            channels: chans,
        });
    }

    let mut report = ImageReport {
        width: w,
        height: h,
        n_channels,
        diffusion: d,
        dt,
        n_steps,
        runs,
        files: Vec::new(),
    };
    write_summary(out, &report, &mut files)?;
    report.files = files;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x * 255 / w) as u8, (y * 255 / h) as u8, ((x * y) % 200) as u8 + 20])
        })
    }

    fn save(dir: &Path, name: &str, img: DynamicImage) -> PathBuf {
        let p = dir.join(name);
        save_pnm(&p, &img).unwrap();
        p
    }

    #[test]
    fn density_round_trip_is_exact_after_rounding() {
        let values: Vec<f64> = (0..50).map(|k| ((k * 37) % 256) as f64).collect();
        let vols = vec![0.3; 50];
        let (m, scale) = channel_to_density(&values, &vols, 0.1).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-14);
        assert!(m.min() > 0.0);
        let back = density_to_channel(&m, &vols, scale);
        for (b, v) in back.iter().zip(&values) {
            assert_eq!(*b as f64, *v);
        }
        let (black, s) = channel_to_density(&[0.0; 4], &[1.0; 4], 0.1).unwrap();
        assert!(black.min() > 0.0 && s.floor == 0.1);
    }

    #[test]
    fn start_equal_to_target_stays_put() {
        let dir = tempfile::tempdir().unwrap();
        let t = save(dir.path(), "t.ppm", DynamicImage::ImageRgb8(gradient_image(12, 9)));
        let cfg = ScenarioConfig {
            start_image: Some(t.clone()),
            target_image: Some(t.clone()),
            amplitudes: Some(vec![50.0]),
            n_steps: Some(40),
            snapshots: Some(vec![5, 40]),
            out_dir: Some(dir.path().join("out")),
            ..Default::default()
        };
        let r = run_image(&cfg, None).unwrap();
        assert_eq!((r.width, r.height, r.n_channels), (12, 9, 3));
        let snap = read_pnm(&dir.path().join("out/image_A50_step40.ppm"))
            .unwrap()
            .to_rgb8();
        assert_eq!(snap, gradient_image(12, 9));
        for c in &r.runs[0].channels {
            assert!(c.rms.iter().all(|e| *e < 1e-12));
        }
    }

    #[test]
    fn uniform_start_without_flow_decays_monotonically() {
        let dir = tempfile::tempdir().unwrap();
        let g = DynamicImage::ImageLuma8(GrayImage::from_fn(10, 8, |x, y| image::Luma([(x * 20 + y * 5) as u8])));
        let t = save(dir.path(), "t.pgm", g);
        let cfg = ScenarioConfig {
            amplitudes: Some(vec![0.0]),
            n_steps: Some(300),
            ..Default::default()
        };
        let r = run_image(&cfg, Some(&t)).unwrap();
        let c = &r.runs[0].channels[0];
        assert_eq!(r.n_channels, 1);
        assert!(c.chi2.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(c.final_rms < c.rms[0]);
        assert!(c.mass_error < 1e-10 && c.min_mass >= 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = save(dir.path(), "t.ppm", DynamicImage::ImageRgb8(gradient_image(12, 9)));
        let s = save(dir.path(), "s.ppm", DynamicImage::ImageRgb8(gradient_image(9, 12)));
        let cfg = ScenarioConfig {
            start_image: Some(s),
            ..Default::default()
        };
        let err = run_image(&cfg, Some(&t)).unwrap_err();
        assert!(matches!(err, Error::Image { .. }));
        assert!(err.to_string().contains("dimension mismatch"));
    }
}
