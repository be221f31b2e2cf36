//! CSV dumps and PGM/PPM images for scenario output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, Luma};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, StructuredGrid};

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// CSV `cell_id,x,y,pi` with `pi` as a density (mass over cell volume).
pub fn steady_csv(mesh: &Mesh, pi: &DensityField) -> String {
    cell_csv(mesh, pi, "pi")
}

/// CSV `cell_id,x,y,density`.
pub fn density_csv(mesh: &Mesh, m: &DensityField) -> String {
    cell_csv(mesh, m, "density")
}

fn cell_csv(mesh: &Mesh, m: &DensityField, column: &str) -> String {
    let mut out = format!("cell_id,x,y,{column}\n");
    let rho = m.density(mesh.volumes());
    for (c, r) in rho.iter().enumerate() {
        let p = mesh.center(c);
        let y = p.get(1).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{c},{},{y},{r:e}", p[0]);
    }
    out
}

/// Grayscale picture of a cell field, scaled so the maximum is white. Image
/// row 0 is the top of the domain.
pub fn field_to_gray(grid: &StructuredGrid, values: &[f64]) -> GrayImage {
    let max = values.iter().fold(0.0f64, |a, v| a.max(*v));
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    GrayImage::from_fn(grid.nx as u32, grid.ny as u32, |x, y| {
        let iy = grid.ny - 1 - y as usize;
        let v = values[grid.cell_index(x as usize, iy)] * scale;
        Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}

/// Writes the density of `m` as a PGM.
pub fn write_density_pgm(path: &Path, mesh: &Mesh, m: &DensityField) -> Result<()> {
    let grid = mesh
        .structured()
        .ok_or_else(|| image_error(path, "density images need a structured grid"))?;
    save_pnm(
        path,
        &DynamicImage::ImageLuma8(field_to_gray(grid, &m.density(mesh.volumes()))),
    )
}

/// Binary PGM for grayscale images, PPM for RGB.
pub fn save_pnm(path: &Path, img: &DynamicImage) -> Result<()> {
    img.save_with_format(path, ImageFormat::Pnm)
        .map_err(|e| image_error(path, e))
}

pub fn read_pnm(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|e| image_error(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).map_err(|e| image_error(path, e))
}

/// Writes `text` under `dir`, creating the directory, and returns the path.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// CSV with a `step` column followed by one column per series.
pub fn series_csv(names: &[String], series: &[Vec<f64>]) -> String {
    let mut out = String::from("step");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..len {
        let _ = write!(out, "{k}");
        for s in series {
            match s.get(k) {
                Some(v) => {
                    let _ = write!(out, ",{v:e}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
