//! Analytic target and initial densities on the square `[−4.5, 4.5]²`.

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Rect};

/// Domain both densities are defined on.
pub const BANANA_DOMAIN: Rect = Rect {
    x_min: -4.5,
    x_max: 4.5,
    y_min: -4.5,
    y_max: 4.5,
};

const FLOOR: f64 = 0.1;

fn check_domain(mesh: &Mesh) -> Result<()> {
    let grid = mesh
        .structured()
        .ok_or_else(|| Error::InvalidDomain("expected a structured grid on [-4.5, 4.5]^2".into()))?;
    let d = grid.domain;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    if close(d.x_min, BANANA_DOMAIN.x_min)
        && close(d.x_max, BANANA_DOMAIN.x_max)
        && close(d.y_min, BANANA_DOMAIN.y_min)
        && close(d.y_max, BANANA_DOMAIN.y_max)
    {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!(
            "expected [-4.5, 4.5]^2, got [{}, {}]x[{}, {}]",
            d.x_min, d.x_max, d.y_min, d.y_max
        )))
    }
}

fn evaluate(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Result<DensityField> {
    check_domain(mesh)?;
    let rho: Vec<f64> = (0..mesh.n_cells())
        .map(|c| {
            let p = mesh.center(c);
            f(p[0], p[1])
        })
        .collect();
    DensityField::from_density(&rho, mesh.volumes())?.normalized()
}

/// Unnormalized smiling triple banana: two eyes and a mouth built as smooth
/// minima of ring potentials, plus the floor `0.1`.
pub fn triple_banana(x: f64, y: f64) -> f64 {
    let ring = |cx: f64, cy: f64, r2: f64| {
        let s = (x - cx).powi(2) + (y - cy).powi(2) - r2;
        -20.0 * s * s
    };
    let eye = -10.0 * (y - 2.0).powi(2);
    let mouth = -10.0 * (y + 1.0).powi(2);
    (ring(1.2, 1.2, 0.5) + eye).exp() + (ring(-1.2, 1.2, 0.5) + eye).exp() + (ring(0.0, 0.0, 2.0) + mouth).exp() + FLOOR
}

/// Unnormalized four-bump start density with bumps at `(±3, 0)` and `(0, ±3)`.
pub fn gaussian_mixture(x: f64, y: f64) -> f64 {
    (-16.0 * (x + 3.0).powi(2) - 4.0 * y * y).exp()
        + (-16.0 * (x - 3.0).powi(2) - 4.0 * y * y).exp()
        + (-4.0 * x * x - 16.0 * (y + 3.0).powi(2)).exp()
        + (-4.0 * x * x - 16.0 * (y - 3.0).powi(2)).exp()
        + FLOOR
}

/// Triple-banana target as a unit mass vector.
pub fn triple_banana_density(mesh: &Mesh) -> Result<DensityField> {
    evaluate(mesh, triple_banana)
}

/// Four-Gaussian start as a unit mass vector.
pub fn gaussian_mixture_init(mesh: &Mesh) -> Result<DensityField> {
    evaluate(mesh, gaussian_mixture)
}
