//! Face-normal drift and incompressible velocity fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Rect};

/// One scalar per canonical face `i → j` (`i < j`). The value for the reverse
/// orientation is the negation, so antisymmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    values: Vec<f64>,
}

impl FaceField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_faces: usize) -> Self {
        Self::new(vec![0.0; n_faces])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on face `f` in its canonical orientation.
    pub fn value(&self, f: usize) -> f64 {
        self.values[f]
    }

    /// Value on face `f` seen from `from`, which must be one of its cells.
    pub fn oriented(&self, mesh: &Mesh, f: usize, from: usize) -> f64 {
        let face = mesh.face(f);
        debug_assert!(from == face.i || from == face.j);
        if from == face.i {
            self.values[f]
        } else {
            -self.values[f]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Positive and negative parts for the canonical orientation. For the reverse
/// orientation the roles swap: `v⁻_ji = v⁺_ij`.
pub fn split_pm(field: &FaceField) -> (FaceField, FaceField) {
    let plus = field.values.iter().map(|&v| v.max(0.0)).collect();
    let minus = field.values.iter().map(|&v| (-v).max(0.0)).collect();
    (FaceField::new(plus), FaceField::new(minus))
}

/// Samples `b·n` at each face's evaluation point (see [`Mesh::face_point`]).
pub fn sample_drift<F, V>(mesh: &Mesh, b: F) -> Result<FaceField>
where
    F: Fn(&[f64]) -> V,
    V: AsRef<[f64]>,
{
    let mut values = Vec::with_capacity(mesh.n_faces());
    for f in 0..mesh.n_faces() {
        let drift = b(mesh.face_point(f));
        let drift = drift.as_ref();
        let normal = mesh.normal(f);
        if drift.len() != normal.len() {
            return Err(Error::Evaluation {
                face: f,
                message: format!(
                    "drift has {} components, mesh dimension is {}",
                    drift.len(),
                    normal.len()
                ),
            });
        }
        let v: f64 = drift.iter().zip(normal).map(|(a, n)| a * n).sum();
        if !v.is_finite() {
            return Err(Error::Evaluation {
                face: f,
                message: format!("non-finite normal drift {v}"),
            });
        }
        values.push(v);
    }
    Ok(FaceField::new(values))
}

/// Discrete velocity `(ψ(β) − ψ(α))/|Γ|` from a stream function, where
/// `α → β` runs counterclockwise around the face's first cell. This is the
/// field `u = (∂_y ψ, −∂_x ψ)`.
///
/// ψ is evaluated once per lattice corner (wrapped on periodic grids), so the
/// per-cell sums telescope and the field is discretely divergence-free on
/// periodic grids, and on no-flux grids whenever ψ is constant on the walls.
pub fn stream_velocity<F>(mesh: &Mesh, psi: F) -> Result<FaceField>
where
    F: Fn(f64, f64) -> f64,
{
    let grid = mesh
        .structured()
        .ok_or_else(|| Error::UnsupportedTopology("stream-function velocity needs a structured 2D grid".into()))?;
    let cx_count = grid.nx + 1;
    let mut corner_psi = vec![0.0; cx_count * (grid.ny + 1)];
    for cy in 0..=grid.ny {
        for cx in 0..=grid.nx {
            let [x, y] = grid.corner(cx, cy);
            corner_psi[cy * cx_count + cx] = psi(x, y);
        }
    }
    let mut values = Vec::with_capacity(mesh.n_faces());
    for f in 0..mesh.n_faces() {
        let [(ax, ay), (bx, by)] = mesh.corner_segment(f).expect("structured meshes carry corner segments");
        let pa = corner_psi[ay * cx_count + ax];
        let pb = corner_psi[by * cx_count + bx];
        let v = (pb - pa) / mesh.face(f).area;
        if !v.is_finite() {
            return Err(Error::Evaluation {
                face: f,
                message: format!("non-finite stream velocity {v}"),
            });
        }
        values.push(v);
    }
    Ok(FaceField::new(values))
}

/// Per-cell net outflow `Σ_{j∈VF(i)} |Γ_ij| (u·n)_ij`.
pub fn discrete_divergence(mesh: &Mesh, field: &FaceField) -> Vec<f64> {
    let mut div = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let flux = face.area * field.value(f);
        div[face.i] += flux;
        div[face.j] -= flux;
    }
    div
}

/// `A sin(kπ(x−a)/(b−a)) sin(kπ(y−c)/(d−c))`, the cellular mixing flow.
pub fn cellular_stream(domain: Rect, amplitude: f64, k: f64) -> impl Fn(f64, f64) -> f64 {
    let wx = k * std::f64::consts::PI / domain.width();
    let wy = k * std::f64::consts::PI / domain.height();
    move |x, y| amplitude * (wx * (x - domain.x_min)).sin() * (wy * (y - domain.y_min)).sin()
}

/// Drift of the stochastic Van der Pol oscillator,
/// `(α(x − x³/3 + y), δ − x)`.
pub fn vdp_drift(alpha: f64, delta: f64) -> impl Fn(&[f64]) -> [f64; 2] {
    move |p| {
        let (x, y) = (p[0], p[1]);
        [alpha * (x - x * x * x / 3.0 + y), delta - x]
    }
}

/// Named flows selectable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowSpec {
    Zero,
    Constant { ux: f64, uy: f64 },
    Vdp { alpha: f64, delta: f64 },
    Cellular { amplitude: f64, k: f64 },
}

impl FlowSpec {
    /// Face field on a 2D mesh. `Cellular` goes through [`stream_velocity`]
    /// with the mesh's own domain; the others are sampled pointwise.
    pub fn face_field(&self, mesh: &Mesh) -> Result<FaceField> {
        match *self {
            FlowSpec::Zero => Ok(FaceField::zeros(mesh.n_faces())),
            FlowSpec::Constant { ux, uy } => sample_drift(mesh, move |_: &[f64]| [ux, uy]),
            FlowSpec::Vdp { alpha, delta } => sample_drift(mesh, vdp_drift(alpha, delta)),
            FlowSpec::Cellular { amplitude, k } => {
                let grid = mesh
                    .structured()
                    .ok_or_else(|| Error::UnsupportedTopology("cellular flow needs a structured grid".into()))?;
                stream_velocity(mesh, cellular_stream(grid.domain, amplitude, k))
            }
        }
    }
}
