//! Per-cell probability mass `m_i = ρ_i |C_i|`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    mass: Vec<f64>,
}

impl DensityField {
    /// Wraps a mass vector. Entries must be finite and nonnegative; the total
    /// is left as given.
    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        if let Some(i) = mass.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "mass {} at cell {i} is negative or non-finite",
                mass[i]
            )));
        }
        Ok(Self { mass })
    }

    /// Mass vector `ρ_i |C_i|`, not normalized.
    pub fn from_density(density: &[f64], volumes: &[f64]) -> Result<Self> {
        if density.len() != volumes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} density values for {} cells",
                density.len(),
                volumes.len()
            )));
        }
        Self::from_mass(density.iter().zip(volumes).map(|(r, v)| r * v).collect())
    }

    /// Uniform density over the cells, normalized to unit mass.
    pub fn uniform(volumes: &[f64]) -> Self {
        let total: f64 = volumes.iter().sum();
        Self {
            mass: volumes.iter().map(|v| v / total).collect(),
        }
    }

    /// Unit mass on one cell.
    pub fn point(n: usize, cell: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[cell] = 1.0;
        Self { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    /// Compensated (Neumaier) sum of the masses.
    pub fn total(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &m in &self.mass {
            let t = sum + m;
            comp += if sum.abs() >= m.abs() {
                (sum - t) + m
            } else {
                (m - t) + sum
            };
            sum = t;
        }
        sum + comp
    }

    pub fn min(&self) -> f64 {
        self.mass.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `ρ_i = m_i / |C_i|`.
    pub fn density(&self, volumes: &[f64]) -> Vec<f64> {
        self.mass.iter().zip(volumes).map(|(m, v)| m / v).collect()
    }

    /// Rescales to unit total mass.
    pub fn normalized(mut self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!("cannot normalize total mass {total}")));
        }
        for m in &mut self.mass {
            *m /= total;
        }
        Ok(self)
    }

    /// Errors unless every entry is strictly positive.
    pub fn require_positive(&self) -> Result<()> {
        match self.mass.iter().position(|m| !(*m > 0.0)) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidMeasure(format!(
                "entry {} at cell {i} is not strictly positive",
                self.mass[i]
            ))),
        }
    }

    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        l1_distance(&self.mass, &other.mass)
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `‖ρ − π‖₂ / ‖π‖₂` over cells, on densities.
pub fn relative_rms_error(rho: &[f64], pi: &[f64]) -> f64 {
    let num: f64 = rho.iter().zip(pi).map(|(r, p)| (r - p) * (r - p)).sum();
    let den: f64 = pi.iter().map(|p| p * p).sum();
    (num / den).sqrt()
}
