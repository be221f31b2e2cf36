//! Configured pipelines: mixture-enhanced sampling of a target density,
//! image transformation in a cellular flow, the stochastic Van der Pol
//! oscillator, and generic steady-state and random-walk runs.
//!
//! Every run is described by a [`ScenarioConfig`] read from JSON. Unset
//! fields fall back to per-scenario defaults; desk-scale defaults halve the
//! grid unless `full_scale` is set.

mod densities;
pub mod io;
mod picture;
mod sampling;
mod tools;
mod vdp;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::fit::{fit_decay_window, fit_exponential};
use crate::generator::{build_b_scheme, build_upwind, BFunction, Generator};
use crate::integrator::{choose_stabilizer, Stepper};
use crate::mesh::{build_structured_grid, load_mesh, GridTopology, Mesh, Rect};
use crate::velocity::FlowSpec;

pub use densities::{gaussian_mixture, gaussian_mixture_init, triple_banana, triple_banana_density, BANANA_DOMAIN};
pub use picture::{channel_to_density, density_to_channel, run_image, ChannelRun, ChannelScale, ImageReport, ImageRun};
pub use sampling::{run_sampling, SamplingReport, SamplingRun};
pub use tools::{run_custom, run_steady, run_walk, CustomReport, SteadyReport, WalkReport};
pub use vdp::{run_vdp, VdpReport, VDP_DOMAIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Sample,
    Image,
    Vdp,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    Upwind,
    ScharfetterGummel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `[x_min, x_max, y_min, y_max]`.
    #[serde(default)]
    pub domain: Option<[f64; 4]>,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub topology: Option<GridTopology>,
}

/// JSON run description. All fields are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<ScenarioKind>,
    pub grid: Option<GridSpec>,
    pub mesh_file: Option<PathBuf>,
    pub diffusion: Option<f64>,
    pub dt: Option<f64>,
    pub n_steps: Option<usize>,
    /// Steps at which density snapshots are written.
    pub snapshots: Option<Vec<usize>>,
    /// Mixture amplitudes `A` to sweep.
    pub amplitudes: Option<Vec<f64>>,
    pub wave_number: Option<f64>,
    pub flow: Option<FlowSpec>,
    pub scheme: Option<SchemeChoice>,
    /// Image runs: floor as a fraction of the channel mean.
    pub floor: Option<f64>,
    pub start_image: Option<PathBuf>,
    pub target_image: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub paths: Option<usize>,
    pub horizon: Option<f64>,
    pub full_scale: bool,
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => Err(Error::Config(format!("{name} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; relative input paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.mesh_file, &mut cfg.start_image, &mut cfg.target_image]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("diffusion", self.diffusion)?;
        positive("dt", self.dt)?;
        positive("wave_number", self.wave_number)?;
        positive("floor", self.floor)?;
        positive("tol", self.tol)?;
        positive("horizon", self.horizon)?;
        if let Some(a) = &self.amplitudes {
            if a.is_empty() {
                return Err(Error::Config("amplitudes must not be empty".into()));
            }
            if let Some(x) = a.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("amplitudes must be nonnegative, got {x}")));
            }
        }
        if self.n_steps == Some(0) {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if self.max_iter == Some(0) {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.paths == Some(0) {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        if let Some(g) = &self.grid {
            if g.nx == 0 || g.ny == 0 {
                return Err(Error::Config("grid needs at least one cell per direction".into()));
            }
            if let Some([x0, x1, y0, y1]) = g.domain {
                if !(x1 > x0) || !(y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
                    return Err(Error::Config(format!("empty grid domain [{x0}, {x1}]x[{y0}, {y1}]")));
                }
            }
        }
        if self.grid.is_some() && self.mesh_file.is_some() {
            return Err(Error::Config("give either grid or mesh_file, not both".into()));
        }
        if let Some(flow) = &self.flow {
            let ok = match *flow {
                FlowSpec::Zero => true,
                FlowSpec::Constant { ux, uy } => ux.is_finite() && uy.is_finite(),
                FlowSpec::Vdp { alpha, delta } => alpha.is_finite() && delta.is_finite(),
                FlowSpec::Cellular { amplitude, k } => amplitude.is_finite() && k.is_finite(),
            };
            if !ok {
                return Err(Error::Config("flow parameters must be finite".into()));
            }
        }
        Ok(())
    }

    /// Errors unless the config is unlabeled or labeled `kind`.
    pub fn expect_kind(&self, kind: ScenarioKind) -> Result<()> {
        match self.scenario {
            Some(k) if k != kind => Err(Error::Config(format!(
                "config is for scenario {k:?}, expected {kind:?}"
            ))),
            _ => Ok(()),
        }
    }

    /// Structured grid from `grid`, else `domain` at the desk or full size.
    pub(crate) fn structured_mesh(
        &self,
        domain: Rect,
        desk: (usize, usize),
        full: (usize, usize),
        topology: GridTopology,
    ) -> Result<Mesh> {
        if self.mesh_file.is_some() {
            return Err(Error::Config(
                "this scenario needs a structured grid, not a mesh file".into(),
            ));
        }
        match &self.grid {
            Some(g) => {
                let domain = g.domain.map(|[a, b, c, d]| Rect::new(a, b, c, d)).unwrap_or(domain);
                build_structured_grid(domain, g.nx, g.ny, g.topology.unwrap_or(topology))
            }
            None => {
                let (nx, ny) = if self.full_scale { full } else { desk };
                build_structured_grid(domain, nx, ny, topology)
            }
        }
    }

    /// Mesh from `mesh_file` or `grid`; one of them must be given.
    pub(crate) fn any_mesh(&self) -> Result<Mesh> {
        if let Some(path) = &self.mesh_file {
            return load_mesh(path);
        }
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("either grid or mesh_file is required".into()))?;
        let domain = g
            .domain
            .map(|[a, b, c, d]| Rect::new(a, b, c, d))
            .unwrap_or(Rect::square(0.0, 1.0));
        build_structured_grid(domain, g.nx, g.ny, g.topology.unwrap_or(GridTopology::Noflux))
    }

    /// Upwind or Scharfetter–Gummel generator for `flow` (default zero).
    pub(crate) fn drift_generator(&self, mesh: &Mesh, default_d: f64) -> Result<Generator> {
        let drift = self.flow.unwrap_or(FlowSpec::Zero).face_field(mesh)?;
        let d = self.diffusion.unwrap_or(default_d);
        match self.scheme.unwrap_or(SchemeChoice::Upwind) {
            SchemeChoice::Upwind => build_upwind(mesh, &drift, d),
            SchemeChoice::ScharfetterGummel => build_b_scheme(mesh, &drift, d, BFunction::ScharfetterGummel),
        }
    }
}

/// `‖Q*π‖_∞ / ‖Q‖_∞` for a mass vector `π`, with `‖Q‖_∞ = 2 max_i λ_i`.
pub fn well_balanced_residual(gen: &Generator, pi: &DensityField) -> f64 {
    let r = gen.forward_vec(pi.mass());
    let num = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let den = 2.0 * gen.max_exit_rate();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Errors with [`Error::NotWellBalanced`] unless `Q*π` vanishes to `1e-12`
/// relative to `‖Q‖_∞`.
pub fn check_well_balanced(gen: &Generator, pi: &DensityField) -> Result<f64> {
    let rel = well_balanced_residual(gen, pi);
    if rel < 1e-12 {
        Ok(rel)
    } else {
        Err(Error::NotWellBalanced {
            residual: rel,
            tolerance: 1e-12,
        })
    }
}

/// How concentrated a mass vector is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concentration {
    /// Mass held by the densest 20% of cells.
    pub top20_mass: f64,
    /// Smallest number of densest cells holding 60% of the mass.
    pub support60: usize,
}

pub fn concentration(m: &DensityField, volumes: &[f64]) -> Concentration {
    let rho = m.density(volumes);
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]));
    let mass = m.mass();
    let total = m.total();
    let top = (rho.len() as f64 * 0.2).ceil() as usize;
    let top20_mass = order[..top].iter().map(|&c| mass[c]).sum::<f64>() / total;
    let mut acc = 0.0;
    let mut support60 = rho.len();
    for (k, &c) in order.iter().enumerate() {
        acc += mass[c];
        if acc >= 0.6 * total {
            support60 = k + 1;
            break;
        }
    }
    Concentration { top20_mass, support60 }
}

/// Result of [`march`].
#[derive(Debug, Clone)]
pub(crate) struct March {
    pub snapshots: Vec<(usize, DensityField)>,
    /// Largest `|Σm − Σm0|` seen.
    pub mass_error: f64,
    /// Smallest entry seen.
    pub min_mass: f64,
}

/// Steps `K̃*` from `m0`, calling `observe(step, m)` at step 0 and after every
/// step and keeping the listed snapshots.
pub(crate) fn march(
    gen: &Generator,
    m0: &DensityField,
    dt: f64,
    n_steps: usize,
    snapshot_steps: &[usize],
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<March> {
    let mut stepper = Stepper::new(gen, dt, choose_stabilizer(gen))?;
    let mut m = m0.mass().to_vec();
    let total0 = m0.total();
    let mut snapshots = Vec::new();
    let mut mass_error = 0.0f64;
    let mut min_mass = m0.min();
    if snapshot_steps.contains(&0) {
        snapshots.push((0, m0.clone()));
    }
    observe(0, &m);
    for step in 1..=n_steps {
        stepper.step(&mut m);
        let (mut sum, mut min) = (0.0, f64::INFINITY);
        for v in &m {
            sum += v;
            min = min.min(*v);
        }
        mass_error = mass_error.max((sum - total0).abs());
        min_mass = min_mass.min(min);
        observe(step, &m);
        if snapshot_steps.contains(&step) {
            snapshots.push((step, DensityField::from_mass(m.clone())?));
        }
    }
    Ok(March {
        snapshots,
        mass_error,
        min_mass,
    })
}

/// Writes `summary.json` if an output directory is configured.
pub(crate) fn write_summary(out: Option<&Path>, summary: &impl Serialize, files: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        let text = serde_json::to_string_pretty(summary)?;
        files.push(io::write_text(dir, "summary.json", &text)?);
    }
    Ok(())
}

/// Decay rate and R² of an error series sampled every `dt`: the post-transient
/// window fit when the series drops below 10% of its start, otherwise a fit
/// over its second half.
pub(crate) fn decay_fit(series: &[f64], dt: f64) -> Option<(f64, f64)> {
    let times: Vec<f64> = (0..series.len()).map(|s| s as f64 * dt).collect();
    let fit = fit_decay_window(&times, series, 0.1, 1e-10)
        .map(|(f, _)| f)
        .or_else(|| {
            let h = series.len() / 2;
            fit_exponential(&times[h..], &series[h..])
        })?;
    Some((-fit.slope, fit.r_squared))
}

/// Decimal label used in file names, e.g. `0.1` → `0.1`, `1000` → `1000`.
pub(crate) fn label(x: f64) -> String {
    format!("{x}")
}
