//! Generic runs on any configured mesh and drift: steady state, trajectory,
//! and Gillespie sampling.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use super::io::{density_csv, steady_csv, write_density_pgm, write_text};
use super::{write_summary, ScenarioConfig, ScenarioKind};
use crate::density::DensityField;
use crate::diagnostics::entropy_production;
use crate::error::Result;
use crate::generator::{jump_chain, Generator};
use crate::integrator::{choose_stabilizer, evolve, standard_probes, StepperConfig};
use crate::mesh::Mesh;
use crate::randomwalk::{ensemble, occupation_measure, paths_csv, sample_state, total_variation};
use crate::steady::{estimate_gap, steady_direct, steady_power, SteadyResult, DEFAULT_DIRECT_CAP};

fn setup(cfg: &ScenarioConfig) -> Result<(Mesh, Generator)> {
    cfg.validate()?;
    cfg.expect_kind(ScenarioKind::Custom)?;
    let mesh = cfg.any_mesh()?;
    let gen = cfg.drift_generator(&mesh, 1.0)?;
    Ok((mesh, gen))
}

/// Dense solve up to the default cap, power iteration above it.
fn solve(cfg: &ScenarioConfig, gen: &Generator) -> Result<(SteadyResult, &'static str)> {
    if gen.n() <= DEFAULT_DIRECT_CAP {
        Ok((steady_direct(gen)?, "direct"))
    } else {
        let r = steady_power(
            gen,
            cfg.dt.unwrap_or(1.0),
            cfg.tol.unwrap_or(1e-10),
            cfg.max_iter.unwrap_or(2_000_000),
        )?;
        Ok((r, "power"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    pub n_cells: usize,
    pub method: &'static str,
    pub residual: f64,
    pub iterations: usize,
    pub entropy_production: f64,
    /// `1 − |μ₂|` of the step at `Δt = 1`, when the estimate settles.
    pub spectral_gap: Option<f64>,
    #[serde(skip)]
    pub steady: DensityField,
    pub files: Vec<PathBuf>,
}

/// Steady state of the configured generator with its entropy production and
/// spectral gap; writes `steady.csv`, `steady.pgm` and `generator.txt`.
pub fn run_steady(cfg: &ScenarioConfig) -> Result<SteadyReport> {
    let (mesh, gen) = setup(cfg)?;
    let (res, method) = solve(cfg, &gen)?;
    let pi = res.pi_inf;
    let ep = entropy_production(&gen, &pi)?.total;
    let gap = estimate_gap(&gen, &pi, 1.0, choose_stabilizer(&gen), 200_000)
        .ok()
        .map(|g| g.gap);
    let mut files = Vec::new();
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        files.push(write_text(dir, "steady.csv", &steady_csv(&mesh, &pi))?);
        files.push(write_text(dir, "generator.txt", &gen.to_sparse_text())?);
        if mesh.structured().is_some() {
            let p = dir.join("steady.pgm");
            write_density_pgm(&p, &mesh, &pi)?;
            files.push(p);
        }
    }
    let mut report = SteadyReport {
        n_cells: gen.n(),
        method,
        residual: res.residual,
        iterations: res.iterations,
        entropy_production: ep,
        spectral_gap: gap,
        steady: pi,
        files: Vec::new(),
    };
    write_summary(out, &report, &mut files)?;
    report.files = files;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkReport {
    pub paths: usize,
    pub horizon: f64,
    pub total_time: f64,
    pub n_jumps: usize,
    pub seed: u64,
    /// Total variation between the occupation measure and the steady state.
    pub total_variation: f64,
    #[serde(skip)]
    pub occupation: DensityField,
    #[serde(skip)]
    pub steady: DensityField,
    pub files: Vec<PathBuf>,
}

/// Gillespie ensemble of the configured generator, started from its steady
/// state. `paths` defaults to 100 and the total simulated time to
/// `10⁵ / max_i λ_i`, split evenly unless `horizon` is given per path.
pub fn run_walk(cfg: &ScenarioConfig) -> Result<WalkReport> {
    let (mesh, gen) = setup(cfg)?;
    let (res, _) = solve(cfg, &gen)?;
    let pi = res.pi_inf;
    let chain = jump_chain(&gen);
    let count = cfg.paths.unwrap_or(100);
    let horizon = cfg
        .horizon
        .unwrap_or(1e5 / gen.max_exit_rate().max(f64::MIN_POSITIVE) / count as f64);
    let seed = cfg.seed.unwrap_or(0);
    let paths = ensemble(&chain, count, horizon, seed, |_, rng| sample_state(pi.mass(), rng))?;
    let occ = occupation_measure(&paths, gen.n())?;
    let tv = total_variation(occ.mass(), pi.mass());
    let mut files = Vec::new();
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        files.push(write_text(dir, "paths.csv", &paths_csv(&paths))?);
        let mut text = String::from("cell_id,occupation,pi\n");
        for (c, (o, p)) in occ.mass().iter().zip(pi.mass()).enumerate() {
            let _ = writeln!(text, "{c},{o:e},{p:e}");
        }
        files.push(write_text(dir, "occupation.csv", &text)?);
        if mesh.structured().is_some() {
            let p = dir.join("occupation.pgm");
            write_density_pgm(&p, &mesh, &occ)?;
            files.push(p);
        }
    }
    let mut report = WalkReport {
        paths: count,
        horizon,
        total_time: horizon * count as f64,
        n_jumps: paths.iter().map(|p| p.n_jumps()).sum(),
        seed,
        total_variation: tv,
        occupation: occ,
        steady: pi,
        files: Vec::new(),
    };
    write_summary(out, &report, &mut files)?;
    report.files = files;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CustomReport {
    pub n_cells: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub final_chi2: f64,
    pub mass_error: f64,
    pub min_mass: f64,
    pub files: Vec<PathBuf>,
}

/// Evolves the uniform density under the configured generator, recording the
/// standard probe columns; writes `trajectory.csv` and `final.csv`.
pub fn run_custom(cfg: &ScenarioConfig) -> Result<CustomReport> {
    let (mesh, gen) = setup(cfg)?;
    let (res, _) = solve(cfg, &gen)?;
    let pi = res.pi_inf;
    let dt = cfg.dt.unwrap_or(0.01);
    let n_steps = cfg.n_steps.unwrap_or(1000);
    let m0 = DensityField::uniform(mesh.volumes());
    let step_cfg = StepperConfig::for_generator(&gen, dt, n_steps, n_steps);
    let mut probes = standard_probes(&gen, &pi);
    let traj = evolve(&m0, &gen, &step_cfg, &mut probes)?;
    let col = |name: &str| traj.column(name).expect("standard probe");
    let mass = col("mass_total");
    let mass_error = mass.iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
    let min_mass = col("min_density").into_iter().fold(f64::INFINITY, f64::min);
    let mut files = Vec::new();
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        files.push(write_text(dir, "trajectory.csv", &traj.to_csv())?);
        files.push(write_text(dir, "final.csv", &density_csv(&mesh, traj.final_state()))?);
    }
    let mut report = CustomReport {
        n_cells: gen.n(),
        n_steps,
        dt,
        final_chi2: *col("chi2").last().expect("step 0 recorded"),
        mass_error,
        min_mass,
        files: Vec::new(),
    };
    write_summary(out, &report, &mut files)?;
    report.files = files;
    Ok(report)
}
