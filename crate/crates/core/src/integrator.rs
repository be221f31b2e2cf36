//! Time stepping of mass vectors.
//!
//! The production step is the Markov operator `K̃* = I + Δt Q*/(1 + aΔt)`,
//! which keeps masses nonnegative and conserves total mass for every `Δt > 0`
//! once `a > max_i λ_i`. A classical four-stage step on `dm/dt = Q*m` is
//! provided for checking semi-discrete identities at small `Δt`.

use std::fmt::Write as _;
use std::io;

use crate::density::{l1_distance, DensityField};
use crate::diagnostics::{chi2_slices, dirichlet_slices};
use crate::error::{Error, Result};
use crate::generator::Generator;

/// `a = 1.01 · max_i λ_i`, or `1` for an all-zero generator.
pub fn choose_stabilizer(gen: &Generator) -> f64 {
    let max = gen.max_exit_rate();
    if max > 0.0 {
        1.01 * max
    } else {
        1.0
    }
}

fn check_step(gen: &Generator, dt: f64, a: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let max = gen.max_exit_rate();
    if !(a > max) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "stabilizer {a} must exceed the largest exit rate {max}"
        )));
    }
    Ok(())
}

/// Reusable `K̃*` applier holding the scratch buffer.
#[derive(Debug, Clone)]
pub struct Stepper<'g> {
    gen: &'g Generator,
    c: f64,
    buf: Vec<f64>,
}

impl<'g> Stepper<'g> {
    pub fn new(gen: &'g Generator, dt: f64, a: f64) -> Result<Self> {
        check_step(gen, dt, a)?;
        Ok(Self {
            gen,
            c: dt / (1.0 + a * dt),
            buf: vec![0.0; gen.n()],
        })
    }

    /// Effective coefficient `Δt/(1 + aΔt)` multiplying `Q*`.
    pub fn coefficient(&self) -> f64 {
        self.c
    }

    /// `m ← m + c Q*m`, evaluated as `m_i(1 − cλ_i) + c Σ_j Q_ji m_j` so every
    /// term is nonnegative.
    pub fn step(&mut self, m: &mut Vec<f64>) {
        let c = self.c;
        let lambda = self.gen.exit_rates();
        for i in 0..m.len() {
            let gain: f64 = self.gen.incoming(i).map(|(j, q)| q * m[j]).sum();
            self.buf[i] = m[i] * (1.0 - c * lambda[i]) + c * gain;
        }
        std::mem::swap(m, &mut self.buf);
    }
}

/// One step of `K̃*`.
pub fn step_unconditional(m: &DensityField, gen: &Generator, dt: f64, a: f64) -> Result<DensityField> {
    if m.len() != gen.n() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries, generator has {} states",
            m.len(),
            gen.n()
        )));
    }
    let mut stepper = Stepper::new(gen, dt, a)?;
    let mut v = m.mass().to_vec();
    stepper.step(&mut v);
    DensityField::from_mass(v)
}

/// Classical RK4 step on `dm/dt = Q*m`. Requires `dt < 0.5 / max_i λ_i`.
/// The result is a raw mass vector; positivity is not guaranteed.
pub fn step_reference(m: &[f64], gen: &Generator, dt: f64) -> Result<Vec<f64>> {
    let max = gen.max_exit_rate();
    if !(dt > 0.0) || dt * max >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "reference step {dt} outside the stability guard 0 < dt < 0.5/{max}"
        )));
    }
    if m.len() != gen.n() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries, generator has {} states",
            m.len(),
            gen.n()
        )));
    }
    let n = m.len();
    let k1 = gen.forward_vec(m);
    let stage = |k: &[f64], h: f64| -> Vec<f64> { (0..n).map(|i| m[i] + h * k[i]).collect() };
    let k2 = gen.forward_vec(&stage(&k1, 0.5 * dt));
    let k3 = gen.forward_vec(&stage(&k2, 0.5 * dt));
    let k4 = gen.forward_vec(&stage(&k3, dt));
    Ok((0..n)
        .map(|i| m[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub a: f64,
    pub n_steps: usize,
    pub record_every: usize,
}

impl StepperConfig {
    /// Config with the default stabilizer for `gen`.
    pub fn for_generator(gen: &Generator, dt: f64, n_steps: usize, record_every: usize) -> Self {
        Self {
            dt,
            a: choose_stabilizer(gen),
            n_steps,
            record_every,
        }
    }
}

/// Scalar observable evaluated on the mass vector after every step.
pub trait Probe {
    fn name(&self) -> &str;
    fn observe(&mut self, step: usize, time: f64, mass: &[f64]) -> std::result::Result<f64, String>;
}

/// `χ²` against a fixed steady mass vector.
pub struct Chi2Probe {
    pi: Vec<f64>,
}

/// `ℓ¹` distance to a fixed steady mass vector.
pub struct L1Probe {
    pi: Vec<f64>,
}

pub struct DirichletProbe<'g> {
    gen: &'g Generator,
    pi: Vec<f64>,
}

pub struct MassProbe;

/// Smallest density `m_i/|C_i|`.
pub struct MinDensityProbe {
    volumes: Vec<f64>,
}

impl Chi2Probe {
    pub fn new(pi: &DensityField) -> Self {
        Self { pi: pi.mass().to_vec() }
    }
}

impl L1Probe {
    pub fn new(pi: &DensityField) -> Self {
        Self { pi: pi.mass().to_vec() }
    }
}

impl<'g> DirichletProbe<'g> {
    pub fn new(gen: &'g Generator, pi: &DensityField) -> Self {
        Self {
            gen,
            pi: pi.mass().to_vec(),
        }
    }
}

impl MinDensityProbe {
    pub fn new(volumes: &[f64]) -> Self {
        Self {
            volumes: volumes.to_vec(),
        }
    }
}

fn finite(name: &str, v: f64) -> std::result::Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} is not finite"))
    }
}

impl Probe for Chi2Probe {
    fn name(&self) -> &str {
        "chi2"
    }
    fn observe(&mut self, _: usize, _: f64, mass: &[f64]) -> std::result::Result<f64, String> {
        finite("chi2", chi2_slices(mass, &self.pi))
    }
}

impl Probe for L1Probe {
    fn name(&self) -> &str {
        "l1_to_steady"
    }
    fn observe(&mut self, _: usize, _: f64, mass: &[f64]) -> std::result::Result<f64, String> {
        finite("l1 distance", l1_distance(mass, &self.pi))
    }
}

impl Probe for DirichletProbe<'_> {
    fn name(&self) -> &str {
        "dirichlet"
    }
    fn observe(&mut self, _: usize, _: f64, mass: &[f64]) -> std::result::Result<f64, String> {
        finite("dirichlet form", dirichlet_slices(self.gen, mass, &self.pi))
    }
}

impl Probe for MassProbe {
    fn name(&self) -> &str {
        "mass_total"
    }
    fn observe(&mut self, _: usize, _: f64, mass: &[f64]) -> std::result::Result<f64, String> {
        finite("total mass", mass.iter().sum())
    }
}

impl Probe for MinDensityProbe {
    fn name(&self) -> &str {
        "min_density"
    }
    fn observe(&mut self, _: usize, _: f64, mass: &[f64]) -> std::result::Result<f64, String> {
        let min = mass
            .iter()
            .zip(&self.volumes)
            .map(|(m, v)| m / v)
            .fold(f64::INFINITY, f64::min);
        Ok(min)
    }
}

/// The probe set behind the standard CSV columns
/// `chi2,l1_to_steady,dirichlet,mass_total,min_density`.
pub fn standard_probes<'g>(gen: &'g Generator, pi: &DensityField) -> Vec<Box<dyn Probe + 'g>> {
    vec![
        Box::new(Chi2Probe::new(pi)),
        Box::new(L1Probe::new(pi)),
        Box::new(DirichletProbe::new(gen, pi)),
        Box::new(MassProbe),
        Box::new(MinDensityProbe::new(gen.volumes())),
    ]
}

/// Dense probe series (one row per step, starting at step 0) and sparse mass
/// snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub probe_names: Vec<String>,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub series: Vec<Vec<f64>>,
    pub snapshots: Vec<(usize, f64, DensityField)>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityField {
        &self.snapshots.last().expect("trajectory always holds m0").2
    }

    /// Values of one probe over time.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.probe_names.iter().position(|n| n == name)?;
        Some(self.series.iter().map(|row| row[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,time");
        for n in &self.probe_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for ((step, time), row) in self.steps.iter().zip(&self.times).zip(&self.series) {
            let _ = write!(out, "{step},{time}");
            for v in row {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, mut w: impl io::Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Runs `cfg.n_steps` steps of `K̃*` from `m0`, evaluating every probe after
/// each step and keeping a snapshot every `record_every` steps (and at the
/// end).
pub fn evolve(
    m0: &DensityField,
    gen: &Generator,
    cfg: &StepperConfig,
    probes: &mut [Box<dyn Probe + '_>],
) -> Result<Trajectory> {
    if cfg.record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    if m0.len() != gen.n() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, generator has {} states",
            m0.len(),
            gen.n()
        )));
    }
    let mut stepper = Stepper::new(gen, cfg.dt, cfg.a)?;
    let mut traj = Trajectory {
        probe_names: probes.iter().map(|p| p.name().to_string()).collect(),
        steps: Vec::with_capacity(cfg.n_steps + 1),
        times: Vec::with_capacity(cfg.n_steps + 1),
        series: Vec::with_capacity(cfg.n_steps + 1),
        snapshots: vec![(0, 0.0, m0.clone())],
    };
    let mut observe = |traj: &mut Trajectory, step: usize, m: &[f64]| -> Result<()> {
        let time = step as f64 * cfg.dt;
        let mut row = Vec::with_capacity(probes.len());
        for p in probes.iter_mut() {
            let v = p.observe(step, time, m).map_err(|message| Error::Probe {
                probe: p.name().to_string(),
                step,
                message,
            })?;
            row.push(v);
        }
        traj.steps.push(step);
        traj.times.push(time);
        traj.series.push(row);
        Ok(())
    };
    let mut m = m0.mass().to_vec();
    observe(&mut traj, 0, &m)?;
    for step in 1..=cfg.n_steps {
        stepper.step(&mut m);
        observe(&mut traj, step, &m)?;
        if step % cfg.record_every == 0 || step == cfg.n_steps {
            traj.snapshots
                .push((step, step as f64 * cfg.dt, DensityField::from_mass(m.clone())?));
        }
    }
    Ok(traj)
}
