//! Grid-refinement studies for the upwind scheme on periodic boxes.
//!
//! Steady studies compare the numerical steady state with the exact one of a
//! reversible manufactured problem. Dynamic studies compare the semi-discrete
//! solution at time `T` with either an exact solution or a finer-grid
//! reference.

use std::fmt::Write as _;
use std::time::Instant;

use crate::density::DensityField;
use crate::diagnostics::chi2_slices;
use crate::error::{Error, Result};
use crate::fit::fit_loglog;
use crate::generator::{build_upwind, Generator};
use crate::integrator::step_reference;
use crate::mesh::{build_structured_grid, mesh_resolution, GridTopology, Mesh, Rect};
use crate::steady::{steady_direct, steady_power_from, DEFAULT_DIRECT_CAP};
use crate::velocity::{sample_drift, stream_velocity, FaceField};

type Field2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Vector2 = Box<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Reversible problem on a periodic box: drift `b = −∇φ`, diffusion `D`,
/// exact steady density `π ∝ e^{−φ/D}`.
pub struct SteadyProblem {
    pub domain: Rect,
    pub d: f64,
    pub phi: Field2,
    pub grad_phi: Vector2,
}

impl SteadyProblem {
    /// `φ = amp·(cos 2πx + sin 2πy)` on `[0, 1]²`.
    pub fn cosine(d: f64, amp: f64) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        Self {
            domain: Rect::square(0.0, 1.0),
            d,
            phi: Box::new(move |x, y| amp * ((tau * x).cos() + (tau * y).sin())),
            grad_phi: Box::new(move |x, y| [-amp * tau * (tau * x).sin(), amp * tau * (tau * y).cos()]),
        }
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        build_structured_grid(self.domain, n, n, GridTopology::Periodic)
    }

    pub fn drift(&self, mesh: &Mesh) -> Result<FaceField> {
        sample_drift(mesh, |p: &[f64]| {
            let g = (self.grad_phi)(p[0], p[1]);
            [-g[0], -g[1]]
        })
    }

    pub fn generator(&self, mesh: &Mesh) -> Result<Generator> {
        build_upwind(mesh, &self.drift(mesh)?, self.d)
    }

    /// `π(y_i)|C_i|`, normalized to unit mass.
    pub fn exact_mass(&self, mesh: &Mesh) -> Result<DensityField> {
        let rho: Vec<f64> = (0..mesh.n_cells())
            .map(|c| {
                let y = mesh.center(c);
                (-(self.phi)(y[0], y[1]) / self.d).exp()
            })
            .collect();
        DensityField::from_density(&rho, mesh.volumes())?.normalized()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub err_steady_sq: Option<f64>,
    pub err_dyn_sq: Option<f64>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    /// Fitted log–log slope of the squared error against `h`.
    pub slope: Option<f64>,
}

impl ConvergenceStudy {
    fn from_rows(rows: Vec<StudyRow>, pick: impl Fn(&StudyRow) -> Option<f64>) -> Self {
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = rows.iter().filter_map(&pick).collect();
        let slope = if e.len() == h.len() {
            fit_loglog(&h, &e).map(|f| f.slope)
        } else {
            None
        };
        Self { rows, slope }
    }

    fn errors(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.err_dyn_sq.or(r.err_steady_sq).unwrap_or(f64::NAN))
            .collect()
    }

    /// Squared-error ratio between the two finest grids.
    pub fn finest_ratio(&self) -> Option<f64> {
        let e = self.errors();
        let k = e.len();
        (k >= 2).then(|| e[k - 2] / e[k - 1])
    }

    pub fn is_monotone(&self) -> bool {
        self.errors().windows(2).all(|w| w[1] < w[0])
    }

    /// CSV `h,err_steady_sq,err_dyn_sq,slope_running`; the running slope is
    /// taken between each row and the previous one.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        let e = self.errors();
        let mut out = String::from("h,err_steady_sq,err_dyn_sq,slope_running\n");
        for (k, r) in self.rows.iter().enumerate() {
            let running = (k > 0).then(|| (e[k - 1] / e[k]).ln() / (self.rows[k - 1].h / r.h).ln());
            let _ = writeln!(
                out,
                "{:e},{},{},{}",
                r.h,
                fmt(r.err_steady_sq),
                fmt(r.err_dyn_sq),
                fmt(running)
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let err = r.err_dyn_sq.or(r.err_steady_sq).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "  n = {:4}  h = {:.5}  err^2 = {:.4e}  ({:.2} s)",
                r.n, r.h, err, r.runtime_s
            );
        }
        match self.slope {
            Some(s) => {
                let _ = writeln!(out, "  fitted slope = {s:.3}");
            }
            None => out.push_str("  fitted slope unavailable\n"),
        }
        out
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no grid sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid sizes must be strictly increasing".into()));
    }
    Ok(())
}

/// Numerical steady state of the upwind scheme: dense solve up to the direct
/// cap, warm-started power iteration beyond it.
pub fn steady_state_for(problem: &SteadyProblem, mesh: &Mesh, gen: &Generator) -> Result<DensityField> {
    if gen.n() <= DEFAULT_DIRECT_CAP {
        return Ok(steady_direct(gen)?.pi_inf);
    }
    let start = problem.exact_mass(mesh)?;
    Ok(steady_power_from(gen, Some(&start), 1.0, 1e-11, 2_000_000)?.pi_inf)
}

/// Squared steady error `Σ_i (π^∞_i − π(y_i))²/π(y_i) |C_i|` for each grid.
pub fn steady_convergence_study(problem: &SteadyProblem, sizes: &[usize]) -> Result<ConvergenceStudy> {
    check_sizes(sizes)?;
    let mut rows = Vec::new();
    for &n in sizes {
        let t0 = Instant::now();
        let mesh = problem.mesh(n)?;
        let gen = problem.generator(&mesh)?;
        let pi_inf = steady_state_for(problem, &mesh, &gen)?;
        let exact = problem.exact_mass(&mesh)?;
        rows.push(StudyRow {
            n,
            h: mesh_resolution(&mesh),
            err_steady_sq: Some(chi2_slices(pi_inf.mass(), exact.mass())),
            err_dyn_sq: None,
            runtime_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceStudy::from_rows(rows, |r| r.err_steady_sq))
}

pub enum DriftSource {
    /// Velocity from a stream function via [`stream_velocity`].
    Stream(Field2),
    /// Pointwise drift sampled at face midpoints.
    Field(Vector2),
}

/// Time-dependent problem on a periodic box.
pub struct DynamicProblem {
    pub domain: Rect,
    pub d: f64,
    pub drift: DriftSource,
    /// Initial density (unnormalized).
    pub initial: Field2,
    /// Steady density used as the χ² weight (unnormalized).
    pub steady: Field2,
    /// Exact density `ρ(x, y, t)` (unnormalized); without it a finer-grid
    /// reference is computed.
    pub exact: Option<Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>>,
}

impl DynamicProblem {
    /// Cellular flow `ψ = sin x sin y` on `[0, 2π]²` with `D = 0.1`; the
    /// velocity is discretely divergence-free so the steady density is
    /// uniform. The initial density is a smooth bump pattern.
    pub fn cellular() -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        Self {
            domain: Rect::square(0.0, tau),
            d: 0.1,
            drift: DriftSource::Stream(Box::new(|x, y| x.sin() * y.sin())),
            initial: Box::new(|x, y| 1.0 + 0.5 * (x - 1.0).cos() * (2.0 * y).cos() + 0.3 * (x + y).sin()),
            steady: Box::new(|_, _| 1.0),
            exact: None,
        }
    }

    /// The reversible problem started from its exact steady state, which is
    /// then also the exact solution at every time.
    pub fn from_steady(problem: SteadyProblem) -> Self {
        let SteadyProblem {
            domain,
            d,
            phi,
            grad_phi,
        } = problem;
        let phi = std::sync::Arc::new(phi);
        let (p1, p2, p3) = (phi.clone(), phi.clone(), phi);
        Self {
            domain,
            d,
            drift: DriftSource::Field(Box::new(move |x, y| {
                let g = grad_phi(x, y);
                [-g[0], -g[1]]
            })),
            initial: Box::new(move |x, y| (-p1(x, y) / d).exp()),
            steady: Box::new(move |x, y| (-p2(x, y) / d).exp()),
            exact: Some(Box::new(move |x, y, _| (-p3(x, y) / d).exp())),
        }
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        build_structured_grid(self.domain, n, n, GridTopology::Periodic)
    }

    pub fn generator(&self, mesh: &Mesh) -> Result<Generator> {
        let field = match &self.drift {
            DriftSource::Stream(psi) => stream_velocity(mesh, psi)?,
            DriftSource::Field(b) => sample_drift(mesh, |p: &[f64]| b(p[0], p[1]))?,
        };
        build_upwind(mesh, &field, self.d)
    }

    fn sample(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Result<DensityField> {
        let rho: Vec<f64> = (0..mesh.n_cells())
            .map(|c| {
                let y = mesh.center(c);
                f(y[0], y[1])
            })
            .collect();
        DensityField::from_density(&rho, mesh.volumes())?.normalized()
    }

    /// Semi-discrete solution at `t_end` on an `n × n` grid, as a density.
    pub fn solve(&self, n: usize, t_end: f64) -> Result<(Mesh, Vec<f64>)> {
        let mesh = self.mesh(n)?;
        let gen = self.generator(&mesh)?;
        let m0 = Self::sample(&mesh, &self.initial)?;
        let m = evolve_semi_discrete(&gen, m0.mass(), t_end)?;
        let rho = m.iter().zip(mesh.volumes()).map(|(m, v)| m / v).collect();
        Ok((mesh, rho))
    }
}

/// Integrates `dm/dt = Q*m` to `t_end` with RK4 at the largest step allowed
/// by the reference guard (times 0.8), evenly dividing `t_end`.
pub fn evolve_semi_discrete(gen: &Generator, m0: &[f64], t_end: f64) -> Result<Vec<f64>> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time must be nonnegative, got {t_end}"
        )));
    }
    let mut m = m0.to_vec();
    if t_end == 0.0 {
        return Ok(m);
    }
    let max = gen.max_exit_rate().max(1e-300);
    let steps = (t_end * max / 0.4).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        m = step_reference(&m, gen, dt)?;
    }
    Ok(m)
}

/// Squared dynamic error at `t_end`,
/// `Σ_i (ρ_i(T) − ρ(y_i, T))²/π(y_i) |C_i|`, against the exact solution when
/// the problem has one, else against a grid `ref_factor` times finer than
/// the finest requested (the reference value at a coarse center is the mean
/// of the four fine cells meeting there).
pub fn dynamic_convergence_study(
    problem: &DynamicProblem,
    sizes: &[usize],
    t_end: f64,
    ref_factor: usize,
) -> Result<ConvergenceStudy> {
    check_sizes(sizes)?;
    let reference = match &problem.exact {
        Some(_) => None,
        None => {
            let n_ref = ref_factor * sizes[sizes.len() - 1];
            for &n in sizes {
                let r = n_ref / n;
                if !n_ref.is_multiple_of(n) || !r.is_multiple_of(2) {
                    return Err(Error::InvalidArgument(format!(
                        "reference grid {n_ref} must be an even multiple of {n}"
                    )));
                }
            }
            let (_, rho) = problem.solve(n_ref, t_end)?;
            Some((n_ref, rho))
        }
    };

    let mut rows = Vec::new();
    for &n in sizes {
        let t0 = Instant::now();
        let (mesh, rho) = problem.solve(n, t_end)?;
        let target: Vec<f64> = match (&problem.exact, &reference) {
            (Some(exact), _) => {
                let raw: Vec<f64> = (0..mesh.n_cells())
                    .map(|c| {
                        let y = mesh.center(c);
                        exact(y[0], y[1], t_end)
                    })
                    .collect();
                let total: f64 = raw.iter().zip(mesh.volumes()).map(|(r, v)| r * v).sum();
                raw.iter().map(|r| r / total).collect()
            }
            (None, Some((n_ref, fine))) => {
                let r = n_ref / n;
                let mut out = Vec::with_capacity(mesh.n_cells());
                for iy in 0..n {
                    for ix in 0..n {
                        let (fx, fy) = (ix * r + r / 2, iy * r + r / 2);
                        let at = |x: usize, y: usize| fine[y * n_ref + x];
                        out.push(0.25 * (at(fx - 1, fy - 1) + at(fx, fy - 1) + at(fx - 1, fy) + at(fx, fy)));
                    }
                }
                out
            }
            (None, None) => unreachable!(),
        };
        let weight = DynamicProblem::sample(&mesh, &problem.steady)?.density(mesh.volumes());
        let err: f64 = (0..mesh.n_cells())
            .map(|c| (rho[c] - target[c]).powi(2) / weight[c] * mesh.volume(c))
            .sum();
        rows.push(StudyRow {
            n,
            h: mesh_resolution(&mesh),
            err_steady_sq: None,
            err_dyn_sq: Some(err),
            runtime_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceStudy::from_rows(rows, |r| r.err_dyn_sq))
}
