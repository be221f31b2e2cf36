//! Numerical steady states `π^∞` and the spectral gap of `K̃`.

use nalgebra::{DMatrix, DVector};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::integrator::{choose_stabilizer, Stepper};

/// Largest state count accepted by [`steady_direct`] by default.
pub const DEFAULT_DIRECT_CAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct SteadyResult {
    /// Steady mass vector, normalized to unit mass.
    pub pi_inf: DensityField,
    /// `‖Q*π^∞‖_∞`
    pub residual: f64,
    pub iterations: usize,
    pub gap_estimate: Option<f64>,
}

fn residual_inf(gen: &Generator, p: &[f64]) -> f64 {
    gen.forward_vec(p).iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

/// Power iteration `m ← K̃*m` from the uniform density with the default
/// stabilizer. Stops once `‖Q*m‖₁ < tol`, i.e. once a step changes the mass
/// vector by less than `tol · Δt/(1 + aΔt)` in `ℓ¹`.
pub fn steady_power(gen: &Generator, dt: f64, tol: f64, max_iter: usize) -> Result<SteadyResult> {
    steady_power_from(gen, None, dt, tol, max_iter)
}

/// [`steady_power`] with an optional warm start.
pub fn steady_power_from(
    gen: &Generator,
    start: Option<&DensityField>,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut m = match start {
        Some(s) => {
            if s.len() != gen.n() {
                return Err(Error::InvalidArgument(format!(
                    "warm start has {} entries, generator has {} states",
                    s.len(),
                    gen.n()
                )));
            }
            s.clone().normalized()?.into_mass()
        }
        None => DensityField::uniform(gen.volumes()).into_mass(),
    };
    let mut stepper = Stepper::new(gen, dt, choose_stabilizer(gen))?;
    let threshold = tol * stepper.coefficient();
    let mut prev = m.clone();
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        stepper.step(&mut m);
        change = m.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum();
        if change < threshold {
            let pi_inf = DensityField::from_mass(m)?.normalized()?;
            return Ok(SteadyResult {
                residual: residual_inf(gen, pi_inf.mass()),
                pi_inf,
                iterations: it,
                gap_estimate: None,
            });
        }
        prev.copy_from_slice(&m);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: change / stepper.coefficient(),
    })
}

/// Dense LU solve of `Q*p = 0` with the last equation replaced by `Σp = 1`.
pub fn steady_direct(gen: &Generator) -> Result<SteadyResult> {
    steady_direct_capped(gen, DEFAULT_DIRECT_CAP)
}

pub fn steady_direct_capped(gen: &Generator, cap: usize) -> Result<SteadyResult> {
    let n = gen.n();
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "direct steady solve limited to {cap} states, generator has {n}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty generator".into()));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -gen.exit_rates()[i];
        for (j, q_ji) in gen.incoming(i) {
            a[(i, j)] = q_ji;
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("steady-state system is singular".into()))?;
    let max = sol.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    let mut p = Vec::with_capacity(n);
    for (i, &v) in sol.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Solver(format!("non-finite steady entry at state {i}")));
        }
        if v < 0.0 {
            if v < -1e-12 * max {
                return Err(Error::Solver(format!(
                    "negative steady entry {v} at state {i}; generator may be reducible"
                )));
            }
            p.push(0.0);
        } else {
            p.push(v);
        }
    }
    let pi_inf = DensityField::from_mass(p)?.normalized()?;
    Ok(SteadyResult {
        residual: residual_inf(gen, pi_inf.mass()),
        pi_inf,
        iterations: 1,
        gap_estimate: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    /// `1 − |μ₂|`
    pub gap: f64,
    pub mu2_abs: f64,
    pub iterations: usize,
}

/// Deflated power iteration on `K̃*`: iterates `v ← K̃*v − (Σ K̃*v) π` and
/// periodically fits the dominant pair of the deflated operator from the
/// Krylov triple `(v, K̃*v, K̃*²v)`, so a complex-conjugate `μ₂` is handled.
///
/// Fails when the estimate does not settle within `max_iter` steps or when
/// the gap is numerically zero (reducible generator).
pub fn estimate_gap(gen: &Generator, pi: &DensityField, dt: f64, a: f64, max_iter: usize) -> Result<GapEstimate> {
    let n = gen.n();
    if pi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "pi has {} entries, generator has {n} states",
            pi.len()
        )));
    }
    let p = pi.clone().normalized()?.into_mass();
    let mut stepper = Stepper::new(gen, dt, a)?;
    let deflate = |v: &mut Vec<f64>| {
        let s: f64 = v.iter().sum();
        for (x, pk) in v.iter_mut().zip(&p) {
            *x -= s * pk;
        }
    };

    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 1.0) * 0.618_033_988_749_895;
            (x - x.floor()) - 0.5
        })
        .collect();
    deflate(&mut v);
    let nv = norm(&v);
    if n <= 1 || nv == 0.0 {
        return Ok(GapEstimate {
            gap: 1.0,
            mu2_abs: 0.0,
            iterations: 0,
        });
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let window = 32;
    let mut last = f64::NAN;
    let mut it = 0;
    while it < max_iter {
        stepper.step(&mut v);
        deflate(&mut v);
        it += 1;
        let nv = norm(&v);
        if nv == 0.0 {
            return Ok(GapEstimate {
                gap: 1.0,
                mu2_abs: 0.0,
                iterations: it,
            });
        }
        v.iter_mut().for_each(|x| *x /= nv);
        if it % window != 0 {
            continue;
        }
        let mut v1 = v.clone();
        stepper.step(&mut v1);
        deflate(&mut v1);
        let mut v2 = v1.clone();
        stepper.step(&mut v2);
        deflate(&mut v2);
        let mu = dominant_modulus(&v, &v1, &v2).min(1.0);
        if (mu - last).abs() <= 1e-8 * (1.0 - mu) + 1e-14 {
            if 1.0 - mu <= 1e-12 {
                return Err(Error::GapEstimate {
                    iterations: it,
                    mu2_abs: mu,
                });
            }
            return Ok(GapEstimate {
                gap: 1.0 - mu,
                mu2_abs: mu,
                iterations: it,
            });
        }
        last = mu;
    }
    Err(Error::GapEstimate {
        iterations: max_iter,
        mu2_abs: last,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest root modulus of `x² − s x + p` fitted by least squares to
/// `v2 ≈ s v1 − p v0`; falls back to `‖v1‖/‖v0‖` once `v0` and `v1` are
/// within about `1e-4` rad of (anti)parallel, where the second root is
/// fixed only by roundoff.
fn dominant_modulus(v0: &[f64], v1: &[f64], v2: &[f64]) -> f64 {
    let (g11, g12, g22) = (dot(v0, v0), dot(v0, v1), dot(v1, v1));
    let ratio = (g22 / g11).sqrt();
    let det = g11 * g22 - g12 * g12;
    if det <= 1e-8 * g11 * g22 {
        return ratio;
    }
    let (b1, b2) = (dot(v0, v2), dot(v1, v2));
    let neg_p = (b1 * g22 - b2 * g12) / det;
    let s = (g11 * b2 - g12 * b1) / det;
    let p = -neg_p;
    let disc = s * s - 4.0 * p;
    if disc < 0.0 {
        p.sqrt()
    } else {
        let r = disc.sqrt();
        ((s + r) / 2.0).abs().max(((s - r) / 2.0).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> Generator {
        Generator::from_dense(&[vec![-a, a], vec![b, -b]], vec![1.0; 2]).unwrap()
    }

    fn cyclic() -> Generator {
        Generator::from_rates(
            3,
            &[
                (0, 1, 2.0),
                (1, 2, 2.0),
                (2, 0, 2.0),
                (0, 2, 1.0),
                (1, 0, 1.0),
                (2, 1, 1.0),
            ],
            vec![1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn power_two_state() {
        let r = steady_power(&two_state(1.0, 2.0), 1.0, 1e-12, 10_000).unwrap();
        assert!((r.pi_inf.mass()[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!(r.residual < 1e-11);
    }

    #[test]
    fn power_reports_nonconvergence() {
        let err = steady_power(&two_state(1.0, 2.0), 1e-6, 1e-14, 3).unwrap_err();
        assert!(err.is_convergence_failure());
        assert!(matches!(err, Error::Convergence { iterations: 3, .. }));
    }

    #[test]
    fn direct_examples() {
        let r = steady_direct(&cyclic()).unwrap();
        for &v in r.pi_inf.mass() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let one = Generator::from_dense(&[vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(steady_direct(&one).unwrap().pi_inf.mass(), &[1.0]);
        let r = steady_direct(&two_state(1.0, 2.0)).unwrap();
        assert!((r.pi_inf.mass()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn direct_cap() {
        assert!(steady_direct_capped(&cyclic(), 2).is_err());
    }

    #[test]
    fn gap_two_state() {
        let q = two_state(1.0, 1.0);
        let pi = DensityField::from_mass(vec![0.5, 0.5]).unwrap();
        let g = estimate_gap(&q, &pi, 1.0, 1.01, 10_000).unwrap();
        let mu = 1.0 - 2.0 / 2.01;
        assert!((g.mu2_abs - mu).abs() < 1e-12, "{g:?}");
        assert!((g.gap - (1.0 - mu)).abs() < 1e-12);
    }

    #[test]
    fn gap_with_complex_pair() {
        // Cyclic chain: Q* has eigenvalues -4.5 ± i·√3/2 besides 0.
        let q = cyclic();
        let pi = DensityField::uniform(&[1.0; 3]);
        let (dt, a) = (0.1, 3.03);
        let g = estimate_gap(&q, &pi, dt, a, 100_000).unwrap();
        let c = dt / (1.0 + a * dt);
        let (re, im) = (1.0 - 4.5 * c, c * 3f64.sqrt() / 2.0);
        let expect = (re * re + im * im).sqrt();
        assert!((g.mu2_abs - expect).abs() < 1e-6, "{g:?} vs {expect}");
    }

    #[test]
    fn small_gap_on_a_path() {
        let n = 30;
        let rates: Vec<_> = (1..n).flat_map(|k| [(k - 1, k, 1.0), (k, k - 1, 1.0)]).collect();
        let q = Generator::from_rates(n, &rates, vec![1.0; n]).unwrap();
        let pi = DensityField::uniform(&vec![1.0; n]);
        let (dt, a) = (0.01, 2.02);
        let g = estimate_gap(&q, &pi, dt, a, 2_000_000).unwrap();
        let lambda2 = 2.0 * (1.0 - (std::f64::consts::PI / n as f64).cos());
        let expect = dt / (1.0 + a * dt) * lambda2;
        assert!((g.gap / expect - 1.0).abs() < 1e-5, "{g:?} vs {expect}");
    }

    #[test]
    fn reducible_generator_flagged() {
        let q = Generator::from_rates(4, &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)], vec![1.0; 4]).unwrap();
        let pi = DensityField::uniform(&[1.0; 4]);
        let err = estimate_gap(&q, &pi, 1.0, 1.01, 10_000).unwrap_err();
        assert!(matches!(err, Error::GapEstimate { .. }), "{err}");
    }
}
