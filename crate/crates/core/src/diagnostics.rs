//! Discrete π-symmetric decomposition and the scalar functionals built on it.
//!
//! Everything works on mass vectors: with `p_i = π_i|C_i|` and `m_i = ρ_i|C_i|`
//! the ratio `g_i = ρ_i/π_i` equals `m_i/p_i`, so volumes drop out.
//!
//! Per-pair quantities are reported for each adjacent pair `i < j`, oriented
//! from `i` to `j`: with `A = Q_ij p_i` and `B = Q_ji p_j`,
//!
//! * `alpha = A + B` (Onsager coefficient),
//! * `f_pi = A − B` (steady flux),
//! * `flux = Q_ij m_i − Q_ji m_j`,
//! * `l = ½ alpha (g_i − g_j)`, `t = ½ f_pi (g_i + g_j)`, and `flux = l + t`.

use std::fmt::Write as _;

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::generator::Generator;

fn check_pair(m: &DensityField, pi: &DensityField) -> Result<()> {
    if m.len() != pi.len() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries, steady state has {}",
            m.len(),
            pi.len()
        )));
    }
    pi.require_positive()
}

fn check_gen(gen: &Generator, pi: &DensityField) -> Result<()> {
    if gen.n() != pi.len() {
        return Err(Error::InvalidArgument(format!(
            "generator has {} states, steady state has {}",
            gen.n(),
            pi.len()
        )));
    }
    pi.require_positive()
}

pub(crate) fn chi2_slices(m: &[f64], p: &[f64]) -> f64 {
    m.iter().zip(p).map(|(m, p)| (m - p) * (m - p) / p).sum()
}

pub(crate) fn dirichlet_slices(gen: &Generator, m: &[f64], p: &[f64]) -> f64 {
    gen.pairs()
        .map(|(i, j, q_ij, q_ji)| {
            let alpha = q_ij * p[i] + q_ji * p[j];
            let dg = m[i] / p[i] - m[j] / p[j];
            alpha * dg * dg
        })
        .sum()
}

/// `Σ_i (ρ_i − π_i)²/π_i |C_i|`.
pub fn chi2(m: &DensityField, pi: &DensityField) -> Result<f64> {
    check_pair(m, pi)?;
    Ok(chi2_slices(m.mass(), pi.mass()))
}

/// `Σ_i ρ_i²/π_i |C_i|`; equals `chi2 + 1` for unit masses.
pub fn chi2_raw(m: &DensityField, pi: &DensityField) -> Result<f64> {
    check_pair(m, pi)?;
    Ok(m.mass().iter().zip(pi.mass()).map(|(m, p)| m * m / p).sum())
}

/// `Σ_i ρ_i ln(ρ_i/π_i) |C_i|` with `0 ln 0 = 0`.
pub fn kl(m: &DensityField, pi: &DensityField) -> Result<f64> {
    check_pair(m, pi)?;
    Ok(m.mass()
        .iter()
        .zip(pi.mass())
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, p)| m * (m / p).ln())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
    pub f_pi: f64,
    pub flux: f64,
    pub l: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub pairs: Vec<PairTerms>,
    /// `g_i = ρ_i/π_i`
    pub g: Vec<f64>,
    pub chi2: f64,
    pub chi2_raw: f64,
    pub kl: f64,
    pub dirichlet_form: f64,
    pub entropy_production: EntropyProduction,
    /// `‖Q*p‖_∞` for the supplied steady state.
    pub steady_residual: f64,
}

pub fn decompose(gen: &Generator, pi_inf: &DensityField, m: &DensityField) -> Result<DecompositionReport> {
    check_gen(gen, pi_inf)?;
    check_pair(m, pi_inf)?;
    let p = pi_inf.mass();
    let mm = m.mass();
    let g: Vec<f64> = mm.iter().zip(p).map(|(m, p)| m / p).collect();
    let pairs: Vec<PairTerms> = gen
        .pairs()
        .map(|(i, j, q_ij, q_ji)| {
            let a = q_ij * p[i];
            let b = q_ji * p[j];
            let alpha = a + b;
            let f_pi = a - b;
            PairTerms {
                i,
                j,
                alpha,
                f_pi,
                flux: q_ij * mm[i] - q_ji * mm[j],
                l: 0.5 * alpha * (g[i] - g[j]),
                t: 0.5 * f_pi * (g[i] + g[j]),
            }
        })
        .collect();
    let dirichlet_form = pairs.iter().map(|e| e.alpha * (g[e.i] - g[e.j]).powi(2)).sum();
    let steady_residual = gen.forward_vec(p).iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    Ok(DecompositionReport {
        g,
        chi2: chi2(m, pi_inf)?,
        chi2_raw: chi2_raw(m, pi_inf)?,
        kl: kl(m, pi_inf)?,
        dirichlet_form,
        entropy_production: entropy_production(gen, pi_inf)?,
        steady_residual,
        pairs,
    })
}

/// `½ Σ_{i,j} α_ij (g_j − g_i)²` over both orientations, i.e. the sum over
/// pairs of `α (g_i − g_j)²`. Equals `−dχ²/dt` under `dm/dt = Q*m`.
pub fn dirichlet_form(report: &DecompositionReport) -> f64 {
    report.dirichlet_form
}

/// Dirichlet form straight from a generator, without building a report.
pub fn dirichlet_energy(gen: &Generator, m: &DensityField, pi: &DensityField) -> Result<f64> {
    check_gen(gen, pi)?;
    check_pair(m, pi)?;
    Ok(dirichlet_slices(gen, m.mass(), pi.mass()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProduction {
    /// `Σ_pairs (A − B) ln(A/B)` with `kT = 1`; `+∞` when any pair is flagged.
    pub total: f64,
    pub per_pair: Vec<(usize, usize, f64)>,
    /// Pairs where exactly one of the two rates vanishes.
    pub flagged: Vec<(usize, usize)>,
}

impl EntropyProduction {
    pub fn is_finite(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub fn entropy_production(gen: &Generator, pi: &DensityField) -> Result<EntropyProduction> {
    check_gen(gen, pi)?;
    let p = pi.mass();
    let mut per_pair = Vec::new();
    let mut flagged = Vec::new();
    let mut total = 0.0;
    for (i, j, q_ij, q_ji) in gen.pairs() {
        let a = q_ij * p[i];
        let b = q_ji * p[j];
        match (a > 0.0, b > 0.0) {
            (true, true) => {
                let s = (a - b) * (a / b).ln();
                per_pair.push((i, j, s));
                total += s;
            }
            (false, false) => {}
            _ => {
                per_pair.push((i, j, f64::INFINITY));
                flagged.push((i, j));
            }
        }
    }
    if !flagged.is_empty() {
        total = f64::INFINITY;
    }
    Ok(EntropyProduction {
        total,
        per_pair,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianCheck {
    /// `|Σ_i g_i Σ_j T_ij|`; vanishes for a steady `π`.
    pub linear: f64,
    /// `|Σ_i φ′(g_i) Σ_j T_ij|` for the supplied `φ′`.
    pub phi: f64,
}

/// Energy contribution of the antisymmetric part, tested against `g` and
/// against `φ′(g)`.
pub fn hamiltonian_null_check(report: &DecompositionReport, phi_prime: impl Fn(f64) -> f64) -> HamiltonianCheck {
    let g = &report.g;
    let mut linear = 0.0;
    let mut phi = 0.0;
    for e in &report.pairs {
        // t leaves i and enters j
        linear += e.t * (g[e.j] - g[e.i]);
        phi += e.t * (phi_prime(g[e.j]) - phi_prime(g[e.i]));
    }
    HamiltonianCheck {
        linear: linear.abs(),
        phi: phi.abs(),
    }
}

/// CSV with header `face_i,face_j,alpha,F_pi,L,T`.
pub fn decomposition_csv(report: &DecompositionReport) -> String {
    let mut out = String::from("face_i,face_j,alpha,F_pi,L,T\n");
    for e in &report.pairs {
        let _ = writeln!(out, "{},{},{:e},{:e},{:e},{:e}", e.i, e.j, e.alpha, e.f_pi, e.l, e.t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn mass(v: &[f64]) -> DensityField {
        DensityField::from_mass(v.to_vec()).unwrap()
    }

    fn walk() -> Generator {
        Generator::from_dense(&[vec![-1.0, 1.0], vec![1.0, -1.0]], vec![1.0; 2]).unwrap()
    }

    #[test]
    fn chi2_examples() {
        let pi = mass(&[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(chi2(&pi, &pi).unwrap(), 0.0);
        let v = chi2(&mass(&[0.5, 0.5]), &pi).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
        let raw = chi2_raw(&mass(&[0.5, 0.5]), &pi).unwrap();
        assert!((raw - 1.125).abs() < 1e-15);
        assert!(chi2(&pi, &mass(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn kl_examples() {
        let pi = mass(&[0.5, 0.5]);
        assert_eq!(kl(&pi, &pi).unwrap(), 0.0);
        let v = kl(&mass(&[1.0, 0.0]), &pi).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_two_state() {
        let r = decompose(&walk(), &mass(&[0.5, 0.5]), &mass(&[1.0, 0.0])).unwrap();
        assert_eq!(r.pairs[0].alpha, 1.0);
        assert_eq!(dirichlet_form(&r), 4.0);
        let r = decompose(&walk(), &mass(&[0.5, 0.5]), &mass(&[0.5, 0.5])).unwrap();
        assert_eq!(dirichlet_form(&r), 0.0);
    }

    #[test]
    fn reversible_generator_has_no_hamiltonian_part() {
        let r = decompose(&walk(), &mass(&[0.5, 0.5]), &mass(&[0.9, 0.1])).unwrap();
        assert!(r.pairs.iter().all(|e| e.t == 0.0));
        let h = hamiltonian_null_check(&r, |x| x.ln() + 1.0);
        assert_eq!((h.linear, h.phi), (0.0, 0.0));
    }

    #[test]
    fn cyclic_decomposition_by_substitution() {
        let third = 1.0 / 3.0;
        let pi = mass(&[third; 3]);
        let m = mass(&[0.5, 0.3, 0.2]);
        let r = decompose(&cyclic(), &pi, &m).unwrap();
        let e = r.pairs.iter().find(|e| e.i == 0 && e.j == 1).unwrap();
        let (g0, g1) = (0.5 / third, 0.3 / third);
        assert!((e.f_pi - third).abs() < 1e-15);
        assert!((e.alpha - 1.0).abs() < 1e-15);
        assert!((e.t - third / 2.0 * (g0 + g1)).abs() < 1e-15);
        assert!((e.l - 0.5 * (g0 - g1)).abs() < 1e-15);
        assert!((e.flux - (2.0 * 0.5 - 0.3)).abs() < 1e-15);
        for e in &r.pairs {
            assert!((e.flux - e.l - e.t).abs() < 1e-15);
        }
        let h = hamiltonian_null_check(&r, |x| x);
        assert!(h.linear < 1e-13);
    }

    #[test]
    fn hamiltonian_phi_sum_by_direct_summation() {
        let q = cyclic().to_dense();
        let third = 1.0 / 3.0;
        let m = [0.55, 0.15, 0.3];
        let r = decompose(&cyclic(), &mass(&[third; 3]), &mass(&m)).unwrap();
        let phi_prime = |x: f64| x.ln() + 1.0;
        let g: Vec<f64> = m.iter().map(|v| v / third).collect();
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let f_pi = q[i][j] * third - q[j][i] * third;
                    direct += 0.5 * f_pi * (g[i] + g[j]) * phi_prime(g[i]);
                }
            }
        }
        let h = hamiltonian_null_check(&r, phi_prime);
        assert!(
            (h.phi - direct.abs()).abs() <= 1e-12 * direct.abs(),
            "{} vs {direct}",
            h.phi
        );
        assert!(h.linear < 1e-13);
    }

    #[test]
    fn entropy_examples() {
        let third = 1.0 / 3.0;
        let s = entropy_production(&cyclic(), &mass(&[third; 3])).unwrap();
        assert!((s.total - std::f64::consts::LN_2).abs() < 1e-12);
        // any irreducible two-state chain is reversible w.r.t. its steady state
        let q = Generator::from_dense(&[vec![-1.0, 1.0], vec![2.0, -2.0]], vec![1.0; 2]).unwrap();
        let s = entropy_production(&q, &mass(&[2.0 / 3.0, 1.0 / 3.0])).unwrap();
        assert!(s.total.abs() < 1e-15);
    }

    #[test]
    fn one_sided_rate_is_flagged() {
        let q = Generator::from_rates(2, &[(0, 1, 1.0)], vec![1.0; 2]).unwrap();
        let s = entropy_production(&q, &mass(&[0.5, 0.5])).unwrap();
        assert_eq!(s.flagged, vec![(0, 1)]);
        assert!(!s.total.is_finite());
        assert!(!s.is_finite());
    }

    #[test]
    fn csv_header() {
        let r = decompose(&walk(), &mass(&[0.5, 0.5]), &mass(&[1.0, 0.0])).unwrap();
        let csv = decomposition_csv(&r);
        assert!(csv.starts_with("face_i,face_j,alpha,F_pi,L,T\n0,1,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
