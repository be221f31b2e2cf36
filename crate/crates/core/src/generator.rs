//! Sparse Q-matrices for the upwind, π-symmetric and B-scheme discretizations.
//!
//! `Q_ij` (row `i`, column `j ≠ i`) is the jump rate out of cell `i` into
//! cell `j`. Masses evolve by the transpose, `dm/dt = Q*m`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::velocity::{discrete_divergence, FaceField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BFunction {
    ScharfetterGummel,
    Upwind,
}

impl BFunction {
    /// `B(x)`; Scharfetter–Gummel is `x/(eˣ − 1)` with `B(0) = 1`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            BFunction::ScharfetterGummel => {
                if x == 0.0 {
                    1.0
                } else {
                    x / x.exp_m1()
                }
            }
            BFunction::Upwind => 1.0 + (-x).max(0.0),
        }
    }

    /// `diff · B(drift/diff)`, arranged so the upwind case reduces to
    /// `diff + drift⁻` with no extra rounding.
    fn weighted(self, diff: f64, drift: f64) -> f64 {
        match self {
            BFunction::Upwind => diff + (-drift).max(0.0),
            BFunction::ScharfetterGummel => diff * self.eval(drift / diff),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Upwind,
    PiSymmetric,
    BScheme(BFunction),
    Custom,
}

/// Row-compressed generator. The sparsity pattern is symmetric, so each
/// stored slot `k` of row `i` with column `j` carries both `Q_ij` (outgoing)
/// and `Q_ji` (incoming).
#[derive(Debug, Clone)]
pub struct Generator {
    scheme: Scheme,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    out_rate: Vec<f64>,
    in_rate: Vec<f64>,
    exit: Vec<f64>,
    volumes: Vec<f64>,
}

fn check_diffusion(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "diffusion coefficient must be positive and finite, got {d}"
        )))
    }
}

fn check_field(mesh: &Mesh, field: &FaceField, what: &str) -> Result<()> {
    if field.len() != mesh.n_faces() {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} face values, mesh has {} faces",
            field.len(),
            mesh.n_faces()
        )));
    }
    Ok(())
}

/// Upwind generator `Q_ij = |Γ_ij|/|C_i| (D/|y_j − y_i| + (b·n)⁺_ij)`.
/// Boundary faces carry no flux.
pub fn build_upwind(mesh: &Mesh, drift: &FaceField, d: f64) -> Result<Generator> {
    check_diffusion(d)?;
    check_field(mesh, drift, "drift")?;
    let vol = mesh.volumes();
    let rates = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let v = drift.value(f);
            let diff = d / face.distance;
            let q_ij = (face.area / vol[face.i]) * (diff + v.max(0.0));
            let q_ji = (face.area / vol[face.j]) * (diff + (-v).max(0.0));
            (q_ij, q_ji)
        })
        .collect();
    Ok(Generator::from_face_rates(mesh, Scheme::Upwind, rates))
}

/// B-scheme `Q_ji = D|Γ_ij|/(|y_j − y_i||C_j|) · B((b·n)_ij |y_j − y_i|/D)`.
/// With [`BFunction::Upwind`] the rates equal those of [`build_upwind`]
/// bit for bit.
pub fn build_b_scheme(mesh: &Mesh, drift: &FaceField, d: f64, b: BFunction) -> Result<Generator> {
    check_diffusion(d)?;
    check_field(mesh, drift, "drift")?;
    let vol = mesh.volumes();
    let rates = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let v = drift.value(f);
            let diff = d / face.distance;
            let q_ij = (face.area / vol[face.i]) * b.weighted(diff, -v);
            let q_ji = (face.area / vol[face.j]) * b.weighted(diff, v);
            (q_ij, q_ji)
        })
        .collect();
    Ok(Generator::from_face_rates(mesh, Scheme::BScheme(b), rates))
}

/// π-symmetric upwind generator,
/// `Q_ij = |Γ_ij|/(π_i|C_i|) (D(π_i + π_j)/(2|y_j − y_i|) + (u·n)⁺_ij)`.
///
/// `pi` is a mass vector (any positive scale); it is renormalized to unit
/// mass. `u` must be discretely divergence-free to `1e-10` relative to the
/// largest face transport `|Γ|(|u| + D/d)`, so a field that is zero up to
/// roundoff is accepted.
pub fn build_pi_symmetric(mesh: &Mesh, u: &FaceField, pi: &DensityField, d: f64) -> Result<Generator> {
    check_diffusion(d)?;
    check_field(mesh, u, "velocity")?;
    if pi.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "pi has {} entries, mesh has {} cells",
            pi.len(),
            mesh.n_cells()
        )));
    }
    pi.require_positive()?;
    let pi = pi.clone().normalized()?;
    let vol = mesh.volumes();
    let rho = pi.density(vol);

    let max_flux = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| face.area * (u.value(f).abs() + d / face.distance))
        .fold(0.0, f64::max);
    let residual = discrete_divergence(mesh, u)
        .iter()
        .fold(0.0, |a: f64, v| a.max(v.abs()));
    let tolerance = 1e-10 * max_flux;
    if residual > tolerance {
        return Err(Error::NotIncompressible { residual, tolerance });
    }

    let rates = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let (i, j) = (face.i, face.j);
            let v = u.value(f);
            let diff = d * (rho[i] + rho[j]) / (2.0 * face.distance);
            let q_ij = face.area / (rho[i] * vol[i]) * (diff + v.max(0.0));
            let q_ji = face.area / (rho[j] * vol[j]) * (diff + (-v).max(0.0));
            (q_ij, q_ji)
        })
        .collect();
    Ok(Generator::from_face_rates(mesh, Scheme::PiSymmetric, rates))
}

impl Generator {
    fn from_face_rates(mesh: &Mesh, scheme: Scheme, rates: Vec<(f64, f64)>) -> Self {
        let n = mesh.n_cells();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz = 2 * mesh.n_faces();
        let mut col = Vec::with_capacity(nnz);
        let mut out_rate = Vec::with_capacity(nnz);
        let mut in_rate = Vec::with_capacity(nnz);
        for i in 0..n {
            for &(j, f) in mesh.neighbors(i) {
                let (q_ij, q_ji) = rates[f];
                let (out, inc) = if mesh.face(f).i == i {
                    (q_ij, q_ji)
                } else {
                    (q_ji, q_ij)
                };
                col.push(j);
                out_rate.push(out);
                in_rate.push(inc);
            }
            row_ptr.push(col.len());
        }
        Self::assemble(scheme, row_ptr, col, out_rate, in_rate, mesh.volumes().to_vec())
    }

    fn assemble(
        scheme: Scheme,
        row_ptr: Vec<usize>,
        col: Vec<usize>,
        out_rate: Vec<f64>,
        in_rate: Vec<f64>,
        volumes: Vec<f64>,
    ) -> Self {
        let exit = (0..volumes.len())
            .map(|i| out_rate[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        Self {
            scheme,
            row_ptr,
            col,
            out_rate,
            in_rate,
            exit,
            volumes,
        }
    }

    /// Generator from explicit off-diagonal rates `(i, j, Q_ij)`. Missing
    /// reverse entries are stored as zero rates.
    pub fn from_rates(n: usize, rates: &[(usize, usize, f64)], volumes: Vec<f64>) -> Result<Self> {
        if volumes.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} volumes for {n} states",
                volumes.len()
            )));
        }
        if let Some(v) = volumes.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-positive volume {v}")));
        }
        let mut rows: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
        fn slot(row: &mut Vec<(usize, f64, f64)>, j: usize) -> &mut (usize, f64, f64) {
            let k = match row.iter().position(|e| e.0 == j) {
                Some(k) => k,
                None => {
                    row.push((j, 0.0, 0.0));
                    row.len() - 1
                }
            };
            &mut row[k]
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j, q) in rates {
            if i >= n {
                return Err(Error::InvalidState { state: i, n });
            }
            if j >= n {
                return Err(Error::InvalidState { state: j, n });
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("diagonal entry ({i}, {i}) given")));
            }
            if !(q >= 0.0) || !q.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "rate Q[{i}][{j}] = {q} must be finite and nonnegative"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidArgument(format!("rate Q[{i}][{j}] given twice")));
            }
            slot(&mut rows[i], j).1 = q;
            slot(&mut rows[j], i).2 = q;
        }
        let mut row_ptr = vec![0];
        let (mut col, mut out_rate, mut in_rate) = (Vec::new(), Vec::new(), Vec::new());
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, out, inc) in row {
                col.push(j);
                out_rate.push(out);
                in_rate.push(inc);
            }
            row_ptr.push(col.len());
        }
        Ok(Self::assemble(Scheme::Custom, row_ptr, col, out_rate, in_rate, volumes))
    }

    /// Dense constructor for small hand-written chains; the diagonal is
    /// ignored and recomputed from the off-diagonals.
    pub fn from_dense(q: &[Vec<f64>], volumes: Vec<f64>) -> Result<Self> {
        let mut rates = Vec::new();
        for (i, row) in q.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j && v != 0.0 {
                    rates.push((i, j, v));
                }
            }
        }
        Self::from_rates(q.len(), &rates, volumes)
    }

    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Stored off-diagonal slots (twice the number of adjacent pairs).
    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    /// `(j, Q_ij)` for the stored off-diagonals of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()]
            .iter()
            .copied()
            .zip(self.out_rate[r].iter().copied())
    }

    /// `(j, Q_ji)` for the stored neighbours `j` of state `i`.
    pub fn incoming(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.in_rate[r].iter().copied())
    }

    /// `Q_ij`, including the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, q)| q)
    }

    /// `λ_i = −Q_ii`.
    pub fn exit_rates(&self) -> &[f64] {
        &self.exit
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// Every unordered adjacent pair once as `(i, j, Q_ij, Q_ji)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            r.filter(move |&k| self.col[k] > i)
                .map(move |k| (i, self.col[k], self.out_rate[k], self.in_rate[k]))
        })
    }

    /// `out = Q* m`, i.e. `out_i = Σ_j Q_ji m_j − λ_i m_i`.
    pub fn forward(&self, m: &[f64], out: &mut [f64]) {
        for i in 0..self.n() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let gain: f64 = self.col[r.clone()]
                .iter()
                .zip(&self.in_rate[r])
                .map(|(&j, &q)| q * m[j])
                .sum();
            out[i] = gain - self.exit[i] * m[i];
        }
    }

    pub fn forward_vec(&self, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.forward(m, &mut out);
        out
    }

    /// `Σ_j Q_ij` for row `i`, diagonal included.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, q)| q).sum::<f64>() - self.exit[i]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut q = vec![vec![0.0; n]; n];
        for (i, row) in q.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
            row[i] = -self.exit[i];
        }
        q
    }

    /// Sparse text dump: a `%%sparse` header, a `n n nnz` size line, then
    /// one-based `i j Q_ij` triplets including the diagonal.
    pub fn to_sparse_text(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        let _ = writeln!(out, "%%sparse");
        let _ = writeln!(out, "{n} {n} {}", self.nnz() + n);
        for i in 0..n {
            let mut entries: Vec<(usize, f64)> = self.row(i).collect();
            entries.push((i, -self.exit[i]));
            entries.sort_by_key(|e| e.0);
            for (j, q) in entries {
                let _ = writeln!(out, "{} {} {q:e}", i + 1, j + 1);
            }
        }
        out
    }
}

/// Parses [`Generator::to_sparse_text`] output into `(n, zero-based triplets)`.
pub fn read_sparse_text(text: &str) -> Result<(usize, Vec<(usize, usize, f64)>)> {
    let bad = |line: usize, message: &str| Error::MeshParse {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "%%sparse" => {}
        Some((k, _)) => return Err(bad(k + 1, "missing %%sparse header")),
        None => return Err(bad(0, "empty input")),
    }
    let (k, size) = lines.next().ok_or_else(|| bad(0, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(k + 1, "invalid size line")))
        .collect::<Result<_>>()?;
    let [n, _, nnz] = dims[..] else {
        return Err(bad(k + 1, "size line needs three integers"));
    };
    let mut triplets = Vec::with_capacity(nnz);
    for (k, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        let [i, j, v] = t[..] else {
            return Err(bad(k + 1, "expected `i j value`"));
        };
        let i: usize = i.parse().map_err(|_| bad(k + 1, "invalid row index"))?;
        let j: usize = j.parse().map_err(|_| bad(k + 1, "invalid column index"))?;
        let v: f64 = v.parse().map_err(|_| bad(k + 1, "invalid value"))?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(bad(k + 1, "index out of range"));
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != nnz {
        return Err(bad(0, "entry count does not match size line"));
    }
    Ok((n, triplets))
}

/// Embedded jump chain: exit rates `λ_i` and transition probabilities
/// `P_ij = Q_ij / λ_i`.
#[derive(Debug, Clone)]
pub struct JumpChain {
    lambda: Vec<f64>,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    prob: Vec<f64>,
}

pub fn jump_chain(gen: &Generator) -> JumpChain {
    let n = gen.n();
    let mut row_ptr = vec![0];
    let mut col = Vec::with_capacity(gen.nnz());
    let mut prob = Vec::with_capacity(gen.nnz());
    for i in 0..n {
        let lambda = gen.exit[i];
        for (j, q) in gen.row(i) {
            if q > 0.0 {
                col.push(j);
                prob.push(q / lambda);
            }
        }
        row_ptr.push(col.len());
    }
    JumpChain {
        lambda: gen.exit.clone(),
        row_ptr,
        col,
        prob,
    }
}

impl JumpChain {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        !(self.lambda[i] > 0.0)
    }

    /// `(j, P_ij)` for the reachable states of row `i`; empty when absorbing.
    pub fn transitions(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.prob[r].iter().copied())
    }

    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.transitions(i).find(|&(c, _)| c == j).map_or(0.0, |(_, p)| p)
    }
}

/// Steady-flux residuals `F^π_ij = Q_ij p_i − Q_ji p_j` on each adjacent pair,
/// with `p` the steady mass vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailedBalance {
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_abs: f64,
}

pub fn detailed_balance_residual(gen: &Generator, pi: &DensityField) -> Result<DetailedBalance> {
    if pi.len() != gen.n() {
        return Err(Error::InvalidArgument(format!(
            "pi has {} entries, generator has {} states",
            pi.len(),
            gen.n()
        )));
    }
    pi.require_positive()?;
    let p = pi.mass();
    let pairs: Vec<_> = gen
        .pairs()
        .map(|(i, j, q_ij, q_ji)| (i, j, q_ij * p[i] - q_ji * p[j]))
        .collect();
    let max_abs = pairs.iter().fold(0.0, |a: f64, e| a.max(e.2.abs()));
    Ok(DetailedBalance { pairs, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_grid, parse_mesh, GridTopology, Rect};
    use crate::velocity::{sample_drift, stream_velocity, FlowSpec};

    fn chain_mesh(n: usize) -> Mesh {
        build_structured_grid(Rect::new(0.0, n as f64, 0.0, 1.0), n, 1, GridTopology::Noflux).unwrap()
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
    fn symmetric_walk() {
        let m = chain_mesh(2);
        let q = build_upwind(&m, &FaceField::zeros(1), 1.0).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(q.scheme(), Scheme::Upwind);
    }

    #[test]
    fn rightward_drift_rates() {
        let m = chain_mesh(3);
        let drift = sample_drift(&m, |_: &[f64]| [2.0, 0.0]).unwrap();
        let q = build_upwind(&m, &drift, 1.0).unwrap();
        assert_eq!(q.entry(0, 1), 3.0);
        assert_eq!(q.entry(1, 0), 1.0);
        assert_eq!(q.entry(1, 2), 3.0);
        assert_eq!(q.entry(0, 2), 0.0);
        assert_eq!(q.entry(1, 1), -4.0);
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let m = chain_mesh(2);
        for d in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                build_upwind(&m, &FaceField::zeros(1), d),
                Err(Error::InvalidParameter(_))
            ));
            assert!(build_b_scheme(&m, &FaceField::zeros(1), d, BFunction::ScharfetterGummel).is_err());
        }
    }

    #[test]
    fn cellular_upwind_rows_sum_to_zero() {
        let m = build_structured_grid(Rect::square(-4.5, 4.5), 5, 5, GridTopology::Noflux).unwrap();
        let u = FlowSpec::Cellular { amplitude: 0.1, k: 8.0 }.face_field(&m).unwrap();
        let q = build_upwind(&m, &u, 0.5).unwrap();
        for i in 0..q.n() {
            assert!(q.row_sum(i).abs() < 1e-13);
            assert!(q.row(i).all(|(_, v)| v >= 0.0));
        }
    }

    #[test]
    fn pi_symmetric_two_cell_uniform() {
        let m = chain_mesh(2);
        let pi = DensityField::uniform(m.volumes());
        let q = build_pi_symmetric(&m, &FaceField::zeros(1), &pi, 1.0).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(q.forward_vec(pi.mass()), vec![0.0, 0.0]);
    }

    #[test]
    fn pi_symmetric_two_cell_substitution() {
        let m = chain_mesh(2);
        let pi = DensityField::from_mass(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let q = build_pi_symmetric(&m, &FaceField::zeros(1), &pi, 1.0).unwrap();
        // Q_12 = (1/π_1)(π_1 + π_2)/2 = 0.75, Q_21 = (1/π_2)(π_1 + π_2)/2 = 1.5
        assert!((q.entry(0, 1) - 0.75).abs() < 1e-15);
        assert!((q.entry(1, 0) - 1.5).abs() < 1e-15);
        let r = q.forward_vec(pi.mass());
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn pi_symmetric_preconditions() {
        let m = chain_mesh(3);
        let pi = DensityField::from_mass(vec![0.5, 0.0, 0.5]).unwrap();
        assert!(matches!(
            build_pi_symmetric(&m, &FaceField::zeros(2), &pi, 1.0),
            Err(Error::InvalidMeasure(_))
        ));
        let pi = DensityField::uniform(m.volumes());
        let u = FaceField::new(vec![1.0, 0.0]);
        assert!(matches!(
            build_pi_symmetric(&m, &u, &pi, 1.0),
            Err(Error::NotIncompressible { .. })
        ));
    }

    #[test]
    fn pi_symmetric_is_well_balanced_on_periodic_grid() {
        let m = build_structured_grid(Rect::square(0.0, 1.0), 8, 6, GridTopology::Periodic).unwrap();
        let u = stream_velocity(&m, |x, y| (6.0 * x).sin() + x * y).unwrap();
        let rho: Vec<f64> = (0..m.n_cells())
            .map(|c| 1.5 + m.center(c)[0].cos() * m.center(c)[1])
            .collect();
        let pi = DensityField::from_density(&rho, m.volumes()).unwrap();
        let q = build_pi_symmetric(&m, &u, &pi, 0.3).unwrap();
        let p = pi.normalized().unwrap();
        let r = q.forward_vec(p.mass());
        let scale = q.max_exit_rate();
        assert!(r.iter().all(|v| v.abs() < 1e-12 * scale));
    }

    #[test]
    fn b_scheme_upwind_matches_bitwise() {
        let m = build_structured_grid(Rect::new(-3.0, 4.0, -3.0, 3.0), 7, 6, GridTopology::Noflux).unwrap();
        let b = FlowSpec::Vdp {
            alpha: 10.0,
            delta: 1.0,
        }
        .face_field(&m)
        .unwrap();
        let up = build_upwind(&m, &b, 0.1).unwrap();
        let bs = build_b_scheme(&m, &b, 0.1, BFunction::Upwind).unwrap();
        for i in 0..up.n() {
            let a: Vec<_> = up.row(i).map(|(j, q)| (j, q.to_bits())).collect();
            let c: Vec<_> = bs.row(i).map(|(j, q)| (j, q.to_bits())).collect();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn sg_with_zero_drift_is_pure_diffusion() {
        let m = chain_mesh(4);
        let z = FaceField::zeros(m.n_faces());
        let sg = build_b_scheme(&m, &z, 0.7, BFunction::ScharfetterGummel).unwrap();
        let up = build_upwind(&m, &z, 0.7).unwrap();
        assert_eq!(sg.to_dense(), up.to_dense());
        assert_eq!(BFunction::ScharfetterGummel.eval(0.0), 1.0);
    }

    #[test]
    fn sg_function_values() {
        let b = BFunction::ScharfetterGummel;
        assert!((b.eval(1.0) - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        // B(-x) = B(x) e^x
        for x in [1e-9, 0.3, 2.0, 30.0] {
            assert!((b.eval(-x) - b.eval(x) * x.exp()).abs() < 1e-13 * b.eval(-x));
        }
        assert!((b.eval(1e-12) - 1.0).abs() < 1e-11);
        assert_eq!(BFunction::Upwind.eval(-2.0), 3.0);
        assert_eq!(BFunction::Upwind.eval(2.0), 1.0);
    }

    #[test]
    fn sg_detailed_balance_for_gradient_drift() {
        let n = 20;
        let m = build_structured_grid(Rect::new(-2.0, 2.0, 0.0, 1.0), n, 1, GridTopology::Noflux).unwrap();
        let d = 1.0;
        let phi = |c: usize| {
            let x = m.center(c)[0];
            0.5 * x * x
        };
        let drift = FaceField::new(m.faces().iter().map(|f| (phi(f.i) - phi(f.j)) / f.distance).collect());
        let q = build_b_scheme(&m, &drift, d, BFunction::ScharfetterGummel).unwrap();
        let p: Vec<f64> = (0..n).map(|c| (-phi(c) / d).exp() * m.volume(c)).collect();
        for (i, j, q_ij, q_ji) in q.pairs() {
            assert!((q_ji * p[j] - q_ij * p[i]).abs() < 1e-12, "pair {i} {j}");
        }
    }

    #[test]
    fn jump_chain_examples() {
        let q = Generator::from_dense(&[vec![-1.0, 1.0], vec![2.0, -2.0]], vec![1.0; 2]).unwrap();
        let jc = jump_chain(&q);
        assert_eq!(jc.lambda(), &[1.0, 2.0]);
        assert_eq!(jc.probability(0, 1), 1.0);
        assert_eq!(jc.probability(1, 0), 1.0);
        assert_eq!(jc.probability(0, 0), 0.0);

        let q = Generator::from_dense(&[vec![0.0]], vec![1.0]).unwrap();
        let jc = jump_chain(&q);
        assert_eq!(jc.lambda(), &[0.0]);
        assert!(jc.is_absorbing(0));
        assert_eq!(jc.transitions(0).count(), 0);
    }

    #[test]
    fn jump_chain_rows_are_stochastic() {
        let m = build_structured_grid(Rect::square(-4.5, 4.5), 9, 9, GridTopology::Noflux).unwrap();
        let u = FlowSpec::Cellular { amplitude: 0.3, k: 3.0 }.face_field(&m).unwrap();
        let jc = jump_chain(&build_upwind(&m, &u, 0.5).unwrap());
        for i in 0..jc.n() {
            let s: f64 = jc.transitions(i).map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn detailed_balance_examples() {
        let m = chain_mesh(4);
        let q = build_upwind(&m, &FaceField::zeros(3), 1.0).unwrap();
        let r = detailed_balance_residual(&q, &DensityField::uniform(m.volumes())).unwrap();
        assert_eq!(r.max_abs, 0.0);

        let r = detailed_balance_residual(&cyclic(), &DensityField::uniform(&[1.0; 3])).unwrap();
        let (_, _, f01) = r.pairs.iter().find(|e| e.0 == 0 && e.1 == 1).copied().unwrap();
        assert!((f01 - 1.0 / 3.0).abs() < 1e-15);

        let pi = DensityField::from_mass(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let q = build_pi_symmetric(&m, &FaceField::zeros(3), &pi, 1.0).unwrap();
        assert!(detailed_balance_residual(&q, &pi).unwrap().max_abs < 1e-12);
    }

    #[test]
    fn from_rates_validation() {
        assert!(matches!(
            Generator::from_rates(2, &[(0, 2, 1.0)], vec![1.0; 2]),
            Err(Error::InvalidState { state: 2, n: 2 })
        ));
        assert!(Generator::from_rates(2, &[(0, 1, -1.0)], vec![1.0; 2]).is_err());
        assert!(Generator::from_rates(2, &[(0, 0, 1.0)], vec![1.0; 2]).is_err());
        assert!(Generator::from_rates(2, &[(0, 1, 1.0), (0, 1, 2.0)], vec![1.0; 2]).is_err());
        // one-sided rate keeps a zero reverse slot
        let q = Generator::from_rates(2, &[(0, 1, 1.0)], vec![1.0; 2]).unwrap();
        assert_eq!(q.nnz(), 2);
        assert_eq!(q.entry(1, 0), 0.0);
    }

    #[test]
    fn sparse_text_round_trip() {
        let q = cyclic();
        let (n, triplets) = read_sparse_text(&q.to_sparse_text()).unwrap();
        assert_eq!(n, 3);
        assert_eq!(triplets.len(), 9);
        let dense = q.to_dense();
        for (i, j, v) in triplets {
            assert_eq!(dense[i][j], v);
        }
        assert!(read_sparse_text("3 3 0\n").is_err());
    }

    #[test]
    fn ring_mesh_generator() {
        let m = parse_mesh("mesh 3\ncell 0 1 0 0\ncell 1 1 1 0\ncell 2 1 0 1\nface 0 1 1 1 1 0\nface 1 2 1 1 -1 1\nface 2 0 1 1 0 -1\n").unwrap();
        let q = build_upwind(&m, &FaceField::zeros(3), 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(q.entry(i, i), -2.0);
        }
    }
}
