//! Cell/face geometry consumed by the finite-volume generators.
//!
//! A [`Mesh`] stores each interior face once, for the unordered cell pair
//! `{i, j}`, in the canonical orientation `i < j`. The unit normal is kept for
//! that orientation; the reverse orientation is obtained by negation. Two
//! families of meshes are supported:
//!
//! * structured rectangular grids, with either no-flux walls or periodic wrap;
//! * general meshes ingested from the line-oriented text format (see
//!   [`parse_mesh`]), e.g. precomputed Voronoi tessellations.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    StructuredNoflux,
    StructuredPeriodic,
    General,
}

impl Topology {
    pub fn is_structured(self) -> bool {
        !matches!(self, Topology::General)
    }
}

/// Boundary treatment for [`build_structured_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GridTopology {
    #[default]
    Noflux,
    Periodic,
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Lattice data of a structured grid. Cell `(ix, iy)` has flat index
/// `iy * nx + ix`; corner `(cx, cy)` sits at `(x_min + cx·dx, y_min + cy·dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub periodic: bool,
}

impl StructuredGrid {
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.domain.x_min + (ix as f64 + 0.5) * self.dx,
            self.domain.y_min + (iy as f64 + 0.5) * self.dy,
        ]
    }

    /// Corner coordinates; periodic grids wrap the lattice index first so the
    /// point always lies in the half-open domain.
    pub fn corner(&self, cx: usize, cy: usize) -> [f64; 2] {
        let (cx, cy) = if self.periodic {
            (cx % self.nx, cy % self.ny)
        } else {
            (cx, cy)
        };
        [
            self.domain.x_min + cx as f64 * self.dx,
            self.domain.y_min + cy as f64 * self.dy,
        ]
    }
}

/// An interior face between cells `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub i: usize,
    pub j: usize,
    /// `|Γ_ij|`
    pub area: f64,
    /// `|y_j - y_i|`
    pub distance: f64,
}

/// A wall face of a no-flux structured grid. Carries no flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub area: f64,
    pub normal: [f64; 2],
}

/// Face input for [`Mesh::from_parts`]; orientation may be either way round.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSpec {
    pub i: usize,
    pub j: usize,
    pub area: f64,
    pub distance: f64,
    pub normal: Vec<f64>,
}

/// Corner lattice indices `(start, end)` of a structured face, ordered
/// counterclockwise around the face's first cell.
pub type CornerSegment = [(usize, usize); 2];

#[derive(Debug, Clone)]
pub struct Mesh {
    topology: Topology,
    dim: usize,
    volumes: Vec<f64>,
    centers: Vec<f64>,
    faces: Vec<Face>,
    normals: Vec<f64>,
    face_points: Vec<f64>,
    neighbors: Vec<Vec<(usize, usize)>>,
    boundary: Vec<BoundaryFace>,
    grid: Option<StructuredGrid>,
    segments: Option<Vec<CornerSegment>>,
}

/// Builds a tensor-product grid of `nx × ny` rectangles on `domain`.
pub fn build_structured_grid(domain: Rect, nx: usize, ny: usize, topology: GridTopology) -> Result<Mesh> {
    let finite = [domain.x_min, domain.x_max, domain.y_min, domain.y_max]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.width() <= 0.0 || domain.height() <= 0.0 {
        return Err(Error::InvalidDomain(format!(
            "rectangle [{}, {}] x [{}, {}] has non-positive extent",
            domain.x_min, domain.x_max, domain.y_min, domain.y_max
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidDomain(format!(
            "grid needs at least one cell per axis, got {nx} x {ny}"
        )));
    }
    let periodic = topology == GridTopology::Periodic;
    if periodic && (nx < 3 || ny < 3) {
        // Fewer cells would make a wrap face duplicate an interior pair.
        return Err(Error::InvalidDomain(format!(
            "periodic grids need at least 3 cells per axis, got {nx} x {ny}"
        )));
    }

    let grid = StructuredGrid {
        domain,
        nx,
        ny,
        dx: domain.width() / nx as f64,
        dy: domain.height() / ny as f64,
        periodic,
    };
    let (dx, dy) = (grid.dx, grid.dy);
    let n = nx * ny;

    let mut volumes = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(2 * n);
    for iy in 0..ny {
        for ix in 0..nx {
            volumes.push(dx * dy);
            centers.extend_from_slice(&grid.center(ix, iy));
        }
    }

    let n_faces = if periodic { 2 * n } else { (nx - 1) * ny + nx * (ny - 1) };
    let mut faces = Vec::with_capacity(n_faces);
    let mut normals = Vec::with_capacity(2 * n_faces);
    let mut face_points = Vec::with_capacity(2 * n_faces);
    let mut segments = Vec::with_capacity(n_faces);
    let mut boundary = Vec::new();

    let mut push = |i: usize, j: usize, area: f64, dist: f64, normal: [f64; 2], point: [f64; 2], seg| {
        faces.push(Face {
            i,
            j,
            area,
            distance: dist,
        });
        normals.extend_from_slice(&normal);
        face_points.extend_from_slice(&point);
        segments.push(seg);
    };

    for iy in 0..ny {
        for ix in 0..nx {
            let c = grid.cell_index(ix, iy);
            let [xc, yc] = grid.center(ix, iy);
            let x_east = domain.x_min + (ix + 1) as f64 * dx;
            let y_north = domain.y_min + (iy + 1) as f64 * dy;

            if ix + 1 < nx {
                let e = grid.cell_index(ix + 1, iy);
                push(c, e, dy, dx, [1.0, 0.0], [x_east, yc], [(ix + 1, iy), (ix + 1, iy + 1)]);
            }
            if iy + 1 < ny {
                let nb = grid.cell_index(ix, iy + 1);
                push(
                    c,
                    nb,
                    dx,
                    dy,
                    [0.0, 1.0],
                    [xc, y_north],
                    [(ix + 1, iy + 1), (ix, iy + 1)],
                );
            }
            if periodic {
                if ix == 0 {
                    let w = grid.cell_index(nx - 1, iy);
                    push(c, w, dy, dx, [-1.0, 0.0], [domain.x_min, yc], [(0, iy + 1), (0, iy)]);
                }
                if iy == 0 {
                    let s = grid.cell_index(ix, ny - 1);
                    push(c, s, dx, dy, [0.0, -1.0], [xc, domain.y_min], [(ix, 0), (ix + 1, 0)]);
                }
            } else {
                if ix == 0 {
                    boundary.push(BoundaryFace {
                        cell: c,
                        area: dy,
                        normal: [-1.0, 0.0],
                    });
                }
                if ix + 1 == nx {
                    boundary.push(BoundaryFace {
                        cell: c,
                        area: dy,
                        normal: [1.0, 0.0],
                    });
                }
                if iy == 0 {
                    boundary.push(BoundaryFace {
                        cell: c,
                        area: dx,
                        normal: [0.0, -1.0],
                    });
                }
                if iy + 1 == ny {
                    boundary.push(BoundaryFace {
                        cell: c,
                        area: dx,
                        normal: [0.0, 1.0],
                    });
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), n_faces);

    let neighbors = adjacency(n, &faces);
    Ok(Mesh {
        topology: if periodic {
            Topology::StructuredPeriodic
        } else {
            Topology::StructuredNoflux
        },
        dim: 2,
        volumes,
        centers,
        faces,
        normals,
        face_points,
        neighbors,
        boundary,
        grid: Some(grid),
        segments: Some(segments),
    })
}

fn adjacency(n: usize, faces: &[Face]) -> Vec<Vec<(usize, usize)>> {
    let mut neighbors = vec![Vec::new(); n];
    for (f, face) in faces.iter().enumerate() {
        neighbors[face.i].push((face.j, f));
        neighbors[face.j].push((face.i, f));
    }
    neighbors
}

impl Mesh {
    /// Assembles a general mesh without checking the numerical invariants
    /// (see [`validate_mesh`]); only referential integrity is enforced.
    ///
    /// Faces are canonicalised to `i < j`, negating the normal when flipped.
    pub fn from_parts(dim: usize, volumes: Vec<f64>, centers: Vec<f64>, faces: Vec<FaceSpec>) -> Result<Self> {
        let n = volumes.len();
        if dim == 0 {
            return Err(Error::InvalidMesh("dimension must be positive".into()));
        }
        if centers.len() != n * dim {
            return Err(Error::InvalidMesh(format!(
                "expected {} center coordinates for {n} cells in dimension {dim}, got {}",
                n * dim,
                centers.len()
            )));
        }
        let mut seen = HashSet::with_capacity(faces.len());
        let mut out_faces = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len() * dim);
        let mut face_points = Vec::with_capacity(faces.len() * dim);
        for (f, spec) in faces.into_iter().enumerate() {
            if spec.i >= n || spec.j >= n {
                return Err(Error::InvalidMesh(format!(
                    "face {f} ({} -> {}) references an unknown cell (mesh has {n} cells)",
                    spec.i, spec.j
                )));
            }
            if spec.i == spec.j {
                return Err(Error::InvalidMesh(format!(
                    "face {f} connects cell {} to itself",
                    spec.i
                )));
            }
            if spec.normal.len() != dim {
                return Err(Error::InvalidMesh(format!(
                    "face {f} normal has {} components, expected {dim}",
                    spec.normal.len()
                )));
            }
            let (i, j, sign) = if spec.i < spec.j {
                (spec.i, spec.j, 1.0)
            } else {
                (spec.j, spec.i, -1.0)
            };
            if !seen.insert((i, j)) {
                return Err(Error::InvalidMesh(format!(
                    "face {f} duplicates the cell pair {{{i}, {j}}}"
                )));
            }
            out_faces.push(Face {
                i,
                j,
                area: spec.area,
                distance: spec.distance,
            });
            normals.extend(spec.normal.iter().map(|v| sign * v));
            face_points.extend((0..dim).map(|k| 0.5 * (centers[i * dim + k] + centers[j * dim + k])));
        }
        let neighbors = adjacency(n, &out_faces);
        Ok(Self {
            topology: Topology::General,
            dim,
            volumes,
            centers,
            faces: out_faces,
            normals,
            face_points,
            neighbors,
            boundary: Vec::new(),
            grid: None,
            segments: None,
        })
    }

    /// Like [`Mesh::from_parts`] but rejects meshes with any invariant
    /// violation.
    pub fn general(dim: usize, volumes: Vec<f64>, centers: Vec<f64>, faces: Vec<FaceSpec>) -> Result<Self> {
        let mesh = Self::from_parts(dim, volumes, centers, faces)?;
        let report = validate_mesh(&mesh);
        match report.violations.first() {
            None => Ok(mesh),
            Some(v) => Err(Error::InvalidMesh(v.to_string())),
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn volume(&self, cell: usize) -> f64 {
        self.volumes[cell]
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        &self.centers[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Unit normal of face `f` pointing from `face.i` to `face.j`.
    pub fn normal(&self, f: usize) -> &[f64] {
        &self.normals[f * self.dim..(f + 1) * self.dim]
    }

    /// Point at which face quantities are sampled: the face midpoint on
    /// structured grids, the midpoint of the center segment otherwise.
    pub fn face_point(&self, f: usize) -> &[f64] {
        &self.face_points[f * self.dim..(f + 1) * self.dim]
    }

    /// `VF(i)` as `(neighbor, face index)` pairs.
    pub fn neighbors(&self, cell: usize) -> &[(usize, usize)] {
        &self.neighbors[cell]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn structured(&self) -> Option<&StructuredGrid> {
        self.grid.as_ref()
    }

    pub fn corner_segment(&self, f: usize) -> Option<CornerSegment> {
        self.segments.as_ref().map(|s| s[f])
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Overwrites one cell volume. Intended for constructing invalid meshes in
    /// tests of [`validate_mesh`].
    pub fn set_volume(&mut self, cell: usize, volume: f64) {
        self.volumes[cell] = volume;
    }

    /// Writes the mesh in the text format understood by [`parse_mesh`].
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "mesh {}", self.n_cells());
        for c in 0..self.n_cells() {
            let _ = write!(out, "cell {c} {:e}", self.volumes[c]);
            for x in self.center(c) {
                let _ = write!(out, " {x:e}");
            }
            out.push('\n');
        }
        for (f, face) in self.faces.iter().enumerate() {
            let _ = write!(out, "face {} {} {:e} {:e}", face.i, face.j, face.area, face.distance);
            for x in self.normal(f) {
                let _ = write!(out, " {x:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// `h`: `max(Δx, Δy)` on structured grids, the largest center distance on
/// general meshes (cell diameters are not stored).
pub fn mesh_resolution(mesh: &Mesh) -> f64 {
    if let Some(g) = mesh.structured() {
        return g.dx.max(g.dy);
    }
    mesh.faces.iter().map(|f| f.distance).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveVolume { cell: usize, value: f64 },
    NonPositiveArea { face: usize, value: f64 },
    NonPositiveDistance { face: usize, value: f64 },
    NonFiniteGeometry { entity: String },
    AsymmetricAdjacency { i: usize, j: usize },
    Disconnected { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveVolume { cell, value } => {
                write!(f, "cell {cell} has non-positive volume {value}")
            }
            Violation::NonPositiveArea { face, value } => {
                write!(f, "face {face} has non-positive area {value}")
            }
            Violation::NonPositiveDistance { face, value } => {
                write!(f, "face {face} has non-positive center distance {value}")
            }
            Violation::NonFiniteGeometry { entity } => write!(f, "{entity} has non-finite geometry"),
            Violation::AsymmetricAdjacency { i, j } => {
                write!(f, "cell {j} is adjacent to {i} but not vice versa")
            }
            Violation::Disconnected { components } => {
                write!(f, "face graph is disconnected ({components} components)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub violations: Vec<Violation>,
    /// `Σ_i Σ_{j∈VF(i)} |Γ_ij| |y_j − y_i|`, summed over both orientations.
    pub area_distance_sum: f64,
}

impl MeshReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_mesh(mesh: &Mesh) -> MeshReport {
    let mut violations = Vec::new();
    for (c, &v) in mesh.volumes.iter().enumerate() {
        if !v.is_finite() {
            violations.push(Violation::NonFiniteGeometry {
                entity: format!("cell {c}"),
            });
        } else if v <= 0.0 {
            violations.push(Violation::NonPositiveVolume { cell: c, value: v });
        }
    }
    if mesh.centers.iter().any(|x| !x.is_finite()) {
        violations.push(Violation::NonFiniteGeometry {
            entity: "cell centers".into(),
        });
    }
    for (f, face) in mesh.faces.iter().enumerate() {
        if !face.area.is_finite() || !face.distance.is_finite() || mesh.normal(f).iter().any(|x| !x.is_finite()) {
            violations.push(Violation::NonFiniteGeometry {
                entity: format!("face {f}"),
            });
            continue;
        }
        if face.area <= 0.0 {
            violations.push(Violation::NonPositiveArea {
                face: f,
                value: face.area,
            });
        }
        if face.distance <= 0.0 {
            violations.push(Violation::NonPositiveDistance {
                face: f,
                value: face.distance,
            });
        }
    }
    for (i, nbrs) in mesh.neighbors.iter().enumerate() {
        for &(j, _) in nbrs {
            if !mesh.neighbors[j].iter().any(|&(k, _)| k == i) {
                violations.push(Violation::AsymmetricAdjacency { i, j });
            }
        }
    }
    let components = count_components(mesh);
    if components > 1 {
        violations.push(Violation::Disconnected { components });
    }
    let area_distance_sum = 2.0 * mesh.faces.iter().map(|f| f.area * f.distance).sum::<f64>();
    MeshReport {
        violations,
        area_distance_sum,
    }
}

fn count_components(mesh: &Mesh) -> usize {
    let n = mesh.n_cells();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for &(nb, _) in &mesh.neighbors[c] {
                if !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    components
}

/// Parses the line-oriented mesh format:
///
/// ```text
/// # comment
/// mesh <n_cells>
/// cell <id> <volume> <center coords...>
/// face <i> <j> <area> <distance> <normal coords...>
/// ```
///
/// The result is validated; any violation is reported as an error.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut n_cells: Option<usize> = None;
    let mut dim: Option<usize> = None;
    let mut volumes: Vec<Option<f64>> = Vec::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut faces = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::MeshParse { line, message };
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();
        match keyword {
            "mesh" => {
                if n_cells.is_some() {
                    return Err(err("duplicate `mesh` header".into()));
                }
                let [count] = rest.as_slice() else {
                    return Err(err("expected `mesh <n_cells>`".into()));
                };
                let n: usize = count
                    .parse()
                    .map_err(|_| err(format!("invalid cell count `{count}`")))?;
                n_cells = Some(n);
                volumes = vec![None; n];
                centers = vec![Vec::new(); n];
            }
            "cell" => {
                let n = n_cells.ok_or_else(|| err("`cell` before `mesh` header".into()))?;
                if rest.len() < 3 {
                    return Err(err("expected `cell <id> <volume> <coords...>`".into()));
                }
                let id: usize = rest[0]
                    .parse()
                    .map_err(|_| err(format!("invalid cell id `{}`", rest[0])))?;
                if id >= n {
                    return Err(err(format!("cell id {id} out of range (mesh has {n} cells)")));
                }
                if volumes[id].is_some() {
                    return Err(err(format!("cell {id} defined twice")));
                }
                let vol = parse_f64(rest[1]).map_err(&err)?;
                let coords = rest[2..]
                    .iter()
                    .map(|t| parse_f64(t))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(&err)?;
                match dim {
                    None => dim = Some(coords.len()),
                    Some(d) if d != coords.len() => {
                        return Err(err(format!("cell {id} has {} coordinates, expected {d}", coords.len())))
                    }
                    _ => {}
                }
                volumes[id] = Some(vol);
                centers[id] = coords;
            }
            "face" => {
                let n = n_cells.ok_or_else(|| err("`face` before `mesh` header".into()))?;
                if rest.len() < 5 {
                    return Err(err("expected `face <i> <j> <area> <distance> <normal...>`".into()));
                }
                let i: usize = rest[0]
                    .parse()
                    .map_err(|_| err(format!("invalid cell id `{}`", rest[0])))?;
                let j: usize = rest[1]
                    .parse()
                    .map_err(|_| err(format!("invalid cell id `{}`", rest[1])))?;
                let face_id = faces.len();
                if i >= n || j >= n {
                    return Err(err(format!("face {face_id} ({i} -> {j}) references an unknown cell")));
                }
                let area = parse_f64(rest[2]).map_err(&err)?;
                let distance = parse_f64(rest[3]).map_err(&err)?;
                let normal = rest[4..]
                    .iter()
                    .map(|t| parse_f64(t))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(&err)?;
                faces.push(FaceSpec {
                    i,
                    j,
                    area,
                    distance,
                    normal,
                });
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }

    let n = n_cells.ok_or(Error::MeshParse {
        line: 0,
        message: "missing `mesh` header".into(),
    })?;
    if let Some(missing) = volumes.iter().position(Option::is_none) {
        return Err(Error::InvalidMesh(format!("cell {missing} is never defined")));
    }
    let dim = dim.unwrap_or(if n == 0 { 1 } else { 0 });
    let volumes: Vec<f64> = volumes.into_iter().map(Option::unwrap).collect();
    let centers: Vec<f64> = centers.into_iter().flatten().collect();
    Mesh::general(dim, volumes, centers, faces)
}

fn parse_f64(token: &str) -> std::result::Result<f64, String> {
    token.parse::<f64>().map_err(|_| format!("invalid number `{token}`"))
}

/// Reads and validates a mesh file; see [`parse_mesh`] for the format.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(distances: [f64; 3]) -> String {
        format!(
            "# three cells on a ring\nmesh 3\ncell 0 1 0 0\ncell 1 1 1 0\ncell 2 1 0 1\n\
             face 0 1 1 {} 1 0\nface 1 2 1 {} -1 1\nface 2 0 1 {} 0 -1\n",
            distances[0], distances[1], distances[2]
        )
    }

    #[test]
    fn sampling_grid_counts() {
        let mesh = build_structured_grid(Rect::square(-4.5, 4.5), 100, 100, GridTopology::Noflux).unwrap();
        assert_eq!(mesh.n_cells(), 10_000);
        assert_eq!(mesh.n_faces(), 19_800);
        assert_eq!(mesh.boundary_faces().len(), 400);
        let g = mesh.structured().unwrap();
        assert!((g.dx - 0.09).abs() < 1e-15 && (g.dy - 0.09).abs() < 1e-15);
    }

    #[test]
    fn single_cell_grid() {
        let mesh = build_structured_grid(Rect::square(0.0, 1.0), 1, 1, GridTopology::Noflux).unwrap();
        assert_eq!(mesh.n_cells(), 1);
        assert_eq!(mesh.n_faces(), 0);
        assert_eq!(mesh.boundary_faces().len(), 4);
        assert!(validate_mesh(&mesh).is_valid());
    }

    #[test]
    fn face_counts_match_formula() {
        for (nx, ny) in [(3, 3), (4, 7), (10, 5)] {
            let d = Rect::new(0.0, 2.0, -1.0, 1.0);
            let nf = build_structured_grid(d, nx, ny, GridTopology::Noflux).unwrap();
            assert_eq!(nf.n_faces(), nx * (ny - 1) + ny * (nx - 1));
            let p = build_structured_grid(d, nx, ny, GridTopology::Periodic).unwrap();
            assert_eq!(p.n_faces(), 2 * nx * ny);
            assert!(p.boundary_faces().is_empty());
            for m in [&nf, &p] {
                let total = m.total_volume();
                assert!((total - d.area()).abs() <= 1e-12 * d.area());
                assert!(validate_mesh(m).is_valid());
            }
        }
    }

    #[test]
    fn cell_centers_follow_lattice() {
        let mesh = build_structured_grid(Rect::new(-3.0, 4.0, -3.0, 3.0), 100, 100, GridTopology::Noflux).unwrap();
        let g = mesh.structured().unwrap();
        let c = mesh.center(g.cell_index(0, 0));
        assert!((c[0] - (-3.0 + 0.035)).abs() < 1e-12);
        assert!((c[1] - (-3.0 + 0.03)).abs() < 1e-12);
        let c = mesh.center(g.cell_index(99, 99));
        assert!((c[0] - (4.0 - 0.035)).abs() < 1e-12);
    }

    #[test]
    fn invalid_domain_rejected() {
        for d in [Rect::new(1.0, 1.0, 0.0, 1.0), Rect::new(0.0, 1.0, 2.0, 1.0)] {
            assert!(matches!(
                build_structured_grid(d, 4, 4, GridTopology::Noflux),
                Err(Error::InvalidDomain(_))
            ));
        }
        assert!(build_structured_grid(Rect::square(0.0, 1.0), 0, 4, GridTopology::Noflux).is_err());
        assert!(build_structured_grid(Rect::square(0.0, 1.0), 2, 4, GridTopology::Periodic).is_err());
    }

    #[test]
    fn resolution_examples() {
        let m = build_structured_grid(Rect::new(-3.0, 4.0, -3.0, 3.0), 100, 100, GridTopology::Noflux).unwrap();
        assert!((mesh_resolution(&m) - 0.07).abs() < 1e-14);
        let m = build_structured_grid(Rect::square(0.0, 1.0), 1, 1, GridTopology::Noflux).unwrap();
        assert_eq!(mesh_resolution(&m), 1.0);
        let m = parse_mesh(&ring([1.0, 2.0, 1.0])).unwrap();
        assert_eq!(mesh_resolution(&m), 2.0);
    }

    #[test]
    fn resolution_halves_under_refinement() {
        let d = Rect::new(0.0, 3.0, 0.0, 2.0);
        let coarse = build_structured_grid(d, 6, 5, GridTopology::Noflux).unwrap();
        let fine = build_structured_grid(d, 12, 10, GridTopology::Noflux).unwrap();
        assert!((mesh_resolution(&coarse) - 2.0 * mesh_resolution(&fine)).abs() < 1e-15);
    }

    #[test]
    fn ring_mesh_parses() {
        let m = parse_mesh(&ring([1.0, 1.0, 1.0])).unwrap();
        assert_eq!(m.topology(), Topology::General);
        assert_eq!(m.n_cells(), 3);
        assert_eq!(m.n_faces(), 3);
        for c in 0..3 {
            assert_eq!(m.neighbors(c).len(), 2);
        }
        // face "2 0" is stored as 0 -> 2 with its normal negated
        let f = m.faces().iter().position(|f| f.i == 0 && f.j == 2).unwrap();
        assert_eq!(m.normal(f), &[0.0, 1.0]);
    }

    #[test]
    fn unknown_cell_names_face() {
        let text = "mesh 2\ncell 0 1 0\ncell 1 1 1\nface 0 1 1 1 1\nface 1 5 1 1 1\n";
        let err = parse_mesh(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::MeshParse { line: 5, .. }), "{msg}");
        assert!(msg.contains("face 1"), "{msg}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_mesh("mesh 1\ncell 0 abc 0\n").unwrap_err();
        assert!(matches!(err, Error::MeshParse { line: 2, .. }));
        let err = parse_mesh("cell 0 1 0\n").unwrap_err();
        assert!(matches!(err, Error::MeshParse { line: 1, .. }));
        let err = parse_mesh("mesh 1\nedge 0 1\n").unwrap_err();
        assert!(matches!(err, Error::MeshParse { line: 2, .. }));
    }

    #[test]
    fn disconnected_mesh_rejected() {
        let text = "mesh 4\ncell 0 1 0\ncell 1 1 1\ncell 2 1 5\ncell 3 1 6\nface 0 1 1 1 1\nface 2 3 1 1 1\n";
        let err = parse_mesh(text).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn injected_negative_volume_is_reported_once() {
        let mut m = build_structured_grid(Rect::square(0.0, 1.0), 4, 4, GridTopology::Noflux).unwrap();
        m.set_volume(5, -0.1);
        let report = validate_mesh(&m);
        assert_eq!(
            report.violations,
            vec![Violation::NonPositiveVolume { cell: 5, value: -0.1 }]
        );
    }

    #[test]
    fn area_distance_sum_by_direct_summation() {
        let m = build_structured_grid(Rect::square(-4.5, 4.5), 100, 100, GridTopology::Noflux).unwrap();
        let report = validate_mesh(&m);
        let expected = 2.0 * 19_800.0 * 0.09 * 0.09;
        assert!((report.area_distance_sum - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn text_round_trip() {
        let m = build_structured_grid(Rect::new(0.0, 2.0, 0.0, 1.0), 3, 4, GridTopology::Noflux).unwrap();
        let back = parse_mesh(&m.to_text()).unwrap();
        assert_eq!(back.n_cells(), m.n_cells());
        assert_eq!(back.faces(), m.faces());
        for f in 0..m.n_faces() {
            assert_eq!(back.normal(f), m.normal(f));
        }
    }
}
