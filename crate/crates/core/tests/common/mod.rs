//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use fpkfv::mesh::FaceSpec;
use fpkfv::velocity::{cellular_stream, stream_velocity};
use fpkfv::{
    build_b_scheme, build_pi_symmetric, build_structured_grid, build_upwind, sample_drift, BFunction, DensityField,
    FaceField, Generator, GridTopology, Mesh, Rect,
};
use rand::Rng;

/// Structured grid with random size, domain and topology.
pub fn random_grid(rng: &mut impl Rng) -> Mesh {
    let nx = rng.gen_range(3..=9);
    let ny = rng.gen_range(3..=9);
    let x0 = rng.gen_range(-2.0..2.0);
    let y0 = rng.gen_range(-2.0..2.0);
    let domain = Rect::new(x0, x0 + rng.gen_range(0.5..5.0), y0, y0 + rng.gen_range(0.5..5.0));
    let topo = if rng.gen_bool(0.5) {
        GridTopology::Noflux
    } else {
        GridTopology::Periodic
    };
    build_structured_grid(domain, nx, ny, topo).unwrap()
}

/// Connected general 2D mesh: a path through all cells plus random chords,
/// with random volumes, areas and distances.
pub fn random_general(rng: &mut impl Rng) -> Mesh {
    let n = rng.gen_range(4..=15);
    let volumes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let centers: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|k| (k - 1, k)).collect();
    for _ in 0..rng.gen_range(0..n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !pairs.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let faces = pairs
        .into_iter()
        .map(|(i, j)| {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            FaceSpec {
                i,
                j,
                area: rng.gen_range(0.05..1.5),
                distance: rng.gen_range(0.05..1.5),
                normal: vec![t.cos(), t.sin()],
            }
        })
        .collect();
    Mesh::general(2, volumes, centers, faces).unwrap()
}

pub fn random_mesh(rng: &mut impl Rng) -> Mesh {
    if rng.gen_bool(0.75) {
        random_grid(rng)
    } else {
        random_general(rng)
    }
}

/// Smooth random drift with magnitude up to about 10.
pub fn random_drift(rng: &mut impl Rng, mesh: &Mesh) -> FaceField {
    let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
    let w = rng.gen_range(0.2..3.0);
    sample_drift(mesh, move |p: &[f64]| {
        [
            c[0] + c[1] * (w * p[0] + c[4]).sin(),
            c[2] + c[3] * (w * p[1] - c[5]).cos(),
        ]
    })
    .unwrap()
}

/// Random strictly positive unit mass.
pub fn random_mass(rng: &mut impl Rng, n: usize) -> DensityField {
    let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    DensityField::from_mass(m).unwrap().normalized().unwrap()
}

/// Divergence-free velocity: a cellular stream on structured grids, zero on
/// general meshes.
pub fn random_incompressible(rng: &mut impl Rng, mesh: &Mesh) -> FaceField {
    match mesh.structured() {
        Some(g) => {
            let k = rng.gen_range(1..=3) as f64;
            stream_velocity(mesh, cellular_stream(g.domain, rng.gen_range(-5.0..5.0), k)).unwrap()
        }
        None => FaceField::zeros(mesh.n_faces()),
    }
}

/// One of the three constructors, chosen by `which % 3`.
pub fn random_generator(rng: &mut impl Rng, which: usize) -> (Mesh, Generator) {
    let mesh = random_mesh(rng);
    let d = rng.gen_range(0.01..2.0);
    let gen = match which % 3 {
        0 => build_upwind(&mesh, &random_drift(rng, &mesh), d).unwrap(),
        1 => {
            let b = if rng.gen_bool(0.5) {
                BFunction::ScharfetterGummel
            } else {
                BFunction::Upwind
            };
            build_b_scheme(&mesh, &random_drift(rng, &mesh), d, b).unwrap()
        }
        _ => {
            let pi = random_mass(rng, mesh.n_cells());
            let u = random_incompressible(rng, &mesh);
            build_pi_symmetric(&mesh, &u, &pi, d).unwrap()
        }
    };
    (mesh, gen)
}

/// Like [`random_generator`] with the cell Péclet number `|b|h/D` kept below
/// `peclet`, so the steady state stays well inside floating-point range.
pub fn random_tame_generator(rng: &mut impl Rng, which: usize, peclet: f64) -> (Mesh, Generator) {
    let mesh = random_mesh(rng);
    let d = rng.gen_range(0.1..2.0);
    let h = mesh.faces().iter().fold(0.0f64, |a, f| a.max(f.distance));
    let tame = |b: FaceField| {
        let cap = peclet * d / (h * b.max_abs().max(f64::MIN_POSITIVE));
        b.scaled(cap.min(1.0))
    };
    let gen = match which % 3 {
        0 => build_upwind(&mesh, &tame(random_drift(rng, &mesh)), d).unwrap(),
        1 => {
            let b = if rng.gen_bool(0.5) {
                BFunction::ScharfetterGummel
            } else {
                BFunction::Upwind
            };
            build_b_scheme(&mesh, &tame(random_drift(rng, &mesh)), d, b).unwrap()
        }
        _ => {
            let pi = random_mass(rng, mesh.n_cells());
            let u = random_incompressible(rng, &mesh);
            build_pi_symmetric(&mesh, &u, &pi, d).unwrap()
        }
    };
    (mesh, gen)
}
