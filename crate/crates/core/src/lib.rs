//! Finite-volume Fokker–Planck toolkit.
//!
//! Builds Q-matrix generators for drift–diffusion processes on cell meshes,
//! evolves probability masses with an unconditionally stable explicit step,
//! computes steady states and the π-symmetric flux decomposition, and samples
//! the induced jump process.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod convergence;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod generator;
pub mod integrator;
pub mod mesh;
pub mod randomwalk;
pub mod scenarios;
pub mod steady;
pub mod velocity;

pub use density::DensityField;
pub use error::{Error, Result};
pub use generator::{
    build_b_scheme, build_pi_symmetric, build_upwind, detailed_balance_residual, jump_chain, BFunction, Generator,
    JumpChain, Scheme,
};
pub use mesh::{
    build_structured_grid, load_mesh, mesh_resolution, parse_mesh, validate_mesh, GridTopology, Mesh, Rect,
};
pub use velocity::{sample_drift, split_pm, stream_velocity, FaceField, FlowSpec};
