//! Effective electrical conductivity of particulate composites.
//!
//! Samples of spheres and cylinders are generated in a periodic unit cell,
//! turned into a contact graph whose edges carry overlap-dependent
//! conductances, and homogenized by solving the Kirchhoff system between two
//! electrode faces. Voxel volumes go through the same solver with voxels as
//! vertices.

// negated float comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod generator;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod montecarlo;
pub mod sample;
pub mod solver;
pub mod sparse;
pub mod voxel;

pub use calibrate::{fit_constants, ConstantKind, ReferencePoint};
pub use config::{parse_config, RunConfig};
pub use generator::{generate_seeded, puff_up, GenerationSpec, Method, PuffOptions};
pub use geometry::{Axis, UnitCell, Vec3};
pub use graph::{build_contact_graph, CalibrationConstants, CircuitGraph, Terminals};
pub use montecarlo::{run_campaign, CampaignConfig};
pub use sample::Sample;
pub use solver::{conductivity_tensor, effective_conductance, ConductivityTensor, SolverOptions};
pub use voxel::{voxel_effective_conductivity, Connectivity, VoxelGrid};
