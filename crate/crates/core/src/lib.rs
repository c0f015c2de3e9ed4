//! Glauber spin dynamics with Kac interaction and a quenched random field.
//!
//! Lattice simulation with exact likelihood weights, the nonlocal hydrodynamic equations,
//! and the pointwise and path costs of the large-deviation rate functional.

pub mod control;
pub mod disorder;
pub mod error;
pub mod experiments;
pub mod girsanov;
pub mod glauber;
pub mod io;
pub mod kernel;
pub mod measures;
pub mod model;
pub mod params;
pub mod pde;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod rate;
pub mod replay;
pub mod spins;
pub mod torus;

pub use disorder::{block_average, sample_disorder, DisorderField};
pub use error::{Error, Result};
pub use glauber::{flip_energy, flip_rate, perturbed_rate, simulate, SimOptions, TrajectoryRecord};
pub use kernel::{build_kernel, build_mesh_kernel, PeriodicKernel};
pub use model::Model;
pub use params::{Color, KernelProfile, KernelSpec, ModelParams};
pub use potential::{FnField, PotentialGrid, SpaceTimeField};
pub use profile::{empirical, time_derivative, ColoredEmpirical, ColoredProfile, PathGrid};
pub use spins::SpinConfig;
pub use torus::Torus;
