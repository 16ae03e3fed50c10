//! Numerical machinery for constant-scalar-curvature metrics with isolated
//! singularities.
//!
//! The library computes, on the cylinder R x S^{n-1} and in the punctured
//! ball:
//!
//! - [`fowler`]: the periodic Fowler (Delaunay-type) orbits of the radial
//!   equation, their periods, energies, and dense evaluation;
//! - [`model`]: the deformed singular solutions obtained from the radial
//!   ones by the inversion-translation-inversion composition, Kelvin
//!   transforms, spherical solutions, and expansion remainders;
//! - [`floquet`]: the linearized mode operators, explicit Jacobi fields,
//!   monodromy matrices, and indicial roots;
//! - [`pohozaev`]: Pohozaev invariants of singular solutions paired with
//!   conformal Killing fields, by sphere quadrature and in closed form;
//! - [`balance`]: the global balancing equations among the per-singularity
//!   parameters, their residuals, and a least-squares solver;
//! - [`fit`]: recovery of the asymptotic parameters (eps, a, T) from
//!   sampled cylinder data;
//! - [`geometry`]: dimension constants, sphere eigendata, and product
//!   quadrature on S^{n-1}.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the `yamabe` binary exposes the same workflows as file-based subcommands.

pub mod balance;
pub mod cli;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod fowler;
pub mod geometry;
pub mod model;
mod ode;
pub mod pohozaev;

pub use error::{Error, Result};
pub use fowler::{compute_orbit, energy_level, hamiltonian, necksize_from_energy, FowlerOrbit};
pub use geometry::{build_quadrature, integrate_sphere, setup, GeometrySetup, QuadratureRule};
