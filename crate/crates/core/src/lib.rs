//! Nonlocal one-point derivatives on bounded domains with volumetric collars.
//!
//! The toolkit discretizes operators of the form
//!
//! ```text
//! D u(x) = ∫ [u(x + z) − u(x)] μ(z) dz
//! ```
//!
//! where the kernel μ is integrable (possibly singular at the origin and
//! asymmetric) and supported in a ball of radius δ. Functions live on a
//! cell-centered lattice covering the domain Ω plus a collar of width δ;
//! extension by zero and restriction move data between Ω and the padded
//! domain. Quadrature stencils reproduce kernel moments exactly through
//! total degree six, so affine fields differentiate exactly and observed
//! convergence rates reflect the kernel, not the mesh.
//!
//! Modules:
//! - [`kernel`]: kernel families, moments, scaling constants, symmetry splits
//! - [`geometry`]: domains, collars, grids, grid functions, norms
//! - [`quadrature`]: stencil construction and a reference integrator
//! - [`operator`]: assembled operators, adjoints, vector calculus
//! - [`analysis`]: convergence studies, spectral probes, identity checks
//!
//! The crate is `no_std` (with `alloc`); all floating-point math routes
//! through `libm` and dense linear algebra through `nalgebra`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod operator;
pub mod quadrature;

pub use error::Error;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Library version, stamped into experiment output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
