//! Error type shared by every module.

use alloc::string::String;
use core::fmt;

/// Everything that can go wrong while building kernels, grids, stencils,
/// operators, or running an analysis routine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Kernel exponent β ≤ 1 − d makes |z|^{β−1} non-integrable at the origin.
    NonIntegrableExponent { beta: f64, dimension: usize },
    /// The kernel's first moment vanishes, so no scaling constant exists.
    DegenerateFirstMoment,
    /// A kernel parameter is outside its admissible range.
    InvalidKernel(String),
    /// Domain bounds are empty, or δ leaves no interior (Ω₋δ empty).
    DegenerateDomain(String),
    /// δ/h must be a positive integer; the requested resolution is not.
    ResolutionTooCoarse { n_per_delta: usize },
    /// Kernel δ and grid δ disagree.
    IncompatibleHorizon { kernel_delta: f64, grid_delta: f64 },
    /// Two grid functions (or a function and an operator) live on different grids.
    GridMismatch,
    /// A slice length does not match the node count it must cover.
    LengthMismatch { expected: usize, got: usize },
    /// An operation requires an antisymmetric kernel.
    NotAntisymmetric,
    /// The peridynamic shape tensor is numerically singular.
    SingularShapeTensor { det: f64 },
    /// The adaptive reference integrator exhausted its budget before
    /// reaching the requested tolerance.
    QuadratureFailure { achieved: f64, requested: f64 },
    /// Dense spectral probes are limited to modest matrix sizes.
    ProbeTooLarge { nodes: usize, limit: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonIntegrableExponent { beta, dimension } => write!(
                f,
                "kernel exponent beta = {beta} is not integrable in dimension {dimension} (requires beta > 1 - d)"
            ),
            Error::DegenerateFirstMoment => {
                write!(f, "kernel first moment vanishes; no normalizing constant exists")
            }
            Error::InvalidKernel(msg) => write!(f, "invalid kernel: {msg}"),
            Error::DegenerateDomain(msg) => write!(f, "degenerate domain: {msg}"),
            Error::ResolutionTooCoarse { n_per_delta } => {
                write!(f, "n_per_delta = {n_per_delta} is too coarse (need at least 2)")
            }
            Error::IncompatibleHorizon { kernel_delta, grid_delta } => write!(
                f,
                "kernel horizon {kernel_delta} does not match grid horizon {grid_delta}"
            ),
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::NotAntisymmetric => write!(f, "operation requires an antisymmetric kernel"),
            Error::SingularShapeTensor { det } => {
                write!(f, "shape tensor is numerically singular (det = {det:e})")
            }
            Error::QuadratureFailure { achieved, requested } => write!(
                f,
                "adaptive integration stalled at error {achieved:e} (requested {requested:e})"
            ),
            Error::ProbeTooLarge { nodes, limit } => {
                write!(f, "dense spectral probe limited to {limit} nodes, got {nodes}")
            }
        }
    }
}

impl core::error::Error for Error {}
