//! Numerical experiments over the discrete operators: strong and weak
//! convergence sweeps, integration-by-parts residuals, dense spectral
//! probes, compactness decay, Poincaré ratios, the oscillation bound, and
//! the kink figure tables.
//!
//! Everything here is deterministic. Sweeps own their grids and operators,
//! and the dense linear algebra runs on matrices rebuilt from the same
//! inputs every time.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, exp, fabs, log, log2, pow, round, sin};
use nalgebra::{Complex, DMatrix};

use crate::error::Error;
use crate::geometry::{Domain, Grid, GridFunction, Support};
use crate::kernel::KernelSpec;
use crate::operator::NonlocalOperator;
use crate::quadrature::{adaptive_integral, reference_integrate, StencilOrder};
use crate::Result;

/// Dense eigen- and SVD probes refuse Ω-node counts above this.
const DENSE_LIMIT: usize = 4096;

/// Slope fits use the last four sweep points.
const FIT_WINDOW: usize = 4;

/// Norm attached to a convergence report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    /// Cell-sum L^p norm over Ω; `f64::INFINITY` selects the max norm.
    Lp(f64),
    /// Absolute error at a single sample point.
    Pointwise(f64),
    /// Duality residual against a test function supported in [lo, hi].
    Duality { lo: f64, hi: f64 },
}

/// Errors per horizon together with fitted and predicted decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Horizons, strictly decreasing.
    pub deltas: Vec<f64>,
    /// One positive error per horizon, measured in `norm`.
    pub errors: Vec<f64>,
    /// Least-squares slope of ln(error) against ln(δ) over the fit window.
    pub fitted_order: f64,
    /// Rate read off the kernel's first surviving Taylor moment; infinite
    /// when every probed moment vanishes.
    pub predicted_order: f64,
    pub norm: NormSpec,
}

/// Singular-value and eigenvalue data from dense probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Probed sizes: Ω-nodes per unit length for sweeps, matrix dimension
    /// for single-grid eigen-probes.
    pub grid_sizes: Vec<usize>,
    /// σ_min of the collar-zeroed submatrix per size, nonnegative.
    pub min_singular_values: Vec<f64>,
    /// σ_max per size, the matrix 2-norm that scales axis tolerances.
    pub max_singular_values: Vec<f64>,
    /// Eigenvalues when the probe computes them, empty for SVD sweeps.
    pub spectrum_sample: Vec<Complex<f64>>,
    /// ∫μ of the continuum kernel, the compactness discriminant.
    pub kernel_mean: f64,
}

/// Which block of the operator matrix an eigen-probe inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// All lattice nodes, collar rows included (they are zero).
    Full,
    /// The Ω×Ω submatrix, collar data frozen to zero.
    ZeroOnCollar,
}

impl Subspace {
    pub fn parse(name: &str) -> Option<Subspace> {
        match name {
            "full" => Some(Subspace::Full),
            "zero-on-collar" | "omega" => Some(Subspace::ZeroOnCollar),
            _ => None,
        }
    }
}

/// The two kink profiles with published operator plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// u(x) = |x − 1/2|, bounded one-sided slopes.
    AbsVal,
    /// u(x) = |x − 1/2|^{2/3}, unbounded classical derivative.
    Cusp,
}

impl FigureKind {
    pub fn parse(name: &str) -> Option<FigureKind> {
        match name {
            "absval" | "abs-val" | "abs" => Some(FigureKind::AbsVal),
            "cusp" => Some(FigureKind::Cusp),
            _ => None,
        }
    }
}

/// Sampled columns for a kink figure: x, u(x), u′(x), and the discrete
/// nonlocal derivative, plus the kink-point value by reference quadrature
/// (the kink sits on a cell edge, never on a node).
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub delta: f64,
    pub xs: Vec<f64>,
    pub u_values: Vec<f64>,
    /// Classical derivative where defined; the kink is never sampled.
    pub derivative_values: Vec<f64>,
    pub nonlocal_values: Vec<f64>,
    /// Nonlocal derivative at the kink itself, by adaptive quadrature.
    pub kink_value: f64,
}

impl FigureTable {
    /// max |D̄u − u′| over nodes with |x − 1/2| > 2δ, where the profile is
    /// smooth across the whole interaction ball.
    pub fn smooth_region_mismatch(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &x) in self.xs.iter().enumerate() {
            if fabs(x - 0.5) > 2.0 * self.delta {
                worst = worst.max(fabs(self.nonlocal_values[i] - self.derivative_values[i]));
            }
        }
        worst
    }

    /// max |D̄u| anywhere divided by max |D̄u| over the smooth region;
    /// near 1 means the kink does not amplify the operator.
    pub fn kink_amplification(&self) -> f64 {
        let mut smooth = 0.0f64;
        let mut global = 0.0f64;
        for (i, &x) in self.xs.iter().enumerate() {
            let v = fabs(self.nonlocal_values[i]);
            global = global.max(v);
            if fabs(x - 0.5) > 2.0 * self.delta {
                smooth = smooth.max(v);
            }
        }
        global / smooth
    }
}

/// |D_δu(0)| for the oscillating profile against its a-priori bound.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// (2/3)δ per horizon.
    pub bounds: Vec<f64>,
}

impl OscillationReport {
    pub fn within_bounds(&self) -> bool {
        self.values
            .iter()
            .zip(&self.bounds)
            .all(|(v, b)| v <= b)
    }
}

/// The C^∞ bump exp(−1/(1−t²)), t = (x−center)/width, zero outside
/// |t| < 1. The standard duality test function; left unnormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(center: f64, width: f64) -> Bump {
        Bump { center, width }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.width;
        if fabs(t) < 1.0 {
            exp(-1.0 / (1.0 - t * t))
        } else {
            0.0
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.width;
        if fabs(t) < 1.0 {
            let s = 1.0 - t * t;
            exp(-1.0 / s) * (-2.0 * t / (s * s)) / self.width
        } else {
            0.0
        }
    }
}

/// Named one-dimensional test profiles shared by the studies and the
/// command line. The collar wave needs the horizon; the others ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 0.7 + 2x.
    Affine,
    /// sin(3x).
    Sin3,
    /// |x − 1/2|.
    AbsKink,
    /// |x − 1/2|^{2/3}.
    CuspKink,
    /// x² sin(1/x), continued by 0 at the origin.
    OscillatingSquare,
    /// sin(2πx/δ), a discrete near-null field.
    CollarWave,
    /// χ_{x > 1/2}, merely integrable.
    Step,
}

impl Profile {
    pub fn parse(name: &str) -> Option<Profile> {
        match name {
            "affine" => Some(Profile::Affine),
            "sin(3x)" | "sin3x" => Some(Profile::Sin3),
            "|x-0.5|" | "abs" => Some(Profile::AbsKink),
            "|x-0.5|^{2/3}" | "|x-0.5|^(2/3)" | "cusp" => Some(Profile::CuspKink),
            "x^2sin(1/x)" | "x2sin(1/x)" | "oscillation" => Some(Profile::OscillatingSquare),
            "sin(2pix/delta)" | "collar-wave" => Some(Profile::CollarWave),
            "step" => Some(Profile::Step),
            _ => None,
        }
    }

    pub fn eval(self, x: f64, delta: f64) -> f64 {
        match self {
            Profile::Affine => 0.7 + 2.0 * x,
            Profile::Sin3 => sin(3.0 * x),
            Profile::AbsKink => fabs(x - 0.5),
            Profile::CuspKink => pow(fabs(x - 0.5), 2.0 / 3.0),
            Profile::OscillatingSquare => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x * sin(1.0 / x)
                }
            }
            Profile::CollarWave => sin(2.0 * core::f64::consts::PI * x / delta),
            Profile::Step => {
                if x > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Classical derivative; kinks return 0 at the kink itself, which the
    /// cell-centered lattices never sample.
    pub fn derivative(self, x: f64, delta: f64) -> f64 {
        match self {
            Profile::Affine => 2.0,
            Profile::Sin3 => 3.0 * cos(3.0 * x),
            Profile::AbsKink => {
                if x == 0.5 {
                    0.0
                } else if x > 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Profile::CuspKink => {
                if x == 0.5 {
                    0.0
                } else {
                    let s = if x > 0.5 { 1.0 } else { -1.0 };
                    s * (2.0 / 3.0) * pow(fabs(x - 0.5), -1.0 / 3.0)
                }
            }
            Profile::OscillatingSquare => {
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * x * sin(1.0 / x) - cos(1.0 / x)
                }
            }
            Profile::CollarWave => {
                let w = 2.0 * core::f64::consts::PI / delta;
                w * cos(w * x)
            }
            Profile::Step => 0.0,
        }
    }

    /// Whether the pointwise derivative exists off the kink set; the step
    /// profile only differentiates distributionally.
    pub fn has_classical_derivative(self) -> bool {
        !matches!(self, Profile::Step)
    }
}

/// ‖D_δu − a·∇u‖ over a shrinking-horizon sweep on an interval, sampling
/// u exactly and comparing against the scaled classical derivative. The
/// grid refines with the horizon (n = max(8, round(0.4/δ))) so stencil
/// error stays subdominant to the δ-rate under measurement.
pub fn strong_convergence_study(
    domain: &Domain,
    u: impl Fn(f64) -> f64,
    grad_u: impl Fn(f64) -> f64,
    kernel_for: impl Fn(f64) -> Result<KernelSpec>,
    deltas: &[f64],
    p: f64,
    order: StencilOrder,
) -> Result<ConvergenceReport> {
    check_sweep(domain, deltas)?;
    if !(p >= 1.0) {
        return Err(Error::DegenerateDomain(String::from(
            "Lp exponent must be at least 1",
        )));
    }
    let mut errors = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let kernel = kernel_for(delta)?;
        let grid = Grid::build(domain.clone(), delta, resolution_for(delta))?;
        let op = NonlocalOperator::assemble(&kernel, &grid, order)?;
        let a = kernel.moment_1d(1);
        let uh = GridFunction::sample(&grid, Support::OnOmegaDelta, |x| u(x[0]));
        let du = op.apply(&uh)?;
        let mut pointwise = Vec::with_capacity(grid.omega_count());
        for (o, &d) in du.values().iter().enumerate() {
            let x = grid.coords(grid.omega_flat(o))[0];
            pointwise.push(d - a * grad_u(x));
        }
        errors.push(positive_floor(omega_lp_norm(&pointwise, grid.h(), p)));
    }
    Ok(ConvergenceReport {
        fitted_order: log_log_slope(deltas, &errors, FIT_WINDOW),
        predicted_order: predicted_order(&kernel_for, deltas[0])?,
        deltas: deltas.to_vec(),
        errors,
        norm: NormSpec::Lp(p),
    })
}

/// Duality residual |⟨D_δu, φ⟩ + ⟨u, a·φ′⟩| over a horizon sweep. u only
/// needs to be integrable; φ must be smooth with support inside the
/// δ-interior for the widest horizon, passed as [lo, hi].
pub fn weak_convergence_study(
    domain: &Domain,
    u: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> f64,
    grad_phi: impl Fn(f64) -> f64,
    phi_support: (f64, f64),
    kernel_for: impl Fn(f64) -> Result<KernelSpec>,
    deltas: &[f64],
    order: StencilOrder,
) -> Result<ConvergenceReport> {
    check_sweep(domain, deltas)?;
    let (lo, hi) = phi_support;
    if !(lo < hi) || lo <= domain.lo(0) + deltas[0] || hi >= domain.hi(0) - deltas[0] {
        return Err(Error::DegenerateDomain(String::from(
            "test function support must sit inside the delta-interior",
        )));
    }
    let mut errors = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let kernel = kernel_for(delta)?;
        let grid = Grid::build(domain.clone(), delta, resolution_for(delta))?;
        let op = NonlocalOperator::assemble(&kernel, &grid, order)?;
        let a = kernel.moment_1d(1);
        let uh = GridFunction::sample(&grid, Support::OnOmegaDelta, |x| u(x[0]));
        let du = op.apply(&uh)?;
        let mut forward = 0.0;
        for (o, &d) in du.values().iter().enumerate() {
            let x = grid.coords(grid.omega_flat(o))[0];
            forward += d * phi(x);
        }
        // φ′ vanishes on and near the collar, so the sum over every node
        // is the pairing over Ω_δ
        let mut back = 0.0;
        for flat in 0..grid.node_count() {
            back += uh.at_flat(flat) * grad_phi(grid.coords(flat)[0]);
        }
        errors.push(positive_floor(fabs((forward + a * back) * grid.h())));
    }
    Ok(ConvergenceReport {
        fitted_order: log_log_slope(deltas, &errors, FIT_WINDOW),
        predicted_order: predicted_order(&kernel_for, deltas[0])?,
        deltas: deltas.to_vec(),
        errors,
        norm: NormSpec::Duality { lo, hi },
    })
}

/// Residuals of the three summation-by-parts identities: the symmetric
/// part against its collar commutator, the antisymmetric part against its
/// collar anticommutator, and the combined display. Discretely these are
/// matrix identities, so each residual is pure roundoff.
pub fn ibp_residual(
    u: &GridFunction,
    v: &GridFunction,
    kernel: &KernelSpec,
    grid: &Grid,
    order: StencilOrder,
) -> Result<(f64, f64, f64)> {
    if u.grid() != grid || v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let full = NonlocalOperator::assemble(kernel, grid, order)?;
    let (sym_part, anti_part) = full.stencil().parity_parts();
    let ds = NonlocalOperator::with_stencil(sym_part, grid)?;
    let da = NonlocalOperator::with_stencil(anti_part, grid)?;

    let hd = pow(grid.h(), grid.dimension() as f64);
    let uo = u.project_to_omega();
    let vo = v.project_to_omega();
    // GridFunction::dot already carries the h^d cell measure
    let pair = |a: &GridFunction, b: &GridFunction| -> Result<f64> { a.dot(b) };

    let dsu = ds.apply(u)?;
    let dsv = ds.apply(v)?;
    let dau = da.apply(u)?;
    let dav = da.apply(v)?;
    let du = full.apply(u)?;
    let dv = full.apply(v)?;

    let lhs_sym = pair(&dsu, &vo)? - pair(&uo, &dsv)?;
    let lhs_anti = pair(&dau, &vo)? + pair(&uo, &dav)?;
    let lhs_full = pair(&du, &vo)? + pair(&uo, &dv)?;

    // one pass over Γ_{−δ} × Γ_δ pairs serves all three displays
    let stride = grid.extent(1) as isize;
    let (mut r_sym, mut r_anti, mut r_full) = (0.0, 0.0, 0.0);
    for x in grid.boundary_layer_flats() {
        let ux = u.at_flat(x);
        let vx = v.at_flat(x);
        for ((k1, k2), w) in full.stencil().iter() {
            let y = (x as isize + k1 * stride + k2) as usize;
            if grid.is_omega(y) {
                continue;
            }
            let uy = u.at_flat(y);
            let vy = v.at_flat(y);
            let ws = ds.stencil().weight(k1, k2);
            let wa = da.stencil().weight(k1, k2);
            r_sym += ws * (uy * vx - ux * vy);
            r_anti += wa * (uy * vx + ux * vy);
            r_full += w * (uy * vx + ux * vy) - 2.0 * ws * ux * vy;
        }
    }
    let rhs_sym = r_sym * hd;
    let rhs_anti = r_anti * hd;
    let rhs_full = r_full * hd + 2.0 * pair(&uo, &dsv)?;

    Ok((
        fabs(lhs_sym - rhs_sym),
        fabs(lhs_anti - rhs_anti),
        fabs(lhs_full - rhs_full),
    ))
}

/// Dense eigenvalues and σ_min of the operator matrix. Antisymmetric
/// kernels put the spectrum on the imaginary axis, symmetric ones on the
/// real axis; the caller checks against ‖matrix‖ at whatever tolerance
/// the experiment demands.
pub fn spectrum_probe(
    kernel: &KernelSpec,
    grid: &Grid,
    subspace: Subspace,
    order: StencilOrder,
) -> Result<SpectralReport> {
    if grid.omega_count() > DENSE_LIMIT {
        return Err(Error::ProbeTooLarge {
            nodes: grid.omega_count(),
            limit: DENSE_LIMIT,
        });
    }
    let op = NonlocalOperator::assemble(kernel, grid, order)?;
    let a = match subspace {
        Subspace::Full => op.full_matrix(),
        Subspace::ZeroOnCollar => op.omega_matrix(),
    };
    let (lo, hi) = singular_extremes(&a);
    let eigen = a.complex_eigenvalues();
    Ok(SpectralReport {
        grid_sizes: vec![eigen.len()],
        min_singular_values: vec![lo],
        max_singular_values: vec![hi],
        spectrum_sample: eigen.iter().copied().collect(),
        kernel_mean: kernel.mean(),
    })
}

/// σ_min of the collar-zeroed operator across refining grids at a fixed
/// horizon. Sizes count Ω-nodes per unit length, so n_per_delta = N·δ
/// must land on an integer. Mean-free kernels decay toward the compact
/// continuum operator; the unit-mass polynomial family plateaus instead,
/// which the report records without judgment.
pub fn compactness_decay(
    kernel: &KernelSpec,
    grid_sizes: &[usize],
    order: StencilOrder,
) -> Result<SpectralReport> {
    if grid_sizes.is_empty() || grid_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateDomain(String::from(
            "grid sizes must be a strictly increasing list",
        )));
    }
    let delta = kernel.delta();
    let domain = unit_domain(kernel.dimension())?;
    let mut sigmas = Vec::with_capacity(grid_sizes.len());
    let mut tops = Vec::with_capacity(grid_sizes.len());
    for &size in grid_sizes {
        let scaled = size as f64 * delta;
        let n = round(scaled);
        if fabs(scaled - n) > 1e-9 * scaled.max(1.0) {
            return Err(Error::DegenerateDomain(String::from(
                "grid size is incommensurate with the horizon",
            )));
        }
        let grid = Grid::build(domain.clone(), delta, n as usize)?;
        let (lo, hi) = restricted_sigma_extremes(kernel, &grid, order)?;
        sigmas.push(lo);
        tops.push(hi);
    }
    Ok(SpectralReport {
        grid_sizes: grid_sizes.to_vec(),
        min_singular_values: sigmas,
        max_singular_values: tops,
        spectrum_sample: Vec::new(),
        kernel_mean: kernel.mean(),
    })
}

/// min ‖D̄u‖₂/‖u‖₂ over collar-zeroed u ≠ 0, i.e. σ_min of the Ω-submatrix
/// in the cell-sum L² norm (the h^{d/2} factors cancel in the ratio). The
/// reciprocal is the best discrete Poincaré constant; mean-free kernels
/// drive it to infinity under refinement.
pub fn poincare_ratio(kernel: &KernelSpec, grid: &Grid, order: StencilOrder) -> Result<f64> {
    Ok(restricted_sigma_extremes(kernel, grid, order)?.0)
}

/// |D_δu(0)| for u = x²sin(1/x) with the sign kernel, by adaptive
/// quadrature of the collapsed form (2/δ²)∫₀^δ y²sin(1/y) dy, against the
/// bound (2/3)δ. Grid assembly is useless here: the integrand oscillates
/// ~1/δ times inside the horizon.
pub fn oscillation_bound_check(deltas: &[f64]) -> Result<OscillationReport> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::DegenerateDomain(String::from(
            "oscillation horizons must lie in (0,1)",
        )));
    }
    let mut values = Vec::with_capacity(deltas.len());
    let mut bounds = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        values.push(oscillation_value(delta)?);
        bounds.push(2.0 / 3.0 * delta);
    }
    Ok(OscillationReport {
        deltas: deltas.to_vec(),
        values,
        bounds,
    })
}

/// The oscillation integral at one horizon. The stretch below δ/32 is
/// dropped: |∫₀^a y²sin(1/y) dy| ≤ a³/3 contributes at most δ/49152 after
/// scaling, three orders below the bound's slack. The rest oscillates
/// finitely often and goes to certified panels.
pub fn oscillation_value(delta: f64) -> Result<f64> {
    let cut = delta / 32.0;
    let tol = 1e-6 * delta * delta * delta;
    let body = adaptive_integral(|y| y * y * sin(1.0 / y), cut, delta, tol)?;
    Ok(fabs(2.0 / (delta * delta) * body))
}

/// Sample a kink profile and its discrete nonlocal derivative over Ω on
/// the given grid, with the kink-point value recovered by reference
/// quadrature against the same normalized potential kernel (β = 1/3,
/// antisymmetric) the published plots use.
pub fn reproduce_figure(
    which: FigureKind,
    grid: &Grid,
    order: StencilOrder,
) -> Result<FigureTable> {
    if grid.dimension() != 1 {
        return Err(Error::GridMismatch);
    }
    let delta = grid.delta();
    let kernel = KernelSpec::potential_sector(delta, 1.0 / 3.0, -1.0, 1.0)?;
    let profile = match which {
        FigureKind::AbsVal => Profile::AbsKink,
        FigureKind::Cusp => Profile::CuspKink,
    };
    let op = NonlocalOperator::assemble(&kernel, grid, order)?;
    let uh = GridFunction::sample(grid, Support::OnOmegaDelta, |x| profile.eval(x[0], delta));
    let du = op.apply(&uh)?;

    let count = grid.omega_count();
    let mut xs = Vec::with_capacity(count);
    let mut u_values = Vec::with_capacity(count);
    let mut derivative_values = Vec::with_capacity(count);
    for o in 0..count {
        let x = grid.coords(grid.omega_flat(o))[0];
        xs.push(x);
        u_values.push(profile.eval(x, delta));
        derivative_values.push(profile.derivative(x, delta));
    }
    let kink_value = reference_integrate(
        &kernel,
        |z| profile.eval(0.5 + z[0], delta) - profile.eval(0.5, delta),
        1e-9,
    )?;
    Ok(FigureTable {
        delta,
        xs,
        u_values,
        derivative_values,
        nonlocal_values: du.values().to_vec(),
        kink_value,
    })
}

// ------------------------------------------------------------------ shared

/// σ_min of the Ω-submatrix by dense SVD; the single code path behind both
/// the compactness sweep and the Poincaré ratio, so shared configurations
/// agree bit for bit.
fn restricted_sigma_extremes(
    kernel: &KernelSpec,
    grid: &Grid,
    order: StencilOrder,
) -> Result<(f64, f64)> {
    if grid.omega_count() > DENSE_LIMIT {
        return Err(Error::ProbeTooLarge {
            nodes: grid.omega_count(),
            limit: DENSE_LIMIT,
        });
    }
    let op = NonlocalOperator::assemble(kernel, grid, order)?;
    Ok(singular_extremes(&op.omega_matrix()))
}

fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let svd = a.clone().svd(false, false);
    svd.singular_values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)))
}

fn unit_domain(dimension: usize) -> Result<Domain> {
    match dimension {
        1 => Domain::interval(0.0, 1.0),
        _ => Domain::rectangle([0.0, 0.0], [1.0, 1.0]),
    }
}

/// Sweep grids refine with the horizon so stencil error stays below the
/// δ-rate: n_per_delta = max(8, round(0.4/δ)).
fn resolution_for(delta: f64) -> usize {
    let n = round(0.4 / delta);
    if n < 8.0 {
        8
    } else {
        n as usize
    }
}

fn check_sweep(domain: &Domain, deltas: &[f64]) -> Result<()> {
    if domain.dimension() != 1 {
        return Err(Error::DegenerateDomain(String::from(
            "convergence sweeps run on intervals",
        )));
    }
    if deltas.is_empty()
        || deltas.iter().any(|&d| !(d > 0.0))
        || deltas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::DegenerateDomain(String::from(
            "horizon sweep must be positive and strictly decreasing",
        )));
    }
    Ok(())
}

/// Cell-sum ‖·‖_p over Ω values; infinite p gives the max norm.
fn omega_lp_norm(errs: &[f64], h: f64, p: f64) -> f64 {
    if p == f64::INFINITY {
        errs.iter().fold(0.0, |m, &e| m.max(fabs(e)))
    } else {
        let sum: f64 = errs.iter().map(|&e| pow(fabs(e), p)).sum();
        pow(sum * h, 1.0 / p)
    }
}

/// Reports need positive errors for the log-log fit; exact zeros park at
/// the smallest subnormal instead.
fn positive_floor(e: f64) -> f64 {
    if e > 0.0 {
        e
    } else {
        f64::MIN_POSITIVE
    }
}

/// Least-squares slope of ln(error) against ln(δ) over the last `window`
/// sweep points. NaN below two points.
fn log_log_slope(deltas: &[f64], errors: &[f64], window: usize) -> f64 {
    let n = deltas.len().min(errors.len());
    if n < 2 {
        return f64::NAN;
    }
    let lo = n - window.min(n);
    let m = (n - lo) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for i in lo..n {
        let x = log(deltas[i]);
        let y = log(errors[i].max(f64::MIN_POSITIVE));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Rate forecast from the kernel's Taylor moments: the first q in 2..=7
/// with |m_q| above 1e-9·‖μ‖₁·δ^q is read at two dyadic horizons, and
/// log₂ of the ratio is its δ-exponent, which is the strong rate for
/// unit-first-moment kernels. Infinite when every probed moment vanishes.
fn predicted_order(
    kernel_for: &impl Fn(f64) -> Result<KernelSpec>,
    delta: f64,
) -> Result<f64> {
    let coarse = kernel_for(delta)?;
    let fine = kernel_for(delta * 0.5)?;
    let floor = 1e-9 * coarse.l1_norm().max(f64::MIN_POSITIVE);
    for q in 2..=7usize {
        let mc = coarse.moment_1d(q);
        if fabs(mc) > floor * pow(delta, q as f64) {
            let mf = fine.moment_1d(q);
            if mf != 0.0 && mc / mf > 0.0 {
                return Ok(log2(mc / mf));
            }
        }
    }
    Ok(f64::INFINITY)
}
