//! Strict line-based experiment configs.
//!
//! Grammar: `key = value` lines grouped under `[run]`, `[kernel]`,
//! `[kernel.2]`, `[domain]`, and `[sweep]` headers; `#` starts a comment.
//! Unknown sections and keys are rejected, duplicates are rejected, and
//! parsing reports every offending line at once. Validation then checks
//! cross-field constraints per command and likewise reports every
//! violation before anything runs.

use nonlocal_core::analysis::{FigureKind, Profile, Subspace};
use nonlocal_core::kernel::KernelSpec;
use nonlocal_core::quadrature::StencilOrder;

/// A line the parser could not accept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub line: usize,
    pub reason: String,
}

/// A field constraint the validator rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

fn violation(field: &str, constraint: impl Into<String>) -> Violation {
    Violation { field: field.to_string(), constraint: constraint.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    KernelInfo,
    Apply,
    Convergence,
    WeakConvergence,
    Ibp,
    Spectrum,
    Compactness,
    Poincare,
    Oscillation,
    Figure,
    DivergenceTheorem,
    DeformationGradient,
}

impl Command {
    pub fn parse(name: &str) -> Option<Command> {
        Some(match name {
            "kernel-info" => Command::KernelInfo,
            "apply" => Command::Apply,
            "convergence" => Command::Convergence,
            "weak-convergence" => Command::WeakConvergence,
            "ibp" => Command::Ibp,
            "spectrum" => Command::Spectrum,
            "compactness" => Command::Compactness,
            "poincare" => Command::Poincare,
            "oscillation" => Command::Oscillation,
            "figure" => Command::Figure,
            "divergence-theorem" => Command::DivergenceTheorem,
            "deformation-gradient" => Command::DeformationGradient,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::KernelInfo => "kernel-info",
            Command::Apply => "apply",
            Command::Convergence => "convergence",
            Command::WeakConvergence => "weak-convergence",
            Command::Ibp => "ibp",
            Command::Spectrum => "spectrum",
            Command::Compactness => "compactness",
            Command::Poincare => "poincare",
            Command::Oscillation => "oscillation",
            Command::Figure => "figure",
            Command::DivergenceTheorem => "divergence-theorem",
            Command::DeformationGradient => "deformation-gradient",
        }
    }
}

/// Axis-check expectation for eigenvalue probes, or the shape of a
/// singular-value sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    ImaginaryAxis,
    RealAxis,
    Decay,
    Plateau,
}

impl Expectation {
    fn parse(name: &str) -> Option<Expectation> {
        Some(match name {
            "imaginary-axis" => Expectation::ImaginaryAxis,
            "real-axis" => Expectation::RealAxis,
            "decay" => Expectation::Decay,
            "plateau" => Expectation::Plateau,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Expectation::ImaginaryAxis => "imaginary-axis",
            Expectation::RealAxis => "real-axis",
            Expectation::Decay => "decay",
            Expectation::Plateau => "plateau",
        }
    }
}

/// A tolerance or bound that may scale with the horizon or the lattice
/// spacing: `10*h^2`, `3/delta`, `0.6*delta`, or a bare number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub coef: f64,
    pub delta_pow: i32,
    pub h_pow: i32,
}

impl Scaled {
    pub fn eval(self, delta: f64, h: f64) -> f64 {
        self.coef * delta.powi(self.delta_pow) * h.powi(self.h_pow)
    }

    pub fn parse(text: &str) -> Option<Scaled> {
        let mut rest = text.trim();
        let cut = rest.find(['*', '/']).unwrap_or(rest.len());
        let coef: f64 = rest[..cut].trim().parse().ok()?;
        if !coef.is_finite() {
            return None;
        }
        let mut out = Scaled { coef, delta_pow: 0, h_pow: 0 };
        rest = &rest[cut..];
        while !rest.is_empty() {
            let sign: i32 = match rest.as_bytes()[0] {
                b'*' => 1,
                b'/' => -1,
                _ => return None,
            };
            rest = &rest[1..];
            let cut = rest.find(['*', '/']).unwrap_or(rest.len());
            let token = rest[..cut].trim();
            rest = &rest[cut..];
            let (base, pow) = match token.split_once('^') {
                Some((b, p)) => (b.trim(), p.trim().parse::<i32>().ok()?),
                None => (token, 1),
            };
            if pow <= 0 {
                return None;
            }
            match base {
                "delta" => out.delta_pow += sign * pow,
                "h" => out.h_pow += sign * pow,
                _ => return None,
            }
        }
        Some(out)
    }

    pub fn canonical(&self) -> String {
        let mut s = format!("{}", self.coef);
        for (pow, name) in [(self.delta_pow, "delta"), (self.h_pow, "h")] {
            if pow == 0 {
                continue;
            }
            let op = if pow > 0 { '*' } else { '/' };
            let mag = pow.abs();
            if mag == 1 {
                s.push_str(&format!("{op}{name}"));
            } else {
                s.push_str(&format!("{op}{name}^{mag}"));
            }
        }
        s
    }
}

/// Scalar numbers accept an optional single rational bar: `1/3` means the
/// exact third that decimal literals cannot spell.
fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Some((num, den)) = t.split_once('/') {
        let n: f64 = num.trim().parse().ok()?;
        let d: f64 = den.trim().parse().ok()?;
        if d == 0.0 || !n.is_finite() || !d.is_finite() {
            return None;
        }
        let q = n / d;
        return q.is_finite().then_some(q);
    }
    let v: f64 = t.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_number_list(text: &str) -> Option<Vec<f64>> {
    text.split(',').map(parse_number).collect()
}

fn parse_usize_list(text: &str) -> Option<Vec<usize>> {
    text.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn parse_bool(text: &str) -> Option<bool> {
    match text.trim() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// One `[kernel]` or `[kernel.2]` block.
#[derive(Debug, Clone, Default)]
pub struct KernelBlock {
    pub family: Option<String>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub theta_plus: Option<f64>,
    pub theta_minus: Option<f64>,
    pub amplitude: Option<f64>,
    pub normalize: Option<bool>,
    pub coefficients: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub axis: Option<usize>,
}

const FAMILIES: [&str; 9] = [
    "potential",
    "sign",
    "one-sided",
    "polynomial",
    "polynomial-high-order",
    "mollifier",
    "zero",
    "tabulated",
    "sector-2d",
];

impl KernelBlock {
    pub fn dimension(&self) -> usize {
        if self.family.as_deref() == Some("sector-2d") {
            2
        } else {
            1
        }
    }

    /// Build the kernel at a given horizon (sweeps override the block's
    /// own delta). Validation has checked the field combinations, so the
    /// fallbacks here are unreachable on validated configs.
    pub fn build(&self, delta: f64) -> nonlocal_core::Result<KernelSpec> {
        let beta = self.beta.unwrap_or(1.0);
        match self.family.as_deref().unwrap_or("") {
            "potential" => {
                let minus = self.theta_minus.unwrap_or(0.0);
                let plus = self.theta_plus.unwrap_or(0.0);
                if self.normalize.unwrap_or(true) {
                    KernelSpec::potential_sector(delta, beta, minus, plus)
                } else {
                    KernelSpec::potential_sector_raw(
                        delta,
                        beta,
                        minus,
                        plus,
                        self.amplitude.unwrap_or(1.0),
                    )
                }
            }
            "sign" => KernelSpec::piecewise_constant_sign(delta),
            "one-sided" => KernelSpec::one_sided(delta, beta),
            "polynomial" => {
                KernelSpec::polynomial(delta, self.coefficients.clone().unwrap_or_default())
            }
            "polynomial-high-order" => KernelSpec::polynomial_high_order(delta),
            "mollifier" => KernelSpec::mollifier_derivative(delta),
            "zero" => KernelSpec::zero(delta),
            "tabulated" => KernelSpec::tabulated(delta, self.values.clone().unwrap_or_default()),
            "sector-2d" => {
                let minus = self.theta_minus.unwrap_or(0.0);
                let plus = self.theta_plus.unwrap_or(0.0);
                let t = self.t.unwrap_or(0.5);
                let axis = self.axis.unwrap_or(0);
                if self.normalize.unwrap_or(true) {
                    KernelSpec::sector_2d(delta, beta, t, plus, minus, axis)
                } else {
                    KernelSpec::sector_2d_raw(
                        delta,
                        beta,
                        t,
                        plus,
                        minus,
                        axis,
                        self.amplitude.unwrap_or(1.0),
                    )
                }
            }
            other => Err(nonlocal_core::Error::InvalidKernel(format!(
                "unknown family '{other}'"
            ))),
        }
    }

    fn validate(&self, label: &str, delta_from_sweep: bool, out: &mut Vec<Violation>) {
        let field = |k: &str| format!("{label}.{k}");
        let family = match self.family.as_deref() {
            Some(f) if FAMILIES.contains(&f) => f,
            Some(f) => {
                out.push(violation(
                    &field("family"),
                    format!("unknown family '{f}' (known: {})", FAMILIES.join(", ")),
                ));
                return;
            }
            None => {
                out.push(violation(&field("family"), "required"));
                return;
            }
        };
        if delta_from_sweep {
            if self.delta.is_some() {
                out.push(violation(
                    &field("delta"),
                    "the sweep provides the horizon; drop this key",
                ));
            }
        } else {
            match self.delta {
                Some(d) if d > 0.0 => {}
                Some(_) => out.push(violation(&field("delta"), "must be positive")),
                None => out.push(violation(&field("delta"), "required")),
            }
        }
        let dim = self.dimension();
        let needs_beta = matches!(family, "potential" | "one-sided" | "sector-2d");
        match (needs_beta, self.beta) {
            (true, None) => out.push(violation(&field("beta"), "required for this family")),
            (true, Some(b)) => {
                // integrability of |z|^{beta-1} near the origin
                if b <= 1.0 - dim as f64 {
                    out.push(violation(
                        &field("beta"),
                        format!("must exceed 1 - d = {} for integrability", 1.0 - dim as f64),
                    ));
                }
            }
            (false, Some(_)) => {
                out.push(violation(&field("beta"), "not a parameter of this family"))
            }
            (false, None) => {}
        }
        let needs_theta = matches!(family, "potential" | "sector-2d");
        for (key, val) in [("theta_plus", self.theta_plus), ("theta_minus", self.theta_minus)] {
            match (needs_theta, val) {
                (true, None) => out.push(violation(&field(key), "required for this family")),
                (false, Some(_)) => {
                    out.push(violation(&field(key), "not a parameter of this family"))
                }
                _ => {}
            }
        }
        if self.normalize.is_some() && !needs_theta {
            out.push(violation(&field("normalize"), "only the potential families normalize"));
        }
        if self.amplitude.is_some() {
            if !needs_theta {
                out.push(violation(&field("amplitude"), "only the potential families scale"));
            } else if self.normalize.unwrap_or(true) {
                out.push(violation(
                    &field("amplitude"),
                    "set normalize = false to pass an explicit amplitude",
                ));
            }
        }
        if family == "potential" || family == "sector-2d" {
            if let (Some(p), Some(m)) = (self.theta_plus, self.theta_minus) {
                if self.normalize.unwrap_or(true) && p == m {
                    out.push(violation(
                        &field("theta_plus"),
                        "theta_plus = theta_minus has no first moment to normalize",
                    ));
                }
            }
        }
        match (family == "polynomial", &self.coefficients) {
            (true, None) => out.push(violation(&field("coefficients"), "required")),
            (false, Some(_)) => {
                out.push(violation(&field("coefficients"), "only the polynomial family"))
            }
            _ => {}
        }
        match (family == "tabulated", &self.values) {
            (true, None) => out.push(violation(&field("values"), "required")),
            (true, Some(v)) if v.len() < 3 || v.len() % 2 == 0 => {
                out.push(violation(&field("values"), "needs an odd count of at least 3 cells"))
            }
            (false, Some(_)) => out.push(violation(&field("values"), "only the tabulated family")),
            _ => {}
        }
        match (family == "sector-2d", self.t) {
            (true, None) => out.push(violation(&field("t"), "required")),
            (true, Some(t)) if !(0.0 < t && t < 1.0) => {
                out.push(violation(&field("t"), "must lie in (0, 1)"))
            }
            (false, Some(_)) => out.push(violation(&field("t"), "only the sector-2d family")),
            _ => {}
        }
        match (family == "sector-2d", self.axis) {
            (true, None) => out.push(violation(&field("axis"), "required")),
            (true, Some(a)) if a > 1 => out.push(violation(&field("axis"), "must be 0 or 1")),
            (false, Some(_)) => out.push(violation(&field("axis"), "only the sector-2d family")),
            _ => {}
        }
    }

    fn echo(&self, label: &str, lines: &mut Vec<String>) {
        lines.push(format!("[{label}]"));
        if let Some(f) = &self.family {
            lines.push(format!("family = {f}"));
        }
        if let Some(v) = self.delta {
            lines.push(format!("delta = {v}"));
        }
        if let Some(v) = self.beta {
            lines.push(format!("beta = {v}"));
        }
        if let Some(v) = self.theta_plus {
            lines.push(format!("theta_plus = {v}"));
        }
        if let Some(v) = self.theta_minus {
            lines.push(format!("theta_minus = {v}"));
        }
        if let Some(v) = self.t {
            lines.push(format!("t = {v}"));
        }
        if let Some(v) = self.axis {
            lines.push(format!("axis = {v}"));
        }
        if let Some(v) = self.normalize {
            lines.push(format!("normalize = {v}"));
        }
        if let Some(v) = self.amplitude {
            lines.push(format!("amplitude = {v}"));
        }
        if let Some(v) = &self.coefficients {
            lines.push(format!("coefficients = {}", join_floats(v)));
        }
        if let Some(v) = &self.values {
            lines.push(format!("values = {}", join_floats(v)));
        }
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn join_usizes(v: &[usize]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Default)]
pub struct DomainBlock {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub n_per_delta: Option<usize>,
    /// Horizon for commands that build a grid without a kernel (figure).
    pub delta: Option<f64>,
}

impl DomainBlock {
    pub fn dimension(&self) -> usize {
        self.lo.as_ref().map_or(1, Vec::len)
    }

    pub fn build(&self) -> nonlocal_core::Result<nonlocal_core::geometry::Domain> {
        let lo = self.lo.clone().unwrap_or_default();
        let hi = self.hi.clone().unwrap_or_default();
        if lo.len() == 2 {
            nonlocal_core::geometry::Domain::rectangle([lo[0], lo[1]], [hi[0], hi[1]])
        } else {
            nonlocal_core::geometry::Domain::interval(lo[0], hi[0])
        }
    }

    fn validate(&self, needs_box: bool, needs_resolution: bool, out: &mut Vec<Violation>) {
        match (&self.lo, &self.hi) {
            (Some(lo), Some(hi)) => {
                if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
                    out.push(violation(
                        "domain.lo",
                        "lo and hi must both have one or two coordinates",
                    ));
                } else if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    out.push(violation("domain.lo", "each lo must be strictly below hi"));
                }
            }
            (None, None) if !needs_box => {}
            _ => out.push(violation("domain.lo", "lo and hi are both required")),
        }
        match (needs_resolution, self.n_per_delta) {
            (true, None) => out.push(violation("domain.n_per_delta", "required")),
            (_, Some(0)) => out.push(violation("domain.n_per_delta", "must be positive")),
            _ => {}
        }
    }

    fn echo(&self, lines: &mut Vec<String>) {
        lines.push("[domain]".to_string());
        if let Some(v) = &self.lo {
            lines.push(format!("lo = {}", join_floats(v)));
        }
        if let Some(v) = &self.hi {
            lines.push(format!("hi = {}", join_floats(v)));
        }
        if let Some(v) = self.delta {
            lines.push(format!("delta = {v}"));
        }
        if let Some(v) = self.n_per_delta {
            lines.push(format!("n_per_delta = {v}"));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepBlock {
    pub deltas: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    pub resolutions: Option<Vec<usize>>,
}

impl SweepBlock {
    fn echo(&self, lines: &mut Vec<String>) {
        lines.push("[sweep]".to_string());
        if let Some(v) = &self.deltas {
            lines.push(format!("deltas = {}", join_floats(v)));
        }
        if let Some(v) = &self.sizes {
            lines.push(format!("sizes = {}", join_usizes(v)));
        }
        if let Some(v) = &self.resolutions {
            lines.push(format!("resolutions = {}", join_usizes(v)));
        }
    }
}

/// The `[run]` block: command selector, reproducibility knobs, study
/// parameters, and the assertion keys whose failures turn into exit 1.
#[derive(Debug, Clone)]
pub struct RunBlock {
    pub command: Command,
    pub out: Option<String>,
    pub seed: u64,
    pub quad_order: StencilOrder,
    pub threads: usize,
    pub profile: Option<Profile>,
    pub norm_p: Option<f64>,
    pub which: Option<FigureKind>,
    pub subspace: Option<Subspace>,
    pub expect: Option<Expectation>,
    pub pairs: Option<usize>,
    pub fields: Option<usize>,
    pub matrices: Option<usize>,
    pub zero_collar: bool,
    pub bump_center: Option<f64>,
    pub bump_width: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub expect_normalization: Option<f64>,
    pub normalization_rtol: f64,
    pub expect_l1: Option<Scaled>,
    pub expect_first: Option<Scaled>,
    pub expect_second_sym: Option<Scaled>,
    pub moment_rtol: f64,
    pub stencil_rtol: Option<f64>,
    pub expect_moments: Option<Vec<f64>>,
    pub moment_atol: f64,
    pub max_abs_core: Option<Scaled>,
    pub residual_tol: Option<f64>,
    pub adjoint_tol: Option<f64>,
    pub axis_tol: f64,
    pub decay_ratio_max: f64,
    pub plateau_floor: f64,
    pub smooth_mismatch_max: Option<f64>,
    pub kink_max: Option<Scaled>,
    pub amplification_max: Option<f64>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub ftol: f64,
}

/// A fully parsed and validated experiment.
#[derive(Debug, Clone)]
pub struct Config {
    pub run: RunBlock,
    pub kernel: Option<KernelBlock>,
    pub kernel2: Option<KernelBlock>,
    pub domain: Option<DomainBlock>,
    pub sweep: Option<SweepBlock>,
}

impl Config {
    /// Canonical config echo for the CSV header: every set key in a fixed
    /// order with resolved defaults, so identical configs render
    /// identically byte for byte. The output path is deliberately left
    /// out; it names the file, it does not shape the experiment.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        lines.push("[run]".to_string());
        let r = &self.run;
        lines.push(format!("command = {}", r.command.name()));
        lines.push(format!("seed = {}", r.seed));
        lines.push(format!(
            "quad_order = {}",
            if r.quad_order == StencilOrder::One { 1 } else { 2 }
        ));
        lines.push(format!("threads = {}", r.threads));
        if let Some(p) = r.profile {
            lines.push(format!("profile = {}", profile_name(p)));
        }
        if let Some(p) = r.norm_p {
            lines.push(format!("norm = {p}"));
        }
        if let Some(w) = r.which {
            lines.push(format!(
                "which = {}",
                match w {
                    FigureKind::AbsVal => "absval",
                    FigureKind::Cusp => "cusp",
                }
            ));
        }
        if let Some(s) = r.subspace {
            lines.push(format!(
                "subspace = {}",
                match s {
                    Subspace::Full => "full",
                    Subspace::ZeroOnCollar => "zero-on-collar",
                }
            ));
        }
        if let Some(e) = r.expect {
            lines.push(format!("expect = {}", e.name()));
        }
        for (key, v) in [("pairs", r.pairs), ("fields", r.fields), ("matrices", r.matrices)] {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        }
        if r.zero_collar {
            lines.push("zero_collar = true".to_string());
        }
        for (key, v) in [
            ("bump_center", r.bump_center),
            ("bump_width", r.bump_width),
            ("slope_min", r.slope_min),
            ("slope_max", r.slope_max),
            ("expect_normalization", r.expect_normalization),
        ] {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        }
        if let Some(v) = &r.coefficients {
            lines.push(format!("coefficients = {}", join_floats(v)));
        }
        if r.expect_normalization.is_some() {
            lines.push(format!("normalization_rtol = {}", r.normalization_rtol));
        }
        for (key, v) in [
            ("expect_l1", r.expect_l1),
            ("expect_first", r.expect_first),
            ("expect_second_sym", r.expect_second_sym),
        ] {
            if let Some(v) = v {
                lines.push(format!("{key} = {}", v.canonical()));
            }
        }
        if r.expect_l1.is_some() || r.expect_first.is_some() || r.expect_second_sym.is_some() {
            lines.push(format!("moment_rtol = {}", r.moment_rtol));
        }
        if let Some(v) = r.stencil_rtol {
            lines.push(format!("stencil_rtol = {v}"));
        }
        if let Some(v) = &r.expect_moments {
            lines.push(format!("expect_moments = {}", join_floats(v)));
            lines.push(format!("moment_atol = {}", r.moment_atol));
        }
        if let Some(v) = r.max_abs_core {
            lines.push(format!("max_abs_core = {}", v.canonical()));
        }
        for (key, v) in [("residual_tol", r.residual_tol), ("adjoint_tol", r.adjoint_tol)] {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        }
        if r.expect == Some(Expectation::ImaginaryAxis) || r.expect == Some(Expectation::RealAxis) {
            lines.push(format!("axis_tol = {}", r.axis_tol));
        }
        if r.expect == Some(Expectation::Decay) {
            lines.push(format!("decay_ratio_max = {}", r.decay_ratio_max));
        }
        if r.expect == Some(Expectation::Plateau) {
            lines.push(format!("plateau_floor = {}", r.plateau_floor));
        }
        if let Some(v) = r.smooth_mismatch_max {
            lines.push(format!("smooth_mismatch_max = {v}"));
        }
        if let Some(v) = r.kink_max {
            lines.push(format!("kink_max = {}", v.canonical()));
        }
        if let Some(v) = r.amplification_max {
            lines.push(format!("amplification_max = {v}"));
        }
        for (key, v) in [("ratio_min", r.ratio_min), ("ratio_max", r.ratio_max)] {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        }
        if r.command == Command::DeformationGradient {
            lines.push(format!("ftol = {}", r.ftol));
        }
        if let Some(k) = &self.kernel {
            k.echo("kernel", &mut lines);
        }
        if let Some(k) = &self.kernel2 {
            k.echo("kernel.2", &mut lines);
        }
        if let Some(d) = &self.domain {
            d.echo(&mut lines);
        }
        if let Some(s) = &self.sweep {
            s.echo(&mut lines);
        }
        lines
    }
}

pub fn profile_name(p: Profile) -> &'static str {
    match p {
        Profile::Affine => "affine",
        Profile::Sin3 => "sin(3x)",
        Profile::AbsKink => "|x-0.5|",
        Profile::CuspKink => "|x-0.5|^{2/3}",
        Profile::OscillatingSquare => "x^2sin(1/x)",
        Profile::CollarWave => "sin(2pix/delta)",
        Profile::Step => "step",
    }
}

/// Everything that can stop a run before or during execution. Parse and
/// validation failures carry every issue found, not just the first.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{}", render_parse_issues(.0))]
    Parse(Vec<ParseIssue>),
    #[error("{}", render_violations(.0))]
    Validation(Vec<Violation>),
    #[error("{0}")]
    Core(#[from] nonlocal_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn render_parse_issues(issues: &[ParseIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("config line {}: {}", i.line, i.reason))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("config field {}: {}", v.field, v.constraint))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parse and validate config text in one step.
pub fn load(text: &str) -> Result<Config, Failure> {
    let drafts = parse_config(text).map_err(Failure::Parse)?;
    validate(drafts).map_err(Failure::Validation)
}

// ================================================================ parsing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Run,
    Kernel,
    Kernel2,
    Domain,
    Sweep,
}

#[derive(Debug, Default)]
struct RunDraft {
    command: Option<Command>,
    out: Option<String>,
    seed: Option<u64>,
    quad_order: Option<usize>,
    threads: Option<usize>,
    profile: Option<Profile>,
    norm_p: Option<f64>,
    which: Option<FigureKind>,
    subspace: Option<Subspace>,
    expect: Option<Expectation>,
    pairs: Option<usize>,
    fields: Option<usize>,
    matrices: Option<usize>,
    zero_collar: Option<bool>,
    bump_center: Option<f64>,
    bump_width: Option<f64>,
    coefficients: Option<Vec<f64>>,
    slope_min: Option<f64>,
    slope_max: Option<f64>,
    expect_normalization: Option<f64>,
    normalization_rtol: Option<f64>,
    expect_l1: Option<Scaled>,
    expect_first: Option<Scaled>,
    expect_second_sym: Option<Scaled>,
    moment_rtol: Option<f64>,
    stencil_rtol: Option<f64>,
    expect_moments: Option<Vec<f64>>,
    moment_atol: Option<f64>,
    max_abs_core: Option<Scaled>,
    residual_tol: Option<f64>,
    adjoint_tol: Option<f64>,
    axis_tol: Option<f64>,
    decay_ratio_max: Option<f64>,
    plateau_floor: Option<f64>,
    smooth_mismatch_max: Option<f64>,
    kink_max: Option<Scaled>,
    amplification_max: Option<f64>,
    ratio_min: Option<f64>,
    ratio_max: Option<f64>,
    ftol: Option<f64>,
}

#[derive(Debug, Default)]
struct Drafts {
    run: RunDraft,
    kernel: Option<KernelBlock>,
    kernel2: Option<KernelBlock>,
    domain: Option<DomainBlock>,
    sweep: Option<SweepBlock>,
}

struct LineCtx<'a> {
    line: usize,
    key: &'a str,
    issues: &'a mut Vec<ParseIssue>,
}

impl LineCtx<'_> {
    fn set<T>(&mut self, slot: &mut Option<T>, value: Option<T>) {
        if slot.is_some() {
            self.issues.push(ParseIssue {
                line: self.line,
                reason: format!("duplicate key '{}'", self.key),
            });
            return;
        }
        match value {
            Some(v) => *slot = Some(v),
            None => self.issues.push(ParseIssue {
                line: self.line,
                reason: format!("malformed value for '{}'", self.key),
            }),
        }
    }
}

/// Parse config text, reporting every bad line.
fn parse_config(text: &str) -> Result<Drafts, Vec<ParseIssue>> {
    let mut drafts = Drafts::default();
    let mut issues = Vec::new();
    let mut section: Option<Section> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            section = match trimmed {
                "[run]" => Some(Section::Run),
                "[kernel]" => Some(Section::Kernel),
                "[kernel.2]" => Some(Section::Kernel2),
                "[domain]" => Some(Section::Domain),
                "[sweep]" => Some(Section::Sweep),
                other => {
                    issues.push(ParseIssue {
                        line,
                        reason: format!("unknown section '{other}'"),
                    });
                    None
                }
            };
            match section {
                Some(Section::Kernel) if drafts.kernel.is_none() => {
                    drafts.kernel = Some(KernelBlock::default())
                }
                Some(Section::Kernel2) if drafts.kernel2.is_none() => {
                    drafts.kernel2 = Some(KernelBlock::default())
                }
                Some(Section::Domain) if drafts.domain.is_none() => {
                    drafts.domain = Some(DomainBlock::default())
                }
                Some(Section::Sweep) if drafts.sweep.is_none() => {
                    drafts.sweep = Some(SweepBlock::default())
                }
                _ => {}
            }
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            issues.push(ParseIssue {
                line,
                reason: "expected 'key = value' or a '[section]' header".to_string(),
            });
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            issues.push(ParseIssue { line, reason: format!("empty value for '{key}'") });
            continue;
        }
        let Some(section) = section else {
            issues.push(ParseIssue {
                line,
                reason: format!("key '{key}' appears before any [section] header"),
            });
            continue;
        };
        let mut ctx = LineCtx { line, key, issues: &mut issues };
        match section {
            Section::Run => run_key(&mut drafts.run, &mut ctx, key, value),
            Section::Kernel => {
                kernel_key(drafts.kernel.as_mut().expect("created with header"), &mut ctx, key, value)
            }
            Section::Kernel2 => kernel_key(
                drafts.kernel2.as_mut().expect("created with header"),
                &mut ctx,
                key,
                value,
            ),
            Section::Domain => {
                domain_key(drafts.domain.as_mut().expect("created with header"), &mut ctx, key, value)
            }
            Section::Sweep => {
                sweep_key(drafts.sweep.as_mut().expect("created with header"), &mut ctx, key, value)
            }
        }
    }
    if issues.is_empty() {
        Ok(drafts)
    } else {
        Err(issues)
    }
}

fn run_key(run: &mut RunDraft, ctx: &mut LineCtx<'_>, key: &str, value: &str) {
    match key {
        "command" => ctx.set(&mut run.command, Command::parse(value)),
        "out" => ctx.set(&mut run.out, Some(value.to_string())),
        "seed" => ctx.set(&mut run.seed, value.parse().ok()),
        "quad_order" => ctx.set(&mut run.quad_order, value.parse().ok()),
        "threads" => ctx.set(&mut run.threads, value.parse().ok()),
        "profile" => ctx.set(&mut run.profile, Profile::parse(value)),
        "norm" => ctx.set(&mut run.norm_p, parse_norm(value)),
        "which" => ctx.set(&mut run.which, FigureKind::parse(value)),
        "subspace" => ctx.set(&mut run.subspace, Subspace::parse(value)),
        "expect" => ctx.set(&mut run.expect, Expectation::parse(value)),
        "pairs" => ctx.set(&mut run.pairs, value.parse().ok()),
        "fields" => ctx.set(&mut run.fields, value.parse().ok()),
        "matrices" => ctx.set(&mut run.matrices, value.parse().ok()),
        "zero_collar" => ctx.set(&mut run.zero_collar, parse_bool(value)),
        "bump_center" => ctx.set(&mut run.bump_center, parse_number(value)),
        "bump_width" => ctx.set(&mut run.bump_width, parse_number(value)),
        "coefficients" => ctx.set(&mut run.coefficients, parse_number_list(value)),
        "slope_min" => ctx.set(&mut run.slope_min, parse_number(value)),
        "slope_max" => ctx.set(&mut run.slope_max, parse_number(value)),
        "expect_normalization" => ctx.set(&mut run.expect_normalization, parse_number(value)),
        "normalization_rtol" => ctx.set(&mut run.normalization_rtol, parse_number(value)),
        "expect_l1" => ctx.set(&mut run.expect_l1, Scaled::parse(value)),
        "expect_first" => ctx.set(&mut run.expect_first, Scaled::parse(value)),
        "expect_second_sym" => ctx.set(&mut run.expect_second_sym, Scaled::parse(value)),
        "moment_rtol" => ctx.set(&mut run.moment_rtol, parse_number(value)),
        "stencil_rtol" => ctx.set(&mut run.stencil_rtol, parse_number(value)),
        "expect_moments" => ctx.set(&mut run.expect_moments, parse_number_list(value)),
        "moment_atol" => ctx.set(&mut run.moment_atol, parse_number(value)),
        "max_abs_core" => ctx.set(&mut run.max_abs_core, Scaled::parse(value)),
        "residual_tol" => ctx.set(&mut run.residual_tol, parse_number(value)),
        "adjoint_tol" => ctx.set(&mut run.adjoint_tol, parse_number(value)),
        "axis_tol" => ctx.set(&mut run.axis_tol, parse_number(value)),
        "decay_ratio_max" => ctx.set(&mut run.decay_ratio_max, parse_number(value)),
        "plateau_floor" => ctx.set(&mut run.plateau_floor, parse_number(value)),
        "smooth_mismatch_max" => ctx.set(&mut run.smooth_mismatch_max, parse_number(value)),
        "kink_max" => ctx.set(&mut run.kink_max, Scaled::parse(value)),
        "amplification_max" => ctx.set(&mut run.amplification_max, parse_number(value)),
        "ratio_min" => ctx.set(&mut run.ratio_min, parse_number(value)),
        "ratio_max" => ctx.set(&mut run.ratio_max, parse_number(value)),
        "ftol" => ctx.set(&mut run.ftol, parse_number(value)),
        _ => ctx.issues.push(ParseIssue {
            line: ctx.line,
            reason: format!("unknown key '{key}' in [run]"),
        }),
    }
}

fn parse_norm(value: &str) -> Option<f64> {
    match value {
        "l1" => Some(1.0),
        "l2" => Some(2.0),
        "linf" | "inf" => Some(f64::INFINITY),
        other => {
            let p = parse_number(other)?;
            (p >= 1.0).then_some(p)
        }
    }
}

fn kernel_key(k: &mut KernelBlock, ctx: &mut LineCtx<'_>, key: &str, value: &str) {
    match key {
        "family" => ctx.set(&mut k.family, Some(value.to_string())),
        "delta" => ctx.set(&mut k.delta, parse_number(value)),
        "beta" => ctx.set(&mut k.beta, parse_number(value)),
        "theta_plus" => ctx.set(&mut k.theta_plus, parse_number(value)),
        "theta_minus" => ctx.set(&mut k.theta_minus, parse_number(value)),
        "amplitude" => ctx.set(&mut k.amplitude, parse_number(value)),
        "normalize" => ctx.set(&mut k.normalize, parse_bool(value)),
        "coefficients" => ctx.set(&mut k.coefficients, parse_number_list(value)),
        "values" => ctx.set(&mut k.values, parse_number_list(value)),
        "t" => ctx.set(&mut k.t, parse_number(value)),
        "axis" => ctx.set(&mut k.axis, value.parse().ok()),
        _ => ctx.issues.push(ParseIssue {
            line: ctx.line,
            reason: format!("unknown key '{key}' in [kernel]"),
        }),
    }
}

fn domain_key(d: &mut DomainBlock, ctx: &mut LineCtx<'_>, key: &str, value: &str) {
    match key {
        "lo" => ctx.set(&mut d.lo, parse_number_list(value)),
        "hi" => ctx.set(&mut d.hi, parse_number_list(value)),
        "n_per_delta" => ctx.set(&mut d.n_per_delta, value.parse().ok()),
        "delta" => ctx.set(&mut d.delta, parse_number(value)),
        _ => ctx.issues.push(ParseIssue {
            line: ctx.line,
            reason: format!("unknown key '{key}' in [domain]"),
        }),
    }
}

fn sweep_key(s: &mut SweepBlock, ctx: &mut LineCtx<'_>, key: &str, value: &str) {
    match key {
        "deltas" => ctx.set(&mut s.deltas, parse_number_list(value)),
        "sizes" => ctx.set(&mut s.sizes, parse_usize_list(value)),
        "resolutions" => ctx.set(&mut s.resolutions, parse_usize_list(value)),
        _ => ctx.issues.push(ParseIssue {
            line: ctx.line,
            reason: format!("unknown key '{key}' in [sweep]"),
        }),
    }
}

// ================================================================ validation

/// Which blocks and keys a command consumes.
struct Shape {
    kernel: bool,
    kernel2: bool,
    domain: bool,
    grid: bool,
    sweep_deltas: bool,
    sweep_sizes: bool,
    sweep_resolutions: bool,
    profile: bool,
}

fn shape(cmd: Command) -> Shape {
    let none = Shape {
        kernel: false,
        kernel2: false,
        domain: false,
        grid: false,
        sweep_deltas: false,
        sweep_sizes: false,
        sweep_resolutions: false,
        profile: false,
    };
    match cmd {
        Command::KernelInfo => Shape { kernel: true, sweep_deltas: true, domain: true, ..none },
        Command::Apply => Shape {
            kernel: true,
            domain: true,
            grid: true,
            sweep_resolutions: true,
            profile: true,
            ..none
        },
        Command::Convergence | Command::WeakConvergence => {
            Shape { kernel: true, domain: true, sweep_deltas: true, profile: true, ..none }
        }
        Command::Ibp | Command::Spectrum | Command::Poincare => {
            Shape { kernel: true, domain: true, grid: true, ..none }
        }
        Command::Compactness => Shape { kernel: true, sweep_sizes: true, ..none },
        Command::Oscillation => Shape { sweep_deltas: true, ..none },
        Command::Figure => Shape { domain: true, grid: true, ..none },
        Command::DivergenceTheorem | Command::DeformationGradient => {
            Shape { kernel: true, kernel2: true, domain: true, grid: true, ..none }
        }
    }
}

/// Resolve drafts into a validated config, reporting every violation.
fn validate(drafts: Drafts) -> Result<Config, Vec<Violation>> {
    let mut out = Vec::new();
    let Some(command) = drafts.run.command else {
        return Err(vec![violation("run.command", "required")]);
    };
    let shape = shape(command);
    let r = drafts.run;

    let quad_order = match r.quad_order {
        None => StencilOrder::Two,
        Some(i) => StencilOrder::from_index(i).unwrap_or_else(|| {
            out.push(violation("run.quad_order", "must be 1 or 2"));
            StencilOrder::Two
        }),
    };
    let threads = r.threads.unwrap_or(1);
    if threads == 0 {
        out.push(violation("run.threads", "must be positive"));
    }

    // sweeps: at most one axis, and only the axis the command understands
    let sweep_deltas = drafts.sweep.as_ref().and_then(|s| s.deltas.clone());
    let sweep_sizes = drafts.sweep.as_ref().and_then(|s| s.sizes.clone());
    let sweep_resolutions = drafts.sweep.as_ref().and_then(|s| s.resolutions.clone());
    let axes = usize::from(sweep_deltas.is_some())
        + usize::from(sweep_sizes.is_some())
        + usize::from(sweep_resolutions.is_some());
    if axes > 1 {
        out.push(violation("sweep", "give exactly one of deltas, sizes, resolutions"));
    }
    if sweep_deltas.is_some() && !shape.sweep_deltas {
        out.push(violation("sweep.deltas", format!("{} does not sweep horizons", command.name())));
    }
    if sweep_sizes.is_some() && !shape.sweep_sizes {
        out.push(violation("sweep.sizes", format!("{} does not sweep grid sizes", command.name())));
    }
    if sweep_resolutions.is_some() && !shape.sweep_resolutions {
        out.push(violation(
            "sweep.resolutions",
            format!("{} does not sweep resolutions", command.name()),
        ));
    }
    if let Some(d) = &sweep_deltas {
        if d.is_empty() || d.iter().any(|&x| x <= 0.0) {
            out.push(violation("sweep.deltas", "must be a nonempty list of positive horizons"));
        } else if matches!(command, Command::Convergence | Command::WeakConvergence)
            && d.windows(2).any(|w| w[1] >= w[0])
        {
            out.push(violation("sweep.deltas", "sweep studies shrink: list horizons decreasing"));
        }
    }
    if let Some(s) = &sweep_sizes {
        if s.is_empty() || s.windows(2).any(|w| w[1] <= w[0]) {
            out.push(violation("sweep.sizes", "must be a strictly increasing nonempty list"));
        }
    }
    if let Some(rs) = &sweep_resolutions {
        if rs.is_empty() || rs.contains(&0) {
            out.push(violation("sweep.resolutions", "must be a nonempty list of positive counts"));
        }
    }

    // the convergence commands REQUIRE a delta sweep; others may not have one
    let delta_swept = sweep_deltas.is_some();
    match command {
        Command::Convergence | Command::WeakConvergence if !delta_swept => {
            out.push(violation("sweep.deltas", "required: the study sweeps the horizon"));
        }
        Command::Compactness if sweep_sizes.is_none() => {
            out.push(violation("sweep.sizes", "required: the probe sweeps grid sizes"));
        }
        Command::Oscillation if !delta_swept => {
            out.push(violation("sweep.deltas", "required"));
        }
        _ => {}
    }

    // kernel blocks
    let kernel_delta_from_sweep = delta_swept
        && matches!(command, Command::KernelInfo | Command::Convergence | Command::WeakConvergence);
    match (&drafts.kernel, shape.kernel) {
        (Some(k), true) => k.validate("kernel", kernel_delta_from_sweep, &mut out),
        (Some(_), false) => {
            out.push(violation("kernel", format!("{} takes no kernel block", command.name())))
        }
        (None, true) => out.push(violation("kernel", "required")),
        (None, false) => {}
    }
    match (&drafts.kernel2, shape.kernel2) {
        (Some(k), true) => k.validate("kernel.2", false, &mut out),
        (Some(_), false) => out.push(violation(
            "kernel.2",
            format!("{} takes a single kernel at most", command.name()),
        )),
        (None, true) => out.push(violation("kernel.2", "required: one kernel per coordinate")),
        (None, false) => {}
    }

    // domain block
    match (&drafts.domain, shape.domain) {
        (Some(d), true) => {
            // for kernel-info the block exists only to resolve a stencil
            let needs_box = command != Command::KernelInfo;
            let needs_resolution = command == Command::KernelInfo
                || (shape.grid && sweep_resolutions.is_none());
            d.validate(needs_box, needs_resolution, &mut out);
            if matches!(command, Command::Convergence | Command::WeakConvergence)
                && d.n_per_delta.is_some()
            {
                out.push(violation(
                    "domain.n_per_delta",
                    "the study picks its own resolution per horizon",
                ));
            }
            if command == Command::Apply
                && sweep_resolutions.is_some()
                && d.n_per_delta.is_some()
            {
                out.push(violation("domain.n_per_delta", "the sweep provides the resolution"));
            }
            if command == Command::Figure {
                match d.delta {
                    Some(v) if v > 0.0 => {}
                    Some(_) => out.push(violation("domain.delta", "must be positive")),
                    None => out.push(violation(
                        "domain.delta",
                        "required: figure builds its grid without a kernel",
                    )),
                }
            } else if d.delta.is_some() {
                out.push(violation("domain.delta", "the kernel block carries the horizon"));
            }
        }
        (Some(_), false) => {
            out.push(violation("domain", format!("{} takes no domain block", command.name())))
        }
        (None, true) => {
            // kernel-info uses the domain only for optional stencil checks
            if command != Command::KernelInfo {
                out.push(violation("domain", "required"));
            }
        }
        (None, false) => {}
    }

    // dimensions must agree between kernels and domain
    let kdim = drafts.kernel.as_ref().map(KernelBlock::dimension);
    if let (Some(k), Some(d)) = (kdim, drafts.domain.as_ref()) {
        if d.lo.is_some() && shape.domain && d.dimension() != k {
            out.push(violation("domain.lo", "dimension must match the kernel"));
        }
    }
    if let (Some(k1), Some(k2)) = (&drafts.kernel, &drafts.kernel2) {
        if k1.dimension() != k2.dimension() {
            out.push(violation("kernel.2.family", "both kernels must share a dimension"));
        }
        if let (Some(d1), Some(d2)) = (k1.delta, k2.delta) {
            if d1 != d2 {
                out.push(violation("kernel.2.delta", "both kernels must share the grid horizon"));
            }
        }
    }
    if matches!(command, Command::DivergenceTheorem | Command::DeformationGradient)
        && kdim == Some(1)
    {
        out.push(violation("kernel.family", "this command works on d = 2 kernels"));
    }
    if command == Command::KernelInfo && kdim == Some(2) {
        out.push(violation("kernel.family", "this command reports d = 1 kernels"));
    }
    if matches!(
        command,
        Command::Apply | Command::Convergence | Command::WeakConvergence | Command::Ibp
    ) && kdim == Some(2)
    {
        out.push(violation("kernel.family", "this command works on d = 1 kernels"));
    }

    // per-command run keys
    if shape.profile {
        match r.profile {
            None => out.push(violation("run.profile", "required")),
            Some(Profile::CollarWave) if command != Command::Apply => out.push(violation(
                "run.profile",
                "the collar wave depends on the horizon; sweep studies cannot use it",
            )),
            Some(p) if command == Command::Convergence && !p.has_classical_derivative() => {
                out.push(violation(
                    "run.profile",
                    "the strong study needs a classical derivative; use weak-convergence",
                ))
            }
            _ => {}
        }
    } else if r.profile.is_some() {
        out.push(violation("run.profile", format!("{} takes no profile", command.name())));
    }
    if command == Command::WeakConvergence {
        match (r.bump_center, r.bump_width) {
            (Some(_), Some(w)) if w > 0.0 => {}
            (Some(_), Some(_)) => out.push(violation("run.bump_width", "must be positive")),
            _ => out.push(violation(
                "run.bump_center",
                "bump_center and bump_width are both required",
            )),
        }
    } else if r.bump_center.is_some() || r.bump_width.is_some() {
        out.push(violation("run.bump_center", "only weak-convergence takes a bump"));
    }
    if command == Command::Figure {
        if r.which.is_none() {
            out.push(violation("run.which", "required: absval or cusp"));
        }
    } else if r.which.is_some() {
        out.push(violation("run.which", "only figure takes a figure selector"));
    }
    if r.subspace.is_some() && command != Command::Spectrum {
        out.push(violation("run.subspace", "only spectrum takes a subspace"));
    }
    if let Some(e) = r.expect {
        let ok = match e {
            Expectation::ImaginaryAxis | Expectation::RealAxis => command == Command::Spectrum,
            Expectation::Decay | Expectation::Plateau => command == Command::Compactness,
        };
        if !ok {
            out.push(violation(
                "run.expect",
                format!("'{}' does not apply to {}", e.name(), command.name()),
            ));
        }
    }
    if r.pairs.is_some() && command != Command::Ibp {
        out.push(violation("run.pairs", "only ibp takes pairs"));
    }
    if r.zero_collar.is_some() && command != Command::Ibp {
        out.push(violation("run.zero_collar", "only ibp takes zero_collar"));
    }
    if r.fields.is_some() && command != Command::DivergenceTheorem {
        out.push(violation("run.fields", "only divergence-theorem takes fields"));
    }
    if r.matrices.is_some() && command != Command::DeformationGradient {
        out.push(violation("run.matrices", "only deformation-gradient takes matrices"));
    }
    if let Some(c) = &r.coefficients {
        if command != Command::DivergenceTheorem {
            out.push(violation("run.coefficients", "only divergence-theorem takes coefficients"));
        } else if c.len() != 2 {
            out.push(violation("run.coefficients", "one coefficient per coordinate (two)"));
        }
    }
    if r.norm_p.is_some() && command != Command::Convergence {
        out.push(violation("run.norm", "only convergence takes a norm"));
    }

    let key_home: [(&str, bool, Command); 12] = [
        ("slope_min", r.slope_min.is_some(), Command::Convergence),
        ("slope_max", r.slope_max.is_some(), Command::Convergence),
        ("expect_normalization", r.expect_normalization.is_some(), Command::KernelInfo),
        ("expect_l1", r.expect_l1.is_some(), Command::KernelInfo),
        ("expect_first", r.expect_first.is_some(), Command::KernelInfo),
        ("expect_second_sym", r.expect_second_sym.is_some(), Command::KernelInfo),
        ("stencil_rtol", r.stencil_rtol.is_some(), Command::KernelInfo),
        ("expect_moments", r.expect_moments.is_some(), Command::KernelInfo),
        ("max_abs_core", r.max_abs_core.is_some(), Command::Apply),
        ("smooth_mismatch_max", r.smooth_mismatch_max.is_some(), Command::Figure),
        ("kink_max", r.kink_max.is_some(), Command::Figure),
        ("amplification_max", r.amplification_max.is_some(), Command::Figure),
    ];
    for (key, set, home) in key_home {
        let fine = match (key, command) {
            ("slope_min" | "slope_max", Command::WeakConvergence) => true,
            _ => command == home,
        };
        if set && !fine {
            out.push(violation(
                &format!("run.{key}"),
                format!("does not apply to {}", command.name()),
            ));
        }
    }
    if r.residual_tol.is_some()
        && !matches!(command, Command::Ibp | Command::DivergenceTheorem)
    {
        out.push(violation("run.residual_tol", "only ibp and divergence-theorem"));
    }
    if r.adjoint_tol.is_some() && command != Command::Ibp {
        out.push(violation("run.adjoint_tol", "only ibp"));
    }
    if (r.ratio_min.is_some() || r.ratio_max.is_some()) && command != Command::Poincare {
        out.push(violation("run.ratio_min", "only poincare"));
    }
    if r.ftol.is_some() && command != Command::DeformationGradient {
        out.push(violation("run.ftol", "only deformation-gradient"));
    }
    if r.stencil_rtol.is_some() && drafts.domain.is_none() {
        out.push(violation(
            "run.stencil_rtol",
            "stencil checks need a [domain] block for n_per_delta",
        ));
    }
    if let Some(m) = &r.expect_moments {
        if m.is_empty() || m.len() > 7 {
            out.push(violation("run.expect_moments", "list orders 0 through at most 6"));
        }
    }
    for (key, v) in [
        ("normalization_rtol", r.normalization_rtol),
        ("moment_rtol", r.moment_rtol),
        ("moment_atol", r.moment_atol),
        ("stencil_rtol", r.stencil_rtol),
        ("residual_tol", r.residual_tol),
        ("adjoint_tol", r.adjoint_tol),
        ("axis_tol", r.axis_tol),
        ("ftol", r.ftol),
    ] {
        if let Some(v) = v {
            if v <= 0.0 {
                out.push(violation(&format!("run.{key}"), "tolerances must be positive"));
            }
        }
    }

    if !out.is_empty() {
        return Err(out);
    }
    Ok(Config {
        run: RunBlock {
            command,
            out: r.out,
            seed: r.seed.unwrap_or(0),
            quad_order,
            threads,
            profile: r.profile,
            norm_p: r.norm_p,
            which: r.which,
            subspace: r.subspace,
            expect: r.expect,
            pairs: r.pairs,
            fields: r.fields,
            matrices: r.matrices,
            zero_collar: r.zero_collar.unwrap_or(false),
            bump_center: r.bump_center,
            bump_width: r.bump_width,
            coefficients: r.coefficients,
            slope_min: r.slope_min,
            slope_max: r.slope_max,
            expect_normalization: r.expect_normalization,
            normalization_rtol: r.normalization_rtol.unwrap_or(1e-9),
            expect_l1: r.expect_l1,
            expect_first: r.expect_first,
            expect_second_sym: r.expect_second_sym,
            moment_rtol: r.moment_rtol.unwrap_or(1e-8),
            stencil_rtol: r.stencil_rtol,
            expect_moments: r.expect_moments,
            moment_atol: r.moment_atol.unwrap_or(1e-10),
            max_abs_core: r.max_abs_core,
            residual_tol: r.residual_tol,
            adjoint_tol: r.adjoint_tol,
            axis_tol: r.axis_tol.unwrap_or(1e-10),
            decay_ratio_max: r.decay_ratio_max.unwrap_or(0.5),
            plateau_floor: r.plateau_floor.unwrap_or(0.1),
            smooth_mismatch_max: r.smooth_mismatch_max,
            kink_max: r.kink_max,
            amplification_max: r.amplification_max,
            ratio_min: r.ratio_min,
            ratio_max: r.ratio_max,
            ftol: r.ftol.unwrap_or(1e-9),
        },
        kernel: drafts.kernel,
        kernel2: drafts.kernel2,
        domain: drafts.domain,
        sweep: drafts.sweep,
    })
}
