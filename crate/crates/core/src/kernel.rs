//! Kernel families for one-point nonlocal derivatives.
//!
//! A kernel μ is an integrable signed density supported in the closed ball
//! of radius δ. The central family scales a radial weight |z|^{β−1}
//! (integrable iff β > 1 − d) by an angular factor θ and a normalizing
//! constant chosen so the first moment ∫ z μ(z) dz is a unit vector. In
//! one dimension θ is a pair of side weights; in two dimensions θ weights
//! a symmetric pair of sectors around an axis.
//!
//! Moments through order six are available in closed form for every
//! family except the mollifier derivative, whose moments reduce to
//! one-dimensional bump integrals evaluated once per kernel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// C · θ(z/|z|) · |z|^{β−1} on the δ-ball; θ a side pair (d = 1) or sector pair (d = 2).
    PotentialSector,
    /// sign(z)/δ² on (−δ, δ); the β = 1, θ = (−1, +1) potential kernel.
    PiecewiseConstantSign,
    /// C · z^{β−1} on (0, δ) only; the fully asymmetric potential kernel.
    OneSided,
    /// Polynomial in z/δ with split scaling: even-degree terms carry 1/δ,
    /// odd-degree terms 1/δ², so all moments are δ-independent.
    Polynomial,
    /// μ = −η′ for the normalized bump mollifier η supported on (−δ, δ).
    MollifierDerivative,
    /// Cell-averaged values on a uniform lattice of width δ/n.
    Tabulated,
}

/// Angular factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    /// d = 1: weights on the negative and positive half-lines.
    TwoPoint { minus: f64, plus: f64 },
    /// d = 2: weights on the sectors {ω·ê > t} (plus) and {ω·ê < −t} (minus),
    /// where ê is the coordinate axis selected by `axis` and t ∈ (0, 1).
    Sector { t: f64, plus: f64, minus: f64, axis: usize },
}

/// How a moment value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentPath {
    /// Exact antiderivatives (radial powers, polynomials, cell sums).
    ClosedForm,
    /// Reduced to one-dimensional auxiliary integrals evaluated numerically.
    Quadrature,
}

/// Moment table of a kernel: ∫ z^α μ(z) dz for |α| ≤ max_order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    /// ∫ μ.
    pub zeroth: f64,
    /// ∫ z_k μ, one entry per dimension.
    pub first: Vec<f64>,
    /// ((α₁, α₂), value) for 2 ≤ α₁ + α₂ ≤ max_order; α₂ = 0 in d = 1.
    pub higher: Vec<((usize, usize), f64)>,
    /// Provenance of the values.
    pub path: MomentPath,
}

/// A fully specified kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dimension: usize,
    delta: f64,
    beta: f64,
    theta: Option<Theta>,
    coefficients: Vec<f64>,
    normalization: f64,
}

/// One half-line of a d = 1 kernel, as seen from the origin.
///
/// `eval`/`moment` refer to s ∈ (0, δ] with the convention that the left
/// half-line is parameterized by s = −z, i.e. it describes z ↦ μ(−s).
#[derive(Debug, Clone)]
pub(crate) enum SideDesc {
    /// amp · s^{β−1} · Σ poly_l s^l.
    RadialPoly { amp: f64, beta: f64, poly: Vec<f64> },
    /// amp / δ² · g(s/δ) with g the bump-derivative profile.
    Mollifier { amp: f64, delta: f64 },
    /// Piecewise constant: values[0] on [0, w/2), values[k] on [(k−½)w, (k+½)w) ∩ [0, δ].
    Cells { width: f64, delta: f64, values: Vec<f64> },
}

/// Sector kernel parameters in canonical (axis = 0) orientation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SectorDesc {
    pub amp_plus: f64,
    pub amp_minus: f64,
    pub cos_t: f64,
    pub beta: f64,
    pub axis: usize,
}

const MAX_MOMENT_ORDER: usize = 5;

impl KernelSpec {
    // ---------------------------------------------------------------- constructors

    /// General d = 1 potential kernel with explicit amplitude (no normalization).
    pub fn potential_sector_raw(
        delta: f64,
        beta: f64,
        theta_minus: f64,
        theta_plus: f64,
        amplitude: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        check_beta(beta, 1)?;
        Ok(KernelSpec {
            family: KernelFamily::PotentialSector,
            dimension: 1,
            delta,
            beta,
            theta: Some(Theta::TwoPoint { minus: theta_minus, plus: theta_plus }),
            coefficients: Vec::new(),
            normalization: amplitude,
        })
    }

    /// d = 1 potential kernel normalized so that ∫ z μ(z) dz = 1.
    pub fn potential_sector(delta: f64, beta: f64, theta_minus: f64, theta_plus: f64) -> Result<Self> {
        check_delta(delta)?;
        check_beta(beta, 1)?;
        let r = theta_plus - theta_minus;
        if r == 0.0 {
            return Err(Error::DegenerateFirstMoment);
        }
        let c = (1.0 + beta) / (r * powf(delta, 1.0 + beta));
        Self::potential_sector_raw(delta, beta, theta_minus, theta_plus, c)
    }

    /// sign(z)/δ² on (−δ, δ). Antisymmetric, mean-free, unit first moment.
    pub fn piecewise_constant_sign(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(KernelSpec {
            family: KernelFamily::PiecewiseConstantSign,
            dimension: 1,
            delta,
            beta: 1.0,
            theta: Some(Theta::TwoPoint { minus: -1.0, plus: 1.0 }),
            coefficients: Vec::new(),
            normalization: 1.0 / (delta * delta),
        })
    }

    /// (1+β)/δ^{1+β} · z^{β−1} on (0, δ) only. Unit first moment, zeroth
    /// moment (1+β)/(β δ).
    pub fn one_sided(delta: f64, beta: f64) -> Result<Self> {
        check_delta(delta)?;
        check_beta(beta, 1)?;
        Ok(KernelSpec {
            family: KernelFamily::OneSided,
            dimension: 1,
            delta,
            beta,
            theta: Some(Theta::TwoPoint { minus: 0.0, plus: 1.0 }),
            coefficients: Vec::new(),
            normalization: (1.0 + beta) / powf(delta, 1.0 + beta),
        })
    }

    /// Polynomial kernel μ(z) = Σ_k γ_k z^k / δ^{k+1} (k even) + γ_k z^k / δ^{k+2} (k odd)
    /// on [−δ, δ]. The split scaling keeps every moment independent of δ.
    pub fn polynomial(delta: f64, gammas: Vec<f64>) -> Result<Self> {
        check_delta(delta)?;
        if gammas.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidKernel(String::from("non-finite polynomial coefficient")));
        }
        Ok(KernelSpec {
            family: KernelFamily::Polynomial,
            dimension: 1,
            delta,
            beta: 1.0,
            theta: None,
            coefficients: gammas,
            normalization: 1.0,
        })
    }

    /// Fifth-degree polynomial kernel with moments 0 and 1 equal to one and
    /// moments 2 through 4 identically zero for every δ.
    pub fn polynomial_high_order(delta: f64) -> Result<Self> {
        Self::polynomial(
            delta,
            vec![
                225.0 / 128.0,
                3675.0 / 128.0,
                -525.0 / 64.0,
                -6615.0 / 64.0,
                945.0 / 128.0,
                10395.0 / 128.0,
            ],
        )
    }

    /// The zero kernel on (−δ, δ) (empty polynomial).
    pub fn zero(delta: f64) -> Result<Self> {
        Self::polynomial(delta, Vec::new())
    }

    /// μ = −η′ for the unit-mass bump mollifier η(z) = C/δ · exp(−1/(1 − (z/δ)²)).
    /// Antisymmetric, smooth, mean-free, with first moment ∫ z μ = ∫ η = 1 exactly.
    pub fn mollifier_derivative(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let c = 1.0 / (2.0 * bump_h(0));
        Ok(KernelSpec {
            family: KernelFamily::MollifierDerivative,
            dimension: 1,
            delta,
            beta: 1.0,
            theta: None,
            coefficients: Vec::new(),
            normalization: c,
        })
    }

    /// Cell-averaged kernel: values[k] is the average over the cell centered
    /// at offset (k − n)·δ/n, k = 0..2n. Length must be odd and ≥ 3.
    pub fn tabulated(delta: f64, values: Vec<f64>) -> Result<Self> {
        check_delta(delta)?;
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::InvalidKernel(String::from(
                "tabulated kernel needs an odd number (>= 3) of cell values",
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(String::from("non-finite tabulated value")));
        }
        Ok(KernelSpec {
            family: KernelFamily::Tabulated,
            dimension: 1,
            delta,
            beta: 1.0,
            theta: None,
            coefficients: values,
            normalization: 1.0,
        })
    }

    /// d = 2 sector kernel with explicit amplitude.
    pub fn sector_2d_raw(
        delta: f64,
        beta: f64,
        t: f64,
        plus: f64,
        minus: f64,
        axis: usize,
        amplitude: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        check_beta(beta, 2)?;
        if !(0.0 < t && t < 1.0) {
            return Err(Error::InvalidKernel(String::from("sector parameter t must lie in (0, 1)")));
        }
        if axis > 1 {
            return Err(Error::InvalidKernel(String::from("axis must be 0 or 1")));
        }
        Ok(KernelSpec {
            family: KernelFamily::PotentialSector,
            dimension: 2,
            delta,
            beta,
            theta: Some(Theta::Sector { t, plus, minus, axis }),
            coefficients: Vec::new(),
            normalization: amplitude,
        })
    }

    /// d = 2 sector kernel normalized so the first-moment vector is the unit
    /// vector along the chosen axis.
    pub fn sector_2d(delta: f64, beta: f64, t: f64, plus: f64, minus: f64, axis: usize) -> Result<Self> {
        let raw = Self::sector_2d_raw(delta, beta, t, plus, minus, axis, 1.0)?;
        let c = raw.scaling_constant()?;
        Self::sector_2d_raw(delta, beta, t, plus, minus, axis, c)
    }

    // ---------------------------------------------------------------- accessors

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> Option<Theta> {
        self.theta
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    // ---------------------------------------------------------------- evaluation

    /// Pointwise kernel value; exactly zero outside the closed δ-ball.
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dimension, "argument dimension mismatch");
        match self.dimension {
            1 => self.evaluate_1d(z[0]),
            2 => self.evaluate_2d(z[0], z[1]),
            _ => unreachable!("kernels are one- or two-dimensional"),
        }
    }

    fn evaluate_1d(&self, z: f64) -> f64 {
        if fabs(z) > self.delta {
            return 0.0;
        }
        if z == 0.0 {
            // measure-zero point; every family is either 0 or finite here
            return self.normalization
                * match self.family {
                    KernelFamily::Polynomial => {
                        self.coefficients.first().copied().unwrap_or(0.0) / self.delta
                    }
                    KernelFamily::Tabulated => self.coefficients[self.coefficients.len() / 2],
                    _ => 0.0,
                };
        }
        let side = self.side(z > 0.0);
        side_eval(&side, fabs(z))
    }

    fn evaluate_2d(&self, z0: f64, z1: f64) -> f64 {
        let sd = self.sector_desc().expect("2-d kernels are sector kernels");
        let (a, b) = if sd.axis == 0 { (z0, z1) } else { (z1, z0) };
        let r = sqrt(a * a + b * b);
        if r > self.delta || r == 0.0 {
            return 0.0;
        }
        let omega = a / r;
        let radial = powf(r, sd.beta - 1.0);
        if omega > sd.cos_t {
            sd.amp_plus * radial
        } else if omega < -sd.cos_t {
            sd.amp_minus * radial
        } else {
            0.0
        }
    }

    // ---------------------------------------------------------------- structure

    /// μ(−z) = −μ(z), decided from the spec itself (exact, not sampled).
    pub fn is_antisymmetric(&self) -> bool {
        match self.family {
            KernelFamily::PiecewiseConstantSign | KernelFamily::MollifierDerivative => true,
            KernelFamily::Polynomial => {
                self.coefficients.iter().step_by(2).all(|&g| g == 0.0)
            }
            KernelFamily::Tabulated => {
                let v = &self.coefficients;
                (0..v.len()).all(|i| v[i] == -v[v.len() - 1 - i])
            }
            KernelFamily::PotentialSector | KernelFamily::OneSided => match self.theta {
                Some(Theta::TwoPoint { minus, plus }) => minus == -plus,
                Some(Theta::Sector { plus, minus, .. }) => minus == -plus,
                None => false,
            },
        }
    }

    /// μ(−z) = μ(z), decided from the spec itself.
    pub fn is_symmetric(&self) -> bool {
        match self.family {
            KernelFamily::MollifierDerivative => false,
            KernelFamily::PiecewiseConstantSign => false,
            KernelFamily::Polynomial => {
                self.coefficients.iter().skip(1).step_by(2).all(|&g| g == 0.0)
            }
            KernelFamily::Tabulated => {
                let v = &self.coefficients;
                (0..v.len()).all(|i| v[i] == v[v.len() - 1 - i])
            }
            KernelFamily::PotentialSector | KernelFamily::OneSided => match self.theta {
                Some(Theta::TwoPoint { minus, plus }) => minus == plus,
                Some(Theta::Sector { plus, minus, .. }) => minus == plus,
                None => false,
            },
        }
    }

    /// Symmetric and antisymmetric parts (μ_s, μ_a) with μ = μ_s + μ_a.
    /// Every part stays within the family system, so it can be fed back to
    /// any kernel-consuming routine.
    pub fn decompose(&self) -> (KernelSpec, KernelSpec) {
        match self.family {
            KernelFamily::PotentialSector | KernelFamily::PiecewiseConstantSign | KernelFamily::OneSided => {
                match self.theta.expect("potential kernels carry theta") {
                    Theta::TwoPoint { minus, plus } => {
                        let s = 0.5 * (plus + minus);
                        let g = 0.5 * (plus - minus);
                        let mk = |tm: f64, tp: f64| KernelSpec {
                            family: KernelFamily::PotentialSector,
                            dimension: 1,
                            delta: self.delta,
                            beta: self.beta,
                            theta: Some(Theta::TwoPoint { minus: tm, plus: tp }),
                            coefficients: Vec::new(),
                            normalization: self.normalization,
                        };
                        (mk(s, s), mk(-g, g))
                    }
                    Theta::Sector { t, plus, minus, axis } => {
                        let s = 0.5 * (plus + minus);
                        let g = 0.5 * (plus - minus);
                        let mk = |p: f64, m: f64| KernelSpec {
                            family: KernelFamily::PotentialSector,
                            dimension: 2,
                            delta: self.delta,
                            beta: self.beta,
                            theta: Some(Theta::Sector { t, plus: p, minus: m, axis }),
                            coefficients: Vec::new(),
                            normalization: self.normalization,
                        };
                        (mk(s, s), mk(g, -g))
                    }
                }
            }
            KernelFamily::Polynomial => {
                let even: Vec<f64> = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| if k % 2 == 0 { g } else { 0.0 })
                    .collect();
                let odd: Vec<f64> = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| if k % 2 == 1 { g } else { 0.0 })
                    .collect();
                let mk = |c: Vec<f64>| KernelSpec { coefficients: c, ..self.clone() };
                (mk(even), mk(odd))
            }
            KernelFamily::MollifierDerivative => (
                KernelSpec::zero(self.delta).expect("delta already validated"),
                self.clone(),
            ),
            KernelFamily::Tabulated => {
                let v = &self.coefficients;
                let n = v.len();
                let sym: Vec<f64> = (0..n).map(|i| 0.5 * (v[i] + v[n - 1 - i])).collect();
                let asym: Vec<f64> = (0..n).map(|i| 0.5 * (v[i] - v[n - 1 - i])).collect();
                let mk = |c: Vec<f64>| KernelSpec { coefficients: c, ..self.clone() };
                (mk(sym), mk(asym))
            }
        }
    }

    /// The reflected kernel μ̃(z) = μ(−z), the integral part of the adjoint.
    /// Stays within the family system; a reflected one-sided or sign kernel
    /// comes back as a general potential kernel with its sides swapped.
    pub fn reflected(&self) -> KernelSpec {
        match self.family {
            KernelFamily::PotentialSector
            | KernelFamily::PiecewiseConstantSign
            | KernelFamily::OneSided => match self.theta.expect("potential kernels carry theta") {
                Theta::TwoPoint { minus, plus } => KernelSpec {
                    family: KernelFamily::PotentialSector,
                    theta: Some(Theta::TwoPoint { minus: plus, plus: minus }),
                    ..self.clone()
                },
                Theta::Sector { t, plus, minus, axis } => KernelSpec {
                    family: KernelFamily::PotentialSector,
                    theta: Some(Theta::Sector { t, plus: minus, minus: plus, axis }),
                    ..self.clone()
                },
            },
            KernelFamily::Polynomial => {
                let flipped: Vec<f64> = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| if k % 2 == 1 { -g } else { g })
                    .collect();
                KernelSpec { coefficients: flipped, ..self.clone() }
            }
            KernelFamily::MollifierDerivative => {
                // the bump derivative is odd, so reflection is negation
                KernelSpec { normalization: -self.normalization, ..self.clone() }
            }
            KernelFamily::Tabulated => {
                let mut v = self.coefficients.clone();
                v.reverse();
                KernelSpec { coefficients: v, ..self.clone() }
            }
        }
    }

    // ---------------------------------------------------------------- moments

    /// Moment table through `max_order` (0 ≤ max_order ≤ 5).
    pub fn moments(&self, max_order: usize) -> Result<KernelMoments> {
        if max_order > MAX_MOMENT_ORDER {
            return Err(Error::InvalidKernel(String::from("moment order capped at 5")));
        }
        let path = self.moment_path();
        match self.dimension {
            1 => {
                let zeroth = self.moment_1d(0);
                let first = vec![self.moment_1d(1)];
                let mut higher = Vec::new();
                for j in 2..=max_order {
                    higher.push(((j, 0), self.moment_1d(j)));
                }
                Ok(KernelMoments { zeroth, first, higher, path })
            }
            2 => {
                let zeroth = self.moment_2d(0, 0);
                let first = vec![self.moment_2d(1, 0), self.moment_2d(0, 1)];
                let mut higher = Vec::new();
                for total in 2..=max_order {
                    for a1 in (0..=total).rev() {
                        let a2 = total - a1;
                        higher.push(((a1, a2), self.moment_2d(a1, a2)));
                    }
                }
                Ok(KernelMoments { zeroth, first, higher, path })
            }
            _ => unreachable!(),
        }
    }

    fn moment_path(&self) -> MomentPath {
        match (self.family, self.dimension) {
            (KernelFamily::MollifierDerivative, _) => MomentPath::Quadrature,
            (_, 2) => MomentPath::Quadrature,
            _ => MomentPath::ClosedForm,
        }
    }

    /// ∫ z^j μ(z) dz in d = 1, exact through the family's analytic structure.
    /// Available internally for any j (stencil corrections need j ≤ 6).
    pub(crate) fn moment_1d(&self, j: usize) -> f64 {
        debug_assert_eq!(self.dimension, 1);
        let right = side_weighted_integral(&self.side(true), j, 0.0, self.delta);
        let left = side_weighted_integral(&self.side(false), j, 0.0, self.delta);
        if j % 2 == 0 {
            right + left
        } else {
            right - left
        }
    }

    /// ∫ z₁^{a1} z₂^{a2} μ(z) dz in d = 2: radial closed form × angular integral.
    pub(crate) fn moment_2d(&self, a1: usize, a2: usize) -> f64 {
        let sd = self.sector_desc().expect("2-d kernels are sector kernels");
        // swap exponents instead of coordinates for the ê₂-axis orientation
        let (e1, e2) = if sd.axis == 0 { (a1, a2) } else { (a2, a1) };
        let total = (e1 + e2) as f64;
        let radial = powf(self.delta, sd.beta + 1.0 + total) / (sd.beta + 1.0 + total);
        let w = angular_integral(sd.cos_t, e1, e2);
        let sign = if (e1 + e2) % 2 == 0 { 1.0 } else { -1.0 };
        radial * (sd.amp_plus * w + sd.amp_minus * sign * w)
    }

    /// ∫ |μ|: closed form except for sign-changing polynomials, which sum
    /// exact per-piece integrals of |μ| between bisected roots.
    pub fn l1_norm(&self) -> f64 {
        match self.dimension {
            1 => {
                side_abs_integral(&self.side(true), self.delta)
                    + side_abs_integral(&self.side(false), self.delta)
            }
            2 => {
                let sd = self.sector_desc().expect("2-d kernels are sector kernels");
                let radial = powf(self.delta, sd.beta + 1.0) / (sd.beta + 1.0);
                let w = angular_integral(sd.cos_t, 0, 0);
                radial * w * (fabs(sd.amp_plus) + fabs(sd.amp_minus))
            }
            _ => unreachable!(),
        }
    }

    /// μ̄ = ∫ μ (the multiplication-operator weight in D = I − μ̄·EP).
    pub fn mean(&self) -> f64 {
        match self.dimension {
            1 => self.moment_1d(0),
            2 => self.moment_2d(0, 0),
            _ => unreachable!(),
        }
    }

    /// The constant C such that replacing the current amplitude by C gives a
    /// unit first moment along the kernel's mean direction.
    pub fn scaling_constant(&self) -> Result<f64> {
        let m1 = match self.dimension {
            1 => self.moment_1d(1),
            2 => {
                let sd = self.sector_desc().expect("2-d kernels are sector kernels");
                if sd.axis == 0 {
                    self.moment_2d(1, 0)
                } else {
                    self.moment_2d(0, 1)
                }
            }
            _ => unreachable!(),
        };
        let scale = self.l1_norm() * self.delta;
        if fabs(m1) <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateFirstMoment);
        }
        Ok(self.normalization / m1)
    }

    /// Same kernel rescaled to unit first moment.
    pub fn normalized(&self) -> Result<Self> {
        let c = self.scaling_constant()?;
        let mut out = self.clone();
        out.normalization = c;
        Ok(out)
    }

    /// ∫ z² μ_s(z) dz for the symmetric part μ_s (d = 1), or the trace
    /// ∫ |z|² μ_s dz in d = 2. The only moment whose smallness the
    /// convergence theory needs.
    pub fn second_moment_of_symmetric_part(&self) -> Result<f64> {
        let (sym, _) = self.decompose();
        Ok(match self.dimension {
            1 => sym.moment_1d(2),
            2 => sym.moment_2d(2, 0) + sym.moment_2d(0, 2),
            _ => unreachable!(),
        })
    }

    // ---------------------------------------------------------------- internals

    /// Half-line descriptor; `positive` selects z > 0. For the left side the
    /// descriptor represents s ↦ μ(−s), s ∈ (0, δ].
    pub(crate) fn side(&self, positive: bool) -> SideDesc {
        match self.family {
            KernelFamily::PotentialSector | KernelFamily::PiecewiseConstantSign | KernelFamily::OneSided => {
                let (minus, plus) = match self.theta.expect("potential kernels carry theta") {
                    Theta::TwoPoint { minus, plus } => (minus, plus),
                    Theta::Sector { .. } => unreachable!("d = 1 kernels use TwoPoint theta"),
                };
                let side_theta = if positive { plus } else { minus };
                SideDesc::RadialPoly {
                    amp: self.normalization * side_theta,
                    beta: self.beta,
                    poly: vec![1.0],
                }
            }
            KernelFamily::Polynomial => {
                let mut poly = Vec::with_capacity(self.coefficients.len());
                for (k, &g) in self.coefficients.iter().enumerate() {
                    let dpow = if k % 2 == 0 { (k + 1) as f64 } else { (k + 2) as f64 };
                    let sign = if positive || k % 2 == 0 { 1.0 } else { -1.0 };
                    poly.push(sign * g * self.normalization / powf(self.delta, dpow));
                }
                SideDesc::RadialPoly { amp: 1.0, beta: 1.0, poly }
            }
            KernelFamily::MollifierDerivative => SideDesc::Mollifier {
                amp: if positive { self.normalization } else { -self.normalization },
                delta: self.delta,
            },
            KernelFamily::Tabulated => {
                let v = &self.coefficients;
                let n = v.len() / 2;
                let width = self.delta / n as f64;
                let vals: Vec<f64> = if positive {
                    (n..v.len()).map(|i| self.normalization * v[i]).collect()
                } else {
                    (0..=n).rev().map(|i| self.normalization * v[i]).collect()
                };
                SideDesc::Cells { width, delta: self.delta, values: vals }
            }
        }
    }

    pub(crate) fn sector_desc(&self) -> Option<SectorDesc> {
        match self.theta {
            Some(Theta::Sector { t, plus, minus, axis }) => Some(SectorDesc {
                amp_plus: self.normalization * plus,
                amp_minus: self.normalization * minus,
                cos_t: t,
                beta: self.beta,
                axis,
            }),
            _ => None,
        }
    }
}

// -------------------------------------------------------------------- side math

pub(crate) fn side_eval(side: &SideDesc, s: f64) -> f64 {
    match side {
        SideDesc::RadialPoly { amp, beta, poly } => {
            if poly.is_empty() || *amp == 0.0 {
                return 0.0;
            }
            let mut p = 0.0;
            for &c in poly.iter().rev() {
                p = p * s + c;
            }
            amp * powf(s, beta - 1.0) * p
        }
        SideDesc::Mollifier { amp, delta } => {
            let u = s / delta;
            amp / (delta * delta) * bump_derivative_profile(u)
        }
        SideDesc::Cells { width, delta, values } => {
            if s > *delta {
                return 0.0;
            }
            // values[0] covers [0, w/2); values[k] covers [(k−½)w, (k+½)w)
            let idx = ((s / width + 0.5) as usize).min(values.len() - 1);
            values[idx]
        }
    }
}

/// ∫_a^b s^j · side(s) ds, exact antiderivatives per piece.
pub(crate) fn side_weighted_integral(side: &SideDesc, j: usize, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b && a >= 0.0);
    match side {
        SideDesc::RadialPoly { amp, beta, poly } => {
            let mut total = 0.0;
            for (l, &c) in poly.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let e = beta + j as f64 + l as f64;
                total += c * (powf(b, e) - powf(a, e)) / e;
            }
            amp * total
        }
        SideDesc::Mollifier { amp, delta } => {
            // reduce to ∫ u^j g(u) du on [a/δ, b/δ]
            let lo = a / delta;
            let hi = (b / delta).min(1.0);
            if hi <= lo {
                return 0.0;
            }
            let val = gauss_panels(|u| powf(u, j as f64) * bump_derivative_profile(u), lo, hi);
            amp / (delta * delta) * powf(*delta, j as f64 + 1.0) * val
        }
        SideDesc::Cells { width, delta, values } => {
            let b = b.min(*delta);
            if b <= a {
                return 0.0;
            }
            let mut total = 0.0;
            for (k, &v) in values.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let lo = if k == 0 { 0.0 } else { (k as f64 - 0.5) * width };
                let hi = ((k as f64 + 0.5) * width).min(*delta);
                let lo = lo.max(a);
                let hi = hi.min(b);
                if hi > lo {
                    let e = j as f64 + 1.0;
                    total += v * (powf(hi, e) - powf(lo, e)) / e;
                }
            }
            total
        }
    }
}

/// ∫₀^δ |side(s)| ds, splitting at the (at most five) sign changes of the
/// polynomial factor found by bisection on a fine seed grid.
pub(crate) fn side_abs_integral(side: &SideDesc, delta: f64) -> f64 {
    match side {
        SideDesc::RadialPoly { amp, beta, poly } => {
            if poly.is_empty() || *amp == 0.0 {
                return 0.0;
            }
            if poly.len() == 1 {
                return fabs(amp * poly[0]) * powf(delta, *beta) / beta;
            }
            let eval_p = |s: f64| {
                let mut p = 0.0;
                for &c in poly.iter().rev() {
                    p = p * s + c;
                }
                p
            };
            // locate sign changes of the smooth factor
            let mut cuts = vec![0.0];
            let m = 512;
            let mut prev = eval_p(delta * 1e-12);
            for i in 1..=m {
                let s = delta * i as f64 / m as f64;
                let cur = eval_p(s);
                if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
                    let mut lo = delta * (i - 1) as f64 / m as f64;
                    let mut hi = s;
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if (eval_p(mid) < 0.0) == (prev < 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    cuts.push(0.5 * (lo + hi));
                }
                prev = cur;
            }
            cuts.push(delta);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += fabs(side_weighted_integral(side, 0, w[0], w[1]));
            }
            total
        }
        SideDesc::Mollifier { amp, delta: d } => {
            // η is monotone on [0, δ], so ∫₀^δ |η′| = η(0) = C e^{−1}/δ
            fabs(*amp) / d * libm::exp(-1.0)
        }
        SideDesc::Cells { width, delta: d, values } => {
            let mut total = 0.0;
            for (k, &v) in values.iter().enumerate() {
                let lo = if k == 0 { 0.0 } else { (k as f64 - 0.5) * width };
                let hi = ((k as f64 + 0.5) * width).min(*d);
                if hi > lo {
                    total += fabs(v) * (hi - lo);
                }
            }
            total
        }
    }
}

// -------------------------------------------------------------------- bump helpers

/// g(u) = 2u/(1−u²)² · exp(−1/(1−u²)) on (0, 1); the profile of −δ²·η′_δ(δu)/C.
pub(crate) fn bump_derivative_profile(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - u * u;
    2.0 * u / (q * q) * libm::exp(-1.0 / q)
}

/// H_m = ∫₀¹ u^m exp(−1/(1−u²)) du, evaluated with a fixed graded
/// Gauss panel scheme (the integrand vanishes to all orders at u = 1).
pub(crate) fn bump_h(m: usize) -> f64 {
    gauss_panels(|u| powf(u, m as f64) * libm::exp(-1.0 / (1.0 - u * u)), 0.0, 1.0)
}

/// Fixed-panel 15-point Gauss–Legendre sum over 32 uniform panels: plenty
/// for the smooth bump profiles (verified against refinement in tests).
pub(crate) fn gauss_panels(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 32;
    let mut total = 0.0;
    let w = (b - a) / PANELS as f64;
    for p in 0..PANELS {
        let lo = a + p as f64 * w;
        total += gauss15(&f, lo, lo + w);
    }
    total
}

/// 15-point Gauss–Legendre rule on [a, b].
pub(crate) fn gauss15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    // nodes/weights for [-1, 1], symmetric; standard values
    const X: [f64; 8] = [
        0.000000000000000,
        0.201194093997435,
        0.394151347077563,
        0.570972172608539,
        0.724417731360170,
        0.848206583410427,
        0.937273392400706,
        0.987992518020485,
    ];
    const W: [f64; 8] = [
        0.202578241925561,
        0.198431485327112,
        0.186161000015562,
        0.166269205816994,
        0.139570677926154,
        0.107159220467172,
        0.070366047488108,
        0.030753241996117,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = W[0] * f(c);
    for i in 1..8 {
        let dx = h * X[i];
        s += W[i] * (f(c + dx) + f(c - dx));
    }
    s * h
}

/// ∫ cos^{e1}ψ · sin^{e2}ψ dψ over |ψ| ≤ arccos(t); zero for odd e2.
pub(crate) fn angular_integral(cos_t: f64, e1: usize, e2: usize) -> f64 {
    if e2 % 2 == 1 {
        return 0.0;
    }
    let phi_t = libm::acos(cos_t);
    2.0 * gauss_panels(
        |psi| powf(libm::cos(psi), e1 as f64) * powf(libm::sin(psi), e2 as f64),
        0.0,
        phi_t,
    )
}

// -------------------------------------------------------------------- small math

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidKernel(String::from("delta must be positive and finite")));
    }
    Ok(())
}

fn check_beta(beta: f64, dimension: usize) -> Result<()> {
    if !beta.is_finite() || beta <= 1.0 - dimension as f64 {
        return Err(Error::NonIntegrableExponent { beta, dimension });
    }
    Ok(())
}

pub(crate) fn powf(x: f64, e: f64) -> f64 {
    libm::pow(x, e)
}

pub(crate) fn fabs(x: f64) -> f64 {
    libm::fabs(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
