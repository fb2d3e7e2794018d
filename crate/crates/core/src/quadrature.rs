//! Reference integration and discrete stencil construction.
//!
//! Two jobs live here. `reference_integrate` produces trusted values of
//! ∫ f(z) μ(z) dz by adaptive Gauss–Kronrod integration, with geometric
//! grading toward the origin when the radial weight is singular; it is the
//! oracle everything else is checked against. `build_stencil` turns a
//! kernel into lattice weights {w_k} so that Σ_k w_k [u(x + kh) − u(x)]
//! approximates the nonlocal derivative. Weights are built per half-line
//! (d = 1) or per symmetry class (d = 2) so that sign structure survives
//! in the weights bit for bit: an antisymmetric kernel yields weights with
//! w_{−k} exactly equal to −w_k.
//!
//! Stencil accuracy: the base weights integrate the kernel against the
//! piecewise-linear hat basis, which already reproduces the zeroth and
//! first moments. Order-two stencils then add the minimum-norm correction
//! that matches all kernel moments up to total degree min(6, δ/h),
//! computed in a shifted-Legendre basis to keep the system well
//! conditioned.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::kernel::{fabs, powf, side_weighted_integral, KernelSpec, SideDesc};
use crate::Result;

// ================================================================ adaptive GK

// 15-point Kronrod extension of 7-point Gauss; nodes symmetric about 0.
const KRONROD_X: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const KRONROD_W: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GAUSS_W: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7–K15 application on [a, b]: (kronrod value, error proxy, resabs).
/// |K15 − G7| overestimates the K15 error on resolved segments; resabs is
/// the K15 value of |f|, the scale roundoff is measured against.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fk = 0.0;
    let mut fg = 0.0;
    let mut fa = 0.0;
    for i in 0..8 {
        let dx = half * KRONROD_X[i];
        let (fp, fm) = (f(c + dx), f(c - dx));
        let pair = if i == 7 { fp } else { fp + fm };
        fk += KRONROD_W[i] * pair;
        fa += KRONROD_W[i] * if i == 7 { fabs(fp) } else { fabs(fp) + fabs(fm) };
        if i % 2 == 1 {
            fg += GAUSS_W[i / 2] * pair;
        }
    }
    let vk = fk * half;
    let vg = fg * half;
    (vk, fabs(vk - vg), fa * fabs(half))
}

const MAX_SEGMENTS: usize = 4096;
// error estimates below this multiple of ∫|f| are floating-point noise
const ROUNDOFF: f64 = 100.0 * 2.220446049250313e-16;

/// Globally adaptive bisection on [a, b]. Stops when the summed error
/// estimate drops under `tol` or under the roundoff floor of the integral,
/// whichever is larger, and returns (value, achieved estimate). Fails only
/// when the segment budget runs out first.
pub(crate) fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let seg = gk15(f, a, b);
    let mut segs: Vec<(f64, f64, (f64, f64, f64))> = vec![(a, b, seg)];
    loop {
        let total_err: f64 = segs.iter().map(|s| s.2 .1).sum();
        let resabs: f64 = segs.iter().map(|s| s.2 .2).sum();
        if total_err <= tol.max(ROUNDOFF * resabs) {
            return Ok((segs.iter().map(|s| s.2 .0).sum(), total_err));
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::QuadratureFailure { achieved: total_err, requested: tol });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap_or(core::cmp::Ordering::Equal))
            .expect("segment list is nonempty");
        let (sa, sb, _) = segs.swap_remove(worst);
        let mid = 0.5 * (sa + sb);
        if mid <= sa || mid >= sb {
            // interval has collapsed to adjacent floats; accept what we have
            let (v, _, r) = gk15(f, sa, sb);
            segs.push((sa, sb, (v, 0.0, r)));
            continue;
        }
        segs.push((sa, mid, gk15(f, sa, mid)));
        segs.push((mid, sb, gk15(f, mid, sb)));
    }
}

/// ∫_a^b f, adaptive, failing when `tol` cannot be certified.
pub fn adaptive_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (value, achieved) = adaptive(&f, a, b, tol)?;
    if achieved > tol {
        return Err(Error::QuadratureFailure { achieved, requested: tol });
    }
    Ok(value)
}

/// ∫₀^δ f(s)·side(s) ds with the side's own singularity structure;
/// returns (value, achieved error estimate).
///
/// Radial-power sides with fractional or sub-one exponent are integrated on
/// geometrically graded panels [δ2^{−m−1}, δ2^{−m}] with an analytic bound
/// for the remaining tail; everything else is smooth enough for plain
/// adaptive integration.
fn side_integral(
    side: &SideDesc,
    delta: f64,
    f: &impl Fn(f64) -> f64,
    tol: f64,
) -> Result<(f64, f64)> {
    match side {
        SideDesc::RadialPoly { amp, beta, poly } => {
            if *amp == 0.0 || poly.is_empty() {
                return Ok((0.0, 0.0));
            }
            let smooth = *beta >= 1.0 && libm::floor(*beta) == *beta;
            let g = |s: f64| f(s) * crate::kernel::side_eval(side, s);
            if smooth {
                return adaptive(&g, 0.0, delta, tol);
            }
            // graded panels toward the singular origin
            let mut total = 0.0;
            let mut achieved = 0.0;
            let mut hi = delta;
            let mut m = 0usize;
            loop {
                let lo = 0.5 * hi;
                // summable panel budgets: Σ 1/((m+1)(m+2)) = 1, and the
                // polynomial decay stays achievable when f·μ is flat near
                // the origin and hundreds of panels are needed
                let panel_tol = tol * 0.25 / ((m + 1) as f64 * (m + 2) as f64);
                let (v, e) = adaptive(&g, lo, hi, panel_tol.max(1e-300))?;
                total += v;
                achieved += e;
                hi = lo;
                m += 1;
                // tail bound: |∫₀^hi| ≤ sup|f| · |amp| Σ|c_l| hi^{β+l}/(β+l)
                let mut tail = 0.0;
                for (l, &c) in poly.iter().enumerate() {
                    let e = beta + l as f64;
                    tail += fabs(c) * powf(hi, e) / e;
                }
                let sup_f = [0.25, 0.5, 0.9, 1.0]
                    .iter()
                    .map(|&q| fabs(f(q * hi)))
                    .fold(0.0f64, f64::max);
                let tail_bound = fabs(*amp) * tail * sup_f * 2.0;
                if tail_bound <= tol * 0.25 || hi == 0.0 {
                    return Ok((total, achieved + tail_bound));
                }
                if m >= MAX_SEGMENTS {
                    return Err(Error::QuadratureFailure {
                        achieved: achieved + tail_bound,
                        requested: tol,
                    });
                }
            }
        }
        SideDesc::Mollifier { .. } => {
            let g = |s: f64| f(s) * crate::kernel::side_eval(side, s);
            adaptive(&g, 0.0, delta, tol)
        }
        SideDesc::Cells { width, delta: d, values } => {
            let mut total = 0.0;
            let mut achieved = 0.0;
            let per = tol / values.len() as f64;
            for (k, &v) in values.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let lo = if k == 0 { 0.0 } else { (k as f64 - 0.5) * width };
                let hi = ((k as f64 + 0.5) * width).min(*d);
                if hi > lo {
                    let (q, e) = adaptive(f, lo, hi, per / fabs(v).max(1e-300))?;
                    total += v * q;
                    achieved += fabs(v) * e;
                }
            }
            Ok((total, achieved))
        }
    }
}

/// Trusted value of ∫ f(z) μ(z) dz over the support of μ, to absolute
/// tolerance `tol`. The workhorse oracle for every discrete construction;
/// fails when the summed error estimate cannot be brought under `tol`.
pub fn reference_integrate(kernel: &KernelSpec, f: impl Fn(&[f64]) -> f64, tol: f64) -> Result<f64> {
    match kernel.dimension() {
        1 => {
            let delta = kernel.delta();
            let (right, er) = side_integral(&kernel.side(true), delta, &|s| f(&[s]), 0.5 * tol)?;
            let (left, el) = side_integral(&kernel.side(false), delta, &|s| f(&[-s]), 0.5 * tol)?;
            if er + el > tol {
                return Err(Error::QuadratureFailure { achieved: er + el, requested: tol });
            }
            Ok(right + left)
        }
        2 => reference_integrate_2d(kernel, &f, tol),
        _ => unreachable!("kernels are one- or two-dimensional"),
    }
}

/// Polar integration over both sectors; the angular direction uses a fixed
/// panel rule at two resolutions (their difference estimates the error),
/// the radial direction reuses the graded machinery via a radial side.
fn reference_integrate_2d(kernel: &KernelSpec, f: &impl Fn(&[f64]) -> f64, tol: f64) -> Result<f64> {
    let sd = kernel.sector_desc().expect("2-d kernels are sector kernels");
    let delta = kernel.delta();
    let phi_t = libm::acos(sd.cos_t);
    let mut total = 0.0;
    for (amp, flip) in [(sd.amp_plus, 1.0), (sd.amp_minus, -1.0)] {
        if amp == 0.0 {
            continue;
        }
        // radial profile r^{β−1}·r = r^β against f along the ray direction
        let radial_side = SideDesc::RadialPoly { amp, beta: sd.beta + 1.0, poly: vec![1.0] };
        let ray = |psi: f64| -> Result<f64> {
            let (c, s) = (libm::cos(psi) * flip, libm::sin(psi) * flip);
            let fr = |r: f64| {
                let (a, b) = (r * c, r * s);
                // un-swap into caller coordinates when the axis is ê₂
                if sd.axis == 0 {
                    f(&[a, b])
                } else {
                    f(&[b, a])
                }
            };
            side_integral(&radial_side, delta, &fr, tol / (16.0 * phi_t.max(1e-6))).map(|(v, _)| v)
        };
        let panels = |count: usize| -> Result<f64> {
            let w = 2.0 * phi_t / count as f64;
            let mut acc = 0.0;
            for p in 0..count {
                let lo = -phi_t + p as f64 * w;
                // 15-point Gauss per angular panel on the ray integrals
                acc += gauss15_fallible(&ray, lo, lo + w)?;
            }
            Ok(acc)
        };
        let coarse = panels(24)?;
        let fine = panels(48)?;
        if fabs(fine - coarse) > tol {
            return Err(Error::QuadratureFailure { achieved: fabs(fine - coarse), requested: tol });
        }
        total += fine;
    }
    Ok(total)
}

/// 15-point Gauss rule where the integrand itself can fail.
fn gauss15_fallible(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
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
    let mut s = W[0] * f(c)?;
    for i in 1..8 {
        let dx = h * X[i];
        s += W[i] * (f(c + dx)? + f(c - dx)?);
    }
    Ok(s * h)
}

// ================================================================ stencils

/// Stencil construction fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    /// Hat-basis product integration only: moments 0 and 1 exact.
    One,
    /// Hat base plus minimum-norm correction matching all moments of total
    /// degree ≤ min(6, δ/h).
    Two,
}

impl StencilOrder {
    /// Numeric selector used by drivers; accepts 1 or 2.
    pub fn from_index(i: usize) -> Option<StencilOrder> {
        match i {
            1 => Some(StencilOrder::One),
            2 => Some(StencilOrder::Two),
            _ => None,
        }
    }
}

/// Lattice weights {w_k} on offsets |kh| ≤ δ approximating μ against point
/// translates: D u(x) ≈ Σ_k w_k [u(x + kh) − u(x)].
#[derive(Debug, Clone)]
pub struct Stencil {
    dimension: usize,
    h: f64,
    n: isize,
    /// dense weights over the (2n+1)^d index box, zero outside the δ-ball
    dense: Vec<f64>,
    /// offsets inside the ball, in deterministic lexicographic order
    offsets: Vec<(isize, isize)>,
}

impl Stencil {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// δ/h: the stencil reaches n lattice steps each way.
    pub fn reach(&self) -> usize {
        self.n as usize
    }

    /// In-ball offsets (k₂ = 0 in one dimension), lexicographic.
    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    fn dense_index(&self, k1: isize, k2: isize) -> usize {
        let side = 2 * self.n + 1;
        ((k1 + self.n) * if self.dimension == 2 { side } else { 1 }
            + if self.dimension == 2 { k2 + self.n } else { 0 }) as usize
    }

    /// Weight at an offset; zero outside the ball or the index box.
    pub fn weight(&self, k1: isize, k2: isize) -> f64 {
        if k1.abs() > self.n || k2.abs() > self.n {
            return 0.0;
        }
        if self.dimension == 1 && k2 != 0 {
            return 0.0;
        }
        self.dense[self.dense_index(k1, k2)]
    }

    /// Iterate (offset, weight) over the ball in deterministic order.
    pub fn iter(&self) -> impl Iterator<Item = ((isize, isize), f64)> + '_ {
        self.offsets.iter().map(move |&(k1, k2)| ((k1, k2), self.weight(k1, k2)))
    }

    /// Σ_k w_k: the discrete total mass μ̄ entering the diagonal of the
    /// assembled operator. Summed over ±k pairs so that an antisymmetric
    /// stencil, whose mirrored weights agree bitwise up to sign, yields
    /// exactly +0.0 rather than accumulated roundoff.
    pub fn total_weight(&self) -> f64 {
        let mut total = self.weight(0, 0);
        for &(k1, k2) in &self.offsets {
            if k1 > 0 || (k1 == 0 && k2 > 0) {
                total += self.weight(k1, k2) + self.weight(-k1, -k2);
            }
        }
        total
    }

    /// Σ_k |w_k|; 2× this bounds the operator norm on l^p.
    pub fn abs_sum(&self) -> f64 {
        self.iter().map(|(_, w)| fabs(w)).sum()
    }

    /// Σ_k w_k (k₁h)^{a₁} (k₂h)^{a₂}: the discrete moment the construction
    /// matches against the kernel's continuum moment.
    pub fn discrete_moment(&self, a1: usize, a2: usize) -> f64 {
        self.iter()
            .map(|((k1, k2), w)| {
                w * powi(k1 as f64 * self.h, a1) * powi(k2 as f64 * self.h, a2)
            })
            .sum()
    }

    /// Even and odd parts (w_s, w_a), w_s(k) = (w(k) + w(−k))/2. The halves
    /// are computed pairwise, so w_s is bitwise symmetric and w_a bitwise
    /// antisymmetric regardless of the parent's structure.
    pub fn parity_parts(&self) -> (Stencil, Stencil) {
        let mut sym = self.clone();
        let mut anti = self.clone();
        for &(k1, k2) in &self.offsets {
            let w = self.weight(k1, k2);
            let wm = self.weight(-k1, -k2);
            let i = self.dense_index(k1, k2);
            sym.dense[i] = 0.5 * (w + wm);
            anti.dense[i] = 0.5 * (w - wm);
        }
        (sym, anti)
    }
}

fn powi(x: f64, e: usize) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Shifted Legendre polynomials on [0, 1], monomial coefficients by degree.
const SHIFTED_LEGENDRE: [&[f64]; 7] = [
    &[1.0],
    &[-1.0, 2.0],
    &[1.0, -6.0, 6.0],
    &[-1.0, 12.0, -30.0, 20.0],
    &[1.0, -20.0, 90.0, -140.0, 70.0],
    &[-1.0, 30.0, -210.0, 560.0, -630.0, 252.0],
    &[1.0, -42.0, 420.0, -1680.0, 3150.0, -2772.0, 924.0],
];

fn shifted_legendre(j: usize, u: f64) -> f64 {
    let mut p = 0.0;
    for &c in SHIFTED_LEGENDRE[j].iter().rev() {
        p = p * u + c;
    }
    p
}

/// Validate the horizon/step relationship and return n = δ/h.
fn lattice_reach(delta: f64, h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::DegenerateDomain(alloc::string::String::from(
            "lattice step must be positive and finite",
        )));
    }
    let ratio = delta / h;
    let n = libm::round(ratio);
    if fabs(ratio - n) > 1e-9 * ratio.max(1.0) || n < 1.0 {
        return Err(Error::IncompatibleHorizon { kernel_delta: delta, grid_delta: h });
    }
    let n = n as usize;
    if n < 2 {
        return Err(Error::ResolutionTooCoarse { n_per_delta: n });
    }
    Ok(n)
}

/// Build the lattice stencil for a kernel at step h. Requires δ/h to be an
/// integer n ≥ 2 (within 1e-9 relative).
pub fn build_stencil(kernel: &KernelSpec, h: f64, order: StencilOrder) -> Result<Stencil> {
    match kernel.dimension() {
        1 => build_stencil_1d(kernel, h, order),
        2 => build_stencil_2d(kernel, h, order),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------- d = 1

fn build_stencil_1d(kernel: &KernelSpec, h: f64, order: StencilOrder) -> Result<Stencil> {
    let delta = kernel.delta();
    let n = lattice_reach(delta, h)?;
    let right = half_line_weights(&kernel.side(true), delta, h, n, order);
    let left = half_line_weights(&kernel.side(false), delta, h, n, order);

    let ni = n as isize;
    let mut dense = vec![0.0; 2 * n + 1];
    dense[n] = right[0] + left[0];
    for k in 1..=n {
        dense[n + k] = right[k];
        dense[n - k] = left[k];
    }
    let offsets = (-ni..=ni).map(|k| (k, 0)).collect();
    Ok(Stencil { dimension: 1, h, n: ni, dense, offsets })
}

/// Weights v_0..v_n on one half-line, built by hat-basis product
/// integration and (order two) Legendre moment correction.
fn half_line_weights(side: &SideDesc, delta: f64, h: f64, n: usize, order: StencilOrder) -> Vec<f64> {
    // a vanishing side gets exact +0.0 weights, not correction noise
    let zero_side = match side {
        SideDesc::RadialPoly { amp, poly, .. } => *amp == 0.0 || poly.iter().all(|&c| c == 0.0),
        SideDesc::Mollifier { amp, .. } => *amp == 0.0,
        SideDesc::Cells { values, .. } => values.iter().all(|&v| v == 0.0),
    };
    if zero_side {
        return vec![0.0; n + 1];
    }
    let mut v = vec![0.0; n + 1];
    for k in 0..=n {
        let node = k as f64 * h;
        let mut w = 0.0;
        if k > 0 {
            // ascending flank on [(k−1)h, kh]: (s − (k−1)h)/h
            let a = node - h;
            let i0 = side_weighted_integral(side, 0, a, node);
            let i1 = side_weighted_integral(side, 1, a, node);
            w += (i1 - a * i0) / h;
        }
        if k < n {
            // descending flank on [kh, (k+1)h]: ((k+1)h − s)/h
            let b = node + h;
            let i0 = side_weighted_integral(side, 0, node, b);
            let i1 = side_weighted_integral(side, 1, node, b);
            w += (b * i0 - i1) / h;
        }
        v[k] = w;
    }

    if order == StencilOrder::One {
        return v;
    }

    // Legendre moment targets t_j = ∫₀^δ P̃_j(s/δ) side(s) ds
    let deg = 6.min(n);
    let mut power_ints = vec![0.0; deg + 1];
    for (m, pi) in power_ints.iter_mut().enumerate() {
        *pi = side_weighted_integral(side, m, 0.0, delta);
    }
    let mut residual = DVector::zeros(deg + 1);
    let mut basis = DMatrix::zeros(deg + 1, n + 1);
    for j in 0..=deg {
        let mut t = 0.0;
        for (m, &c) in SHIFTED_LEGENDRE[j].iter().enumerate() {
            t += c * power_ints[m] / powi(delta, m);
        }
        let mut b = 0.0;
        for k in 0..=n {
            let p = shifted_legendre(j, k as f64 / n as f64);
            basis[(j, k)] = p;
            b += v[k] * p;
        }
        residual[j] = t - b;
    }

    // minimum-norm Δ with basis · Δ = residual, via the Gram system
    let gram = &basis * basis.transpose();
    let y = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&residual),
        None => gram
            .svd(true, true)
            .solve(&residual, 1e-12)
            .expect("svd solve on square gram matrix"),
    };
    let corr = basis.transpose() * y;
    for k in 0..=n {
        v[k] += corr[k];
    }
    v
}

// ---------------------------------------------------------------- d = 2

fn build_stencil_2d(kernel: &KernelSpec, h: f64, order: StencilOrder) -> Result<Stencil> {
    let delta = kernel.delta();
    let n = lattice_reach(delta, h)? as isize;
    let nn = n * n;

    let mut offsets = Vec::new();
    for k1 in -n..=n {
        for k2 in -n..=n {
            if k1 * k1 + k2 * k2 <= nn {
                offsets.push((k1, k2));
            }
        }
    }
    // half set: one representative of each ±k pair
    let half: Vec<(isize, isize)> = offsets
        .iter()
        .copied()
        .filter(|&(k1, k2)| k1 > 0 || (k1 == 0 && k2 > 0))
        .collect();

    let (sym_kernel, anti_kernel) = kernel.decompose();
    let side = (2 * n + 1) as usize;
    let mut dense = vec![0.0; side * side];
    let idx = |k1: isize, k2: isize| ((k1 + n) * (2 * n + 1) + (k2 + n)) as usize;

    for (part, odd) in [(sym_kernel, false), (anti_kernel, true)] {
        let half_w = sector_half_weights(&part, h, n, &half, odd, order);
        for (i, &(k1, k2)) in half.iter().enumerate() {
            dense[idx(k1, k2)] += half_w[i];
            dense[idx(-k1, -k2)] += if odd { -half_w[i] } else { half_w[i] };
        }
        if !odd {
            dense[idx(0, 0)] += half_w[half.len()];
        }
    }

    Ok(Stencil { dimension: 2, h, n, dense, offsets })
}

/// Weights on the half set (plus, for the even part, the origin) matching
/// the part's moments of the given parity up to total degree min(6, n).
fn sector_half_weights(
    part: &KernelSpec,
    h: f64,
    n: isize,
    half: &[(isize, isize)],
    odd: bool,
    order: StencilOrder,
) -> Vec<f64> {
    let delta = part.delta();
    let nvars = half.len() + if odd { 0 } else { 1 };
    let mut u = vec![0.0; nvars];

    // base: midpoint rule per cell; closed-form polar mass for the origin cell
    let cell = h * h;
    for (i, &(k1, k2)) in half.iter().enumerate() {
        u[i] = cell * part.evaluate(&[k1 as f64 * h, k2 as f64 * h]);
    }
    if !odd {
        let sd = part.sector_desc().expect("2-d kernels are sector kernels");
        let w00 = crate::kernel::angular_integral(sd.cos_t, 0, 0);
        let r0 = 0.5 * h;
        u[half.len()] =
            (sd.amp_plus + sd.amp_minus) * w00 * powf(r0, sd.beta + 1.0) / (sd.beta + 1.0);
    }

    if order == StencilOrder::One {
        return u;
    }

    // moment constraints of matching parity, scaled by δ^{|α|}
    let deg = 6.min(n as usize);
    let mut alphas = Vec::new();
    for total in 0..=deg {
        if (total % 2 == 1) != odd {
            continue;
        }
        for a1 in (0..=total).rev() {
            alphas.push((a1, total - a1));
        }
    }

    let rows = alphas.len();
    let mut basis = DMatrix::zeros(rows, nvars);
    let mut residual = DVector::zeros(rows);
    let inv_n = 1.0 / n as f64;
    for (r, &(a1, a2)) in alphas.iter().enumerate() {
        let target = part.moment_2d(a1, a2) / powi(delta, a1 + a2);
        let mut achieved = 0.0;
        for (i, &(k1, k2)) in half.iter().enumerate() {
            // k and −k contribute with equal sign for matching parity
            let e = 2.0 * powi(k1 as f64 * inv_n, a1) * powi(k2 as f64 * inv_n, a2);
            basis[(r, i)] = e;
            achieved += u[i] * e;
        }
        if !odd {
            let e = if a1 + a2 == 0 { 1.0 } else { 0.0 };
            basis[(r, half.len())] = e;
            achieved += u[half.len()] * e;
        }
        residual[r] = target - achieved;
    }

    // minimum-norm correction via SVD-backed pseudo-inverse of the Gram system
    let gram = &basis * basis.transpose();
    let y = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&residual),
        None => gram
            .svd(true, true)
            .solve(&residual, 1e-10)
            .expect("svd solve on square gram matrix"),
    };
    let corr = basis.transpose() * y;
    for i in 0..nvars {
        u[i] += corr[i];
    }
    u
}
