//! Boxes, collared lattices, and functions living on them.
//!
//! A `Grid` covers Ω ∪ Γ_δ with cell-centered nodes x_i = lo − δ + (i+½)h.
//! The horizon δ is an exact multiple of h and each box edge is an exact
//! multiple of h, so membership questions (inside Ω, in the collar, deeper
//! than δ) reduce to integer comparisons on lattice indices; no node ever
//! sits on a region boundary and no classification depends on float
//! rounding.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Open box (a₁,b₁)×···; one or two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: [f64; 2],
    hi: [f64; 2],
    dimension: usize,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::validate(&[lo], &[hi])?;
        Ok(Domain { lo: [lo, 0.0], hi: [hi, 0.0], dimension: 1 })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Self::validate(&lo, &hi)?;
        Ok(Domain { lo, hi, dimension: 2 })
    }

    fn validate(lo: &[f64], hi: &[f64]) -> Result<()> {
        for (l, h) in lo.iter().zip(hi) {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::DegenerateDomain(String::from(
                    "box edges must be finite with positive width",
                )));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    fn min_width(&self) -> f64 {
        (0..self.dimension).map(|a| self.width(a)).fold(f64::INFINITY, f64::min)
    }
}

/// Where a lattice node sits relative to Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// In Ω, at least δ from every face: the δ-ball stays inside Ω.
    InteriorCore,
    /// In Ω but within δ of some face (the inner rim Γ_{−δ}).
    BoundaryLayer,
    /// Outside Ω in the collar Γ_δ where constraint values live.
    Collar,
}

/// Cell-centered lattice over Ω ∪ Γ_δ.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    delta: f64,
    h: f64,
    n_per_delta: usize,
    /// Ω nodes per axis
    m: [usize; 2],
    /// total lattice nodes per axis: m + 2 n_per_delta
    dims: [usize; 2],
}

impl Grid {
    /// Lay a lattice with horizon δ resolved by `n_per_delta` steps. Every
    /// box edge must be an exact multiple of the resulting h, and the box
    /// must be wider than 2δ on every axis.
    pub fn build(domain: Domain, delta: f64, n_per_delta: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::DegenerateDomain(String::from("horizon must be positive")));
        }
        if n_per_delta < 2 {
            return Err(Error::ResolutionTooCoarse { n_per_delta });
        }
        if 2.0 * delta >= domain.min_width() {
            return Err(Error::DegenerateDomain(String::from(
                "horizon must be smaller than half the narrowest box edge",
            )));
        }
        let h = delta / n_per_delta as f64;
        let mut m = [0usize; 2];
        let mut dims = [1usize; 2];
        for axis in 0..domain.dimension() {
            let ratio = domain.width(axis) / h;
            let count = libm::round(ratio);
            if libm::fabs(ratio - count) > 1e-9 * ratio {
                return Err(Error::DegenerateDomain(String::from(
                    "box edge is not a whole number of lattice steps",
                )));
            }
            m[axis] = count as usize;
            dims[axis] = m[axis] + 2 * n_per_delta;
        }
        Ok(Grid { domain, delta, h, n_per_delta, m, dims })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_per_delta(&self) -> usize {
        self.n_per_delta
    }

    /// Ω nodes along an axis.
    pub fn omega_extent(&self, axis: usize) -> usize {
        self.m[axis]
    }

    /// All lattice nodes along an axis (Ω plus both collar bands).
    pub fn extent(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    /// Total lattice nodes.
    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Nodes inside Ω.
    pub fn omega_count(&self) -> usize {
        match self.dimension() {
            1 => self.m[0],
            _ => self.m[0] * self.m[1],
        }
    }

    /// Split a flat lattice index into per-axis indices.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        debug_assert!(flat < self.node_count());
        if self.dimension() == 1 {
            [flat, 0]
        } else {
            [flat / self.dims[1], flat % self.dims[1]]
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.dimension() == 1 {
            idx[0]
        } else {
            idx[0] * self.dims[1] + idx[1]
        }
    }

    /// Node coordinates; the second entry is 0 in one dimension.
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 2];
        for axis in 0..self.dimension() {
            x[axis] = self.domain.lo(axis) - self.delta + (idx[axis] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Integer region test, exact by construction.
    pub fn region(&self, flat: usize) -> Region {
        let idx = self.unflatten(flat);
        let n = self.n_per_delta;
        let mut core = true;
        for axis in 0..self.dimension() {
            let i = idx[axis];
            if i < n || i >= n + self.m[axis] {
                return Region::Collar;
            }
            if (i - n).min(n + self.m[axis] - 1 - i) < n {
                core = false;
            }
        }
        if core {
            Region::InteriorCore
        } else {
            Region::BoundaryLayer
        }
    }

    pub fn is_omega(&self, flat: usize) -> bool {
        self.region(flat) != Region::Collar
    }

    /// Position of an Ω node in the packed Ω ordering, if it is one.
    pub fn omega_index(&self, flat: usize) -> Option<usize> {
        let idx = self.unflatten(flat);
        let n = self.n_per_delta;
        for axis in 0..self.dimension() {
            if idx[axis] < n || idx[axis] >= n + self.m[axis] {
                return None;
            }
        }
        Some(if self.dimension() == 1 {
            idx[0] - n
        } else {
            (idx[0] - n) * self.m[1] + (idx[1] - n)
        })
    }

    /// Flat lattice index of the k-th Ω node (inverse of `omega_index`).
    pub fn omega_flat(&self, omega: usize) -> usize {
        debug_assert!(omega < self.omega_count());
        let n = self.n_per_delta;
        if self.dimension() == 1 {
            omega + n
        } else {
            self.flatten([omega / self.m[1] + n, omega % self.m[1] + n])
        }
    }

    /// Flat indices of every collar node, in lattice order.
    pub fn collar_flats(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&f| !self.is_omega(f)).collect()
    }

    /// Flat indices of Ω nodes within δ of the boundary (the inner rim).
    pub fn boundary_layer_flats(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&f| self.region(f) == Region::BoundaryLayer)
            .collect()
    }
}

/// Which node set a grid function stores values on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Values on Ω nodes only, packed.
    OnOmega,
    /// Values on every lattice node, collar included.
    OnOmegaDelta,
    /// Values on every lattice node with the collar identically zero.
    ZeroOnCollar,
}

/// p in the lattice norms (Σ |u|^p h^d)^{1/p}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

/// Values attached to a grid's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    support: Support,
    values: Vec<f64>,
}

impl GridFunction {
    fn expected_len(grid: &Grid, support: Support) -> usize {
        match support {
            Support::OnOmega => grid.omega_count(),
            _ => grid.node_count(),
        }
    }

    pub fn zeros(grid: &Grid, support: Support) -> Self {
        GridFunction {
            grid: grid.clone(),
            support,
            values: vec![0.0; Self::expected_len(grid, support)],
        }
    }

    pub fn from_values(grid: &Grid, support: Support, values: Vec<f64>) -> Result<Self> {
        let expected = Self::expected_len(grid, support);
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, got: values.len() });
        }
        if support == Support::ZeroOnCollar {
            let ok = (0..grid.node_count())
                .all(|f| grid.is_omega(f) || values[f] == 0.0);
            if !ok {
                return Err(Error::DegenerateDomain(String::from(
                    "collar values must vanish for this support",
                )));
            }
        }
        Ok(GridFunction { grid: grid.clone(), support, values })
    }

    /// Sample a pointwise function on the support's nodes.
    pub fn sample(grid: &Grid, support: Support, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dimension();
        let values = match support {
            Support::OnOmega => (0..grid.omega_count())
                .map(|o| {
                    let x = grid.coords(grid.omega_flat(o));
                    f(&x[..d])
                })
                .collect(),
            Support::OnOmegaDelta => {
                (0..grid.node_count()).map(|fl| f(&grid.coords(fl)[..d])).collect()
            }
            Support::ZeroOnCollar => (0..grid.node_count())
                .map(|fl| if grid.is_omega(fl) { f(&grid.coords(fl)[..d]) } else { 0.0 })
                .collect(),
        };
        GridFunction { grid: grid.clone(), support, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at a flat lattice index; collar reads as 0 when not stored.
    pub fn at_flat(&self, flat: usize) -> f64 {
        match self.support {
            Support::OnOmega => self.grid.omega_index(flat).map_or(0.0, |o| self.values[o]),
            _ => self.values[flat],
        }
    }

    /// Embed an Ω function into the full lattice with zero collar; values
    /// are moved bit for bit.
    pub fn extend_by_zero(&self) -> GridFunction {
        match self.support {
            Support::OnOmega => {
                let mut out = GridFunction::zeros(&self.grid, Support::ZeroOnCollar);
                for (o, &v) in self.values.iter().enumerate() {
                    out.values[self.grid.omega_flat(o)] = v;
                }
                out
            }
            _ => {
                let mut out = self.clone();
                out.support = Support::ZeroOnCollar;
                for f in 0..self.grid.node_count() {
                    if !self.grid.is_omega(f) {
                        out.values[f] = 0.0;
                    }
                }
                out
            }
        }
    }

    /// Restrict to Ω nodes (drops collar values); inverse of
    /// `extend_by_zero` on its image.
    pub fn project_to_omega(&self) -> GridFunction {
        match self.support {
            Support::OnOmega => self.clone(),
            _ => {
                let values =
                    (0..self.grid.omega_count()).map(|o| self.values[self.grid.omega_flat(o)]).collect();
                GridFunction { grid: self.grid.clone(), support: Support::OnOmega, values }
            }
        }
    }

    /// (Σ |u|^p h^d)^{1/p} over the stored nodes, or the max for p = ∞.
    pub fn norm(&self, kind: NormKind) -> f64 {
        let hd = libm::pow(self.grid.h, self.grid.dimension() as f64);
        match kind {
            NormKind::L1 => self.values.iter().map(|v| libm::fabs(*v)).sum::<f64>() * hd,
            NormKind::L2 => {
                libm::sqrt(self.values.iter().map(|v| v * v).sum::<f64>() * hd)
            }
            NormKind::LInf => self.values.iter().fold(0.0, |a, &v| a.max(libm::fabs(v))),
        }
    }

    /// h^d-weighted inner product over the common support.
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.check_compatible(other)?;
        let hd = libm::pow(self.grid.h, self.grid.dimension() as f64);
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * hd)
    }

    /// self − other, entrywise.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridFunction { grid: self.grid.clone(), support: self.support, values })
    }

    fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid || self.support != other.support {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}
