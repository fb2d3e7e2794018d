//! Discrete nonlocal derivative operators on collared lattices.
//!
//! An operator couples a stencil to a grid with the same horizon. Rows are
//! indexed by lattice nodes; a row is the stencil difference when the node
//! lies in Ω and zero when it lies in the collar, so collar values act as
//! boundary data, never as unknowns. The matrix splits as (integral part)
//! minus (total weight)·(restriction part), and its transpose, taken under
//! the uniform cell measure, is the exact discrete adjoint.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::Error;
use crate::geometry::{Grid, GridFunction, Region, Support};
use crate::kernel::KernelSpec;
use crate::quadrature::{build_stencil, Stencil, StencilOrder};
use crate::Result;

use libm::fabs;

/// |Σ w_k| at or below this marks the discrete kernel as mean-free.
const MEAN_FREE_TOL: f64 = 1e-12;

/// Lattice discretization of the nonlocal derivative with zero rows on the
/// collar. `adjoint()` gives a transposed view of the same data.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    grid: Grid,
    stencil: Stencil,
    kernel: Option<KernelSpec>,
    /// total stencil weight, the discrete kernel mass
    mass: f64,
    mean_free: bool,
    antisymmetric: bool,
    /// apply the transpose instead of the forward matrix
    adjoint: bool,
}

impl NonlocalOperator {
    /// Build the stencil for `kernel` on the grid's spacing and couple the
    /// two. The kernel horizon must equal the grid collar width.
    pub fn assemble(kernel: &KernelSpec, grid: &Grid, order: StencilOrder) -> Result<Self> {
        if kernel.dimension() != grid.dimension() {
            return Err(Error::GridMismatch);
        }
        if fabs(kernel.delta() - grid.delta()) > 1e-12 * kernel.delta() {
            return Err(Error::IncompatibleHorizon {
                kernel_delta: kernel.delta(),
                grid_delta: grid.delta(),
            });
        }
        let stencil = build_stencil(kernel, grid.h(), order)?;
        let mass = stencil.total_weight();
        Ok(NonlocalOperator {
            grid: grid.clone(),
            stencil,
            kernel: Some(kernel.clone()),
            mass,
            mean_free: fabs(mass) <= MEAN_FREE_TOL,
            antisymmetric: kernel.is_antisymmetric(),
            adjoint: false,
        })
    }

    /// Couple an existing stencil to a grid. Reach and spacing must match
    /// the collar exactly.
    pub fn with_stencil(stencil: Stencil, grid: &Grid) -> Result<Self> {
        if stencil.dimension() != grid.dimension()
            || stencil.reach() != grid.n_per_delta()
            || stencil.h() != grid.h()
        {
            return Err(Error::GridMismatch);
        }
        let mass = stencil.total_weight();
        let antisymmetric = stencil
            .offsets()
            .iter()
            .all(|&(k1, k2)| stencil.weight(-k1, -k2) == -stencil.weight(k1, k2));
        Ok(NonlocalOperator {
            grid: grid.clone(),
            stencil,
            kernel: None,
            mass,
            mean_free: fabs(mass) <= MEAN_FREE_TOL,
            antisymmetric,
            adjoint: false,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// The kernel this operator was assembled from, if any.
    pub fn kernel_meta(&self) -> Option<&KernelSpec> {
        self.kernel.as_ref()
    }

    /// Discrete kernel mass Σ_k w_k.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// |Σ w_k| ≤ 1e-12: the discrete kernel integrates to zero.
    pub fn is_mean_free(&self) -> bool {
        self.mean_free
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    /// Whether this is a transposed view.
    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    /// The transpose as an operator. Under the uniform cell measure the
    /// transpose is the exact discrete adjoint: ⟨Au, v⟩ = ⟨u, Aᵀv⟩ up to
    /// roundoff in the pairing sums. Entrywise it realizes the reflected
    /// kernel's integral part minus mass times restriction to Ω.
    pub fn adjoint(&self) -> NonlocalOperator {
        let mut t = self.clone();
        t.adjoint = !self.adjoint;
        t
    }

    /// Row-sum bound: every row of the matrix (or its transpose) has l1
    /// norm at most this.
    pub fn row_norm_bound(&self) -> f64 {
        let off: f64 = self
            .stencil
            .iter()
            .filter(|&((k1, k2), _)| k1 != 0 || k2 != 0)
            .map(|(_, w)| fabs(w))
            .sum();
        off + fabs(self.stencil.weight(0, 0) - self.mass)
    }

    fn flat_offsets(&self) -> Vec<(isize, f64)> {
        let stride = self.grid.extent(1) as isize;
        self.stencil.iter().map(|((k1, k2), w)| (k1 * stride + k2, w)).collect()
    }

    /// Apply to a lattice function. Forward: collar values feed the
    /// differences (Ω-only input is extended by zero) and the output lives
    /// on Ω. Transposed: collar input is ignored (those columns are zero)
    /// and the output spreads onto the whole lattice.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if self.adjoint {
            self.apply_transpose(u)
        } else {
            self.apply_forward(u)
        }
    }

    fn apply_forward(&self, u: &GridFunction) -> Result<GridFunction> {
        let extended;
        let vals = match u.support() {
            Support::OnOmega => {
                extended = u.extend_by_zero();
                extended.values()
            }
            _ => u.values(),
        };
        let offs = self.flat_offsets();
        let mut out = GridFunction::zeros(&self.grid, Support::OnOmega);
        for o in 0..self.grid.omega_count() {
            let f = self.grid.omega_flat(o) as isize;
            let uf = vals[f as usize];
            let mut acc = 0.0;
            for &(off, w) in &offs {
                acc += w * (vals[(f + off) as usize] - uf);
            }
            out.values_mut()[o] = acc;
        }
        Ok(out)
    }

    fn apply_transpose(&self, v: &GridFunction) -> Result<GridFunction> {
        let packed;
        let vals = match v.support() {
            Support::OnOmega => v.values(),
            _ => {
                packed = v.project_to_omega();
                packed.values()
            }
        };
        let offs = self.flat_offsets();
        let mut out = GridFunction::zeros(&self.grid, Support::OnOmegaDelta);
        for o in 0..self.grid.omega_count() {
            let f = self.grid.omega_flat(o) as isize;
            let vi = vals[o];
            for &(off, w) in &offs {
                out.values_mut()[(f + off) as usize] += w * vi;
            }
            out.values_mut()[f as usize] -= self.mass * vi;
        }
        Ok(out)
    }

    /// Dense matrix restricted to Ω rows and columns, the operator seen by
    /// functions that vanish on the collar. Transposed for adjoint views.
    pub fn omega_matrix(&self) -> DMatrix<f64> {
        let m = self.grid.omega_count();
        let offs = self.flat_offsets();
        let mut a = DMatrix::zeros(m, m);
        for row in 0..m {
            let f = self.grid.omega_flat(row) as isize;
            for &(off, w) in &offs {
                if let Some(col) = self.grid.omega_index((f + off) as usize) {
                    a[(row, col)] += w;
                }
            }
            a[(row, row)] -= self.mass;
        }
        if self.adjoint {
            a.transpose()
        } else {
            a
        }
    }

    /// Dense matrix over every lattice node; collar rows are identically
    /// zero (collar columns for adjoint views).
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.node_count();
        let offs = self.flat_offsets();
        let mut a = DMatrix::zeros(n, n);
        for flat in 0..n {
            if !self.grid.is_omega(flat) {
                continue;
            }
            for &(off, w) in &offs {
                a[(flat, (flat as isize + off) as usize)] += w;
            }
            a[(flat, flat)] -= self.mass;
        }
        if self.adjoint {
            a.transpose()
        } else {
            a
        }
    }

    /// Sparse triplets (row, col, value) over full lattice indices, sorted
    /// by row then column. Zero rows are omitted. Structural zeros inside a
    /// row are dropped except the forward diagonal, which is always present.
    pub fn to_coo(&self) -> Vec<(usize, usize, f64)> {
        let offs = self.flat_offsets();
        let mut out = Vec::new();
        for flat in 0..self.grid.node_count() {
            if !self.grid.is_omega(flat) {
                continue;
            }
            for &(off, w) in &offs {
                let col = (flat as isize + off) as usize;
                let value = if off == 0 { w - self.mass } else { w };
                if value != 0.0 || off == 0 {
                    out.push((flat, col, value));
                }
            }
        }
        if self.adjoint {
            for t in out.iter_mut() {
                *t = (t.1, t.0, t.2);
            }
            out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        }
        out
    }

    /// Collar pairing B(u, v) = Σ_{x∈Ω} Σ_{y∈Γ_δ} [w_{y−x} u(y) v(x) −
    /// w_{x−y} u(x) v(y)] h^d of the underlying forward operator. Together
    /// with the reflected-kernel operator it turns summation by parts into
    /// an algebraic identity: ⟨Du, v⟩_Ω = ⟨u, D̃v⟩_Ω + B(u, v), exactly up
    /// to roundoff.
    pub fn collar_form(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        if *u.grid() != self.grid || *v.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let stride = self.grid.extent(1) as isize;
        let mut acc = 0.0;
        // only rim nodes have collar partners within reach
        for x in self.grid.boundary_layer_flats() {
            let ux = u.at_flat(x);
            let vx = v.at_flat(x);
            for ((k1, k2), w) in self.stencil.iter() {
                let y = (x as isize + k1 * stride + k2) as usize;
                if self.grid.is_omega(y) {
                    continue;
                }
                let wback = self.stencil.weight(-k1, -k2);
                acc += w * u.at_flat(y) * vx - wback * ux * v.at_flat(y);
            }
        }
        let hd = libm::pow(self.grid.h(), self.grid.dimension() as f64);
        Ok(acc * hd)
    }

    /// Σ_Ω (Du)(x) h^d of the forward operator. Equals `collar_form(u, 1)`
    /// up to roundoff for any kernel, the discrete divergence theorem.
    pub fn omega_total(&self, u: &GridFunction) -> Result<f64> {
        let du = self.apply_forward(u)?;
        let hd = libm::pow(self.grid.h(), self.grid.dimension() as f64);
        Ok(du.values().iter().sum::<f64>() * hd)
    }
}

/// How a family of componentwise operators combines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    /// Σ_k c_k D_k u applied to one scalar field.
    LinearCombination,
    /// (c_1 D_1 u, …, c_m D_m u) stacked from one scalar field.
    Gradient,
    /// Σ_k c_k D_k u_k contracted against a vector field.
    Divergence,
}

/// Componentwise operators with scalar coefficients, sharing one grid.
#[derive(Debug, Clone)]
pub struct VectorOperator {
    components: Vec<NonlocalOperator>,
    coefficients: Vec<f64>,
    kind: VectorKind,
}

impl VectorOperator {
    /// Couple components and coefficients. All components must share one
    /// grid; the lists must have equal nonzero length.
    pub fn new(
        components: Vec<NonlocalOperator>,
        coefficients: Vec<f64>,
        kind: VectorKind,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, got: 0 });
        }
        if coefficients.len() != components.len() {
            return Err(Error::LengthMismatch {
                expected: components.len(),
                got: coefficients.len(),
            });
        }
        for op in &components {
            if *op.grid() != *components[0].grid() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(VectorOperator { components, coefficients, kind })
    }

    pub fn components(&self) -> &[NonlocalOperator] {
        &self.components
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    /// Σ_k c_k D_k u, one scalar field out.
    pub fn combination(&self, u: &GridFunction) -> Result<GridFunction> {
        let mut out = self.components[0].apply(u)?;
        for v in out.values_mut() {
            *v *= self.coefficients[0];
        }
        for (op, &c) in self.components.iter().zip(&self.coefficients).skip(1) {
            let part = op.apply(u)?;
            for (o, p) in out.values_mut().iter_mut().zip(part.values()) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// Componentwise application to a scalar field, coefficients included.
    pub fn gradient(&self, u: &GridFunction) -> Result<Vec<GridFunction>> {
        self.components
            .iter()
            .zip(&self.coefficients)
            .map(|(op, &c)| {
                let mut part = op.apply(u)?;
                for v in part.values_mut() {
                    *v *= c;
                }
                Ok(part)
            })
            .collect()
    }

    /// Σ_k c_k D_k u_k for a vector field with one component per operator.
    pub fn divergence(&self, u: &[GridFunction]) -> Result<GridFunction> {
        if u.len() != self.components.len() {
            return Err(Error::LengthMismatch { expected: self.components.len(), got: u.len() });
        }
        let mut out = self.components[0].apply(&u[0])?;
        for v in out.values_mut() {
            *v *= self.coefficients[0];
        }
        for ((op, &c), uc) in self.components.iter().zip(&self.coefficients).zip(u).skip(1) {
            let part = op.apply(uc)?;
            for (o, p) in out.values_mut().iter_mut().zip(part.values()) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// |Σ_Ω (𝒟v)(x) h^d − Σ_{x∈Γ_{−δ}} Σ_{y∈Γ_δ} [v⃗(x)+v⃗(y)]·w⃗_{y−x} h^d|,
    /// the two sides of the discrete divergence theorem. Every component
    /// kernel must be antisymmetric; for those the identity is algebraic
    /// and the residual is pure roundoff.
    pub fn divergence_theorem_residual(&self, v: &[GridFunction]) -> Result<f64> {
        if v.len() != self.components.len() {
            return Err(Error::LengthMismatch { expected: self.components.len(), got: v.len() });
        }
        for op in &self.components {
            if !op.is_antisymmetric() {
                return Err(Error::NotAntisymmetric);
            }
        }
        let grid = self.grid();
        let hd = libm::pow(grid.h(), grid.dimension() as f64);
        let div = self.divergence(v)?;
        let left = div.values().iter().sum::<f64>() * hd;
        let stride = grid.extent(1) as isize;
        let mut right = 0.0;
        for ((op, &c), vc) in self.components.iter().zip(&self.coefficients).zip(v) {
            let mut acc = 0.0;
            for x in grid.boundary_layer_flats() {
                let vx = vc.at_flat(x);
                for ((k1, k2), w) in op.stencil().iter() {
                    let y = (x as isize + k1 * stride + k2) as usize;
                    if grid.is_omega(y) {
                        continue;
                    }
                    acc += w * (vx + vc.at_flat(y));
                }
            }
            right += c * acc * hd;
        }
        Ok(fabs(left - right))
    }

    /// Shape-tensor fit of the deformation gradient at a node: with one
    /// kernel component per coordinate, F̄ = Ĝ S^{−1} where Ĝ[a][b] =
    /// Σ_k w_b(k) [y_a(x+kh) − y_a(x)] and S[b][c] = Σ_k w_b(k) k_c h.
    /// Exact for affine deformations. Coefficients cancel in the product
    /// and are ignored. Fails when the component weights cannot resolve
    /// all directions, for instance when two components share an axis or a
    /// component kernel is symmetric (zero first moment).
    pub fn deformation_gradient(&self, y: &[GridFunction], flat: usize) -> Result<[[f64; 2]; 2]> {
        let grid = self.grid();
        let d = grid.dimension();
        if self.components.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: self.components.len() });
        }
        if y.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: y.len() });
        }
        for comp in y {
            if *comp.grid() != *grid {
                return Err(Error::GridMismatch);
            }
        }
        if !grid.is_omega(flat) {
            return Err(Error::GridMismatch);
        }
        let h = grid.h();
        let stride = grid.extent(1) as isize;
        let mut s = [[0.0f64; 2]; 2];
        let mut g = [[0.0f64; 2]; 2];
        // scale: the largest entry any component's weights could produce
        let mut scale = 0.0f64;
        for (b, op) in self.components.iter().enumerate() {
            let st = op.stencil();
            let cap = st.abs_sum() * st.reach() as f64 * h;
            if cap > scale {
                scale = cap;
            }
            for ((k1, k2), w) in st.iter() {
                let nb = (flat as isize + k1 * stride + k2) as usize;
                let z = [k1 as f64 * h, k2 as f64 * h];
                for c in 0..d {
                    s[b][c] += w * z[c];
                }
                for a in 0..d {
                    g[a][b] += w * (y[a].at_flat(nb) - y[a].at_flat(flat));
                }
            }
        }
        if d == 1 {
            let det = s[0][0];
            if !(fabs(det) > 1e-12 * scale) {
                return Err(Error::SingularShapeTensor { det });
            }
            return Ok([[g[0][0] / det, 0.0], [0.0, 0.0]]);
        }
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(fabs(det) > 1e-12 * scale * scale) {
            return Err(Error::SingularShapeTensor { det });
        }
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let mut f = [[0.0; 2]; 2];
        for a in 0..2 {
            for c in 0..2 {
                f[a][c] = g[a][0] * inv[0][c] + g[a][1] * inv[1][c];
            }
        }
        Ok(f)
    }
}

/// Assemble one operator per kernel on a shared grid and couple them with
/// coefficients.
pub fn build_vector_operator(
    kernels: &[KernelSpec],
    coefficients: &[f64],
    kind: VectorKind,
    grid: &Grid,
    order: StencilOrder,
) -> Result<VectorOperator> {
    if coefficients.len() != kernels.len() {
        return Err(Error::LengthMismatch { expected: kernels.len(), got: coefficients.len() });
    }
    let components = kernels
        .iter()
        .map(|k| NonlocalOperator::assemble(k, grid, order))
        .collect::<Result<Vec<_>>>()?;
    VectorOperator::new(components, coefficients.to_vec(), kind)
}

/// Deformation-gradient fit from loose parts: one kernel per coordinate,
/// one lattice function per deformed coordinate, evaluated at one node.
pub fn approximate_deformation_gradient(
    kernels: &[KernelSpec],
    y: &[GridFunction],
    flat: usize,
    order: StencilOrder,
) -> Result<[[f64; 2]; 2]> {
    let first = y.first().ok_or(Error::LengthMismatch { expected: 1, got: 0 })?;
    let coefficients = alloc::vec![1.0; kernels.len()];
    let vop = build_vector_operator(
        kernels,
        &coefficients,
        VectorKind::LinearCombination,
        first.grid(),
        order,
    )?;
    vop.deformation_gradient(y, flat)
}

/// Convenience list of core nodes, where the stencil ball stays inside Ω.
pub fn core_flats(grid: &Grid) -> Vec<usize> {
    (0..grid.node_count()).filter(|&f| grid.region(f) == Region::InteriorCore).collect()
}
