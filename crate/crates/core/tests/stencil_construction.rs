//! Stencil weights: the worked example for the sign kernel, moment
//! exactness after correction, bitwise parity, and the rejection paths.

use nonlocal_core::kernel::KernelSpec;
use nonlocal_core::quadrature::{build_stencil, StencilOrder};
use nonlocal_core::Error;

#[test]
fn sign_kernel_base_weights() {
    // δ = 0.1, h = 0.025 (n = 4): hats give ±1/δ²·h interior, half that on
    // the origin and outermost nodes, and an exactly zero center
    let k = KernelSpec::piecewise_constant_sign(0.1).unwrap();
    let s = build_stencil(&k, 0.025, StencilOrder::One).unwrap();
    assert_eq!(s.reach(), 4);
    assert_eq!(s.weight(0, 0), 0.0);
    for k in 1..=3_isize {
        assert!((s.weight(k, 0) - 2.5).abs() < 1e-12, "w[{k}]");
    }
    assert!((s.weight(4, 0) - 1.25).abs() < 1e-12);
    // discrete mass and first moment are already exact at order one
    assert!(s.discrete_moment(0, 0).abs() < 1e-13);
    assert!((s.discrete_moment(1, 0) - 1.0).abs() < 1e-13);
}

#[test]
fn sign_kernel_antisymmetry_is_bitwise() {
    let k = KernelSpec::piecewise_constant_sign(0.1).unwrap();
    for order in [StencilOrder::One, StencilOrder::Two] {
        let s = build_stencil(&k, 0.0125, order).unwrap();
        for off in 1..=s.reach() as isize {
            let wp = s.weight(off, 0);
            let wm = s.weight(-off, 0);
            assert_eq!(wm.to_bits(), (-wp).to_bits(), "offset {off} order {order:?}");
        }
        assert_eq!(s.weight(0, 0).to_bits(), 0.0_f64.to_bits());
    }
}

#[test]
fn corrected_stencil_matches_all_moments_to_degree_six() {
    let delta = 0.1_f64;
    let k = KernelSpec::one_sided(delta, 0.5).unwrap();
    let s = build_stencil(&k, delta / 32.0, StencilOrder::Two).unwrap();
    let scale = s.abs_sum();
    for j in 0..=6 {
        let discrete = s.discrete_moment(j, 0);
        // analytic: ∫₀^δ z^j (3/2) δ^{−3/2} z^{−1/2} dz = (3/2) δ^{j−1} / (j + 1/2)
        let target = 1.5 * delta.powi(j as i32 - 1) / (j as f64 + 0.5);
        let tol = 1e-12 * scale * delta.powi(j as i32);
        assert!(
            (discrete - target).abs() < tol.max(1e-12 * target.abs()),
            "moment {j}: {discrete} vs {target}"
        );
        if j <= 5 {
            assert!((reference_moment(&k, j) - target).abs() < 1e-12 * target.abs());
        }
    }
    // one-sided kernels put nothing on the left half-line
    for off in 1..=32 {
        assert_eq!(s.weight(-off, 0), 0.0);
    }
}

#[test]
fn order_one_leaves_quadratic_moment_error() {
    let delta = 0.1_f64;
    let k = KernelSpec::one_sided(delta, 0.5).unwrap();
    let coarse = build_stencil(&k, delta / 8.0, StencilOrder::One).unwrap();
    let fine = build_stencil(&k, delta / 16.0, StencilOrder::One).unwrap();
    let target = reference_moment(&k, 2);
    let e_coarse = (coarse.discrete_moment(2, 0) - target).abs();
    let e_fine = (fine.discrete_moment(2, 0) - target).abs();
    assert!(e_coarse > 1e-9, "order one should not be exact past degree 1");
    // roughly O(h²): halving h should cut the error by about 4
    let ratio = e_coarse / e_fine;
    assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio}");
    // moments 0 and 1 are exact even at order one
    assert!((coarse.discrete_moment(0, 0) - reference_moment(&k, 0)).abs() < 1e-10);
    assert!((coarse.discrete_moment(1, 0) - 1.0).abs() < 1e-12);
}

#[test]
fn polynomial_kernel_stencil_keeps_vanishing_moments() {
    let delta = 0.25_f64;
    let k = KernelSpec::polynomial_high_order(delta).unwrap();
    let s = build_stencil(&k, delta / 8.0, StencilOrder::Two).unwrap();
    let scale = s.abs_sum();
    assert!((s.discrete_moment(0, 0) - 1.0).abs() < 1e-12);
    assert!((s.discrete_moment(1, 0) - 1.0).abs() < 1e-12);
    for j in 2..=5 {
        let m = s.discrete_moment(j, 0);
        assert!(m.abs() < 1e-12 * scale * delta.powi(j as i32), "moment {j} = {m}");
    }
    // degree six survives too: compare against the closed value
    let m6 = 2.0 * (225.0 / (128.0 * 7.0) - 525.0 / (64.0 * 9.0) + 945.0 / (128.0 * 11.0))
        * delta.powi(6);
    assert!((s.discrete_moment(6, 0) - m6).abs() < 1e-10 * m6.abs());
}

#[test]
fn mollifier_stencil_moments_and_parity() {
    let delta = 0.2_f64;
    let k = KernelSpec::mollifier_derivative(delta).unwrap();
    let s = build_stencil(&k, delta / 16.0, StencilOrder::Two).unwrap();
    assert!((s.discrete_moment(1, 0) - 1.0).abs() < 1e-11);
    assert!(s.discrete_moment(0, 0).abs() < 1e-11);
    for off in 1..=16 {
        assert_eq!(s.weight(-off, 0).to_bits(), (-s.weight(off, 0)).to_bits());
    }
    assert_eq!(s.weight(0, 0), 0.0);
}

#[test]
fn tabulated_stencil_reproduces_cell_moments() {
    let delta = 0.1_f64;
    let k = KernelSpec::tabulated(delta, vec![-0.5, 2.0, 0.0, 2.0, 1.5]).unwrap();
    let s = build_stencil(&k, delta / 8.0, StencilOrder::Two).unwrap();
    let scale = s.abs_sum().max(1.0);
    for j in 0..=5 {
        let target = reference_moment(&k, j);
        assert!(
            (s.discrete_moment(j, 0) - target).abs() < 1e-11 * scale * delta.powi(j as i32),
            "moment {j}"
        );
    }
}

#[test]
fn parity_parts_split_exactly() {
    let k = KernelSpec::one_sided(0.1, 0.5).unwrap();
    let s = build_stencil(&k, 0.1 / 8.0, StencilOrder::Two).unwrap();
    let (sym, anti) = s.parity_parts();
    assert_eq!(anti.weight(0, 0), 0.0);
    for off in 0..=8_isize {
        let w = s.weight(off, 0);
        let ws = sym.weight(off, 0);
        let wa = anti.weight(off, 0);
        assert_eq!(sym.weight(-off, 0).to_bits(), ws.to_bits());
        if off > 0 {
            assert_eq!(anti.weight(-off, 0).to_bits(), (-wa).to_bits());
        }
        assert!((ws + wa - w).abs() <= 1e-16 * w.abs().max(1.0));
    }
}

#[test]
fn lattice_mismatch_is_rejected() {
    let k = KernelSpec::piecewise_constant_sign(0.1).unwrap();
    assert!(matches!(
        build_stencil(&k, 0.03, StencilOrder::Two),
        Err(Error::IncompatibleHorizon { .. })
    ));
    assert!(matches!(
        build_stencil(&k, 0.1, StencilOrder::Two),
        Err(Error::ResolutionTooCoarse { n_per_delta: 1 })
    ));
    assert!(build_stencil(&k, 0.05, StencilOrder::Two).is_ok());
    assert!(StencilOrder::from_index(3).is_none());
    assert_eq!(StencilOrder::from_index(1), Some(StencilOrder::One));
}

#[test]
fn sector_stencil_matches_planar_moments() {
    let delta = 0.125_f64;
    let k = KernelSpec::sector_2d(delta, 1.0, 0.5, 1.0, -1.0, 0).unwrap();
    let s = build_stencil(&k, delta / 6.0, StencilOrder::Two).unwrap();
    let scale = s.abs_sum();
    for total in 0..=6 {
        for a1 in 0..=total {
            let a2 = total - a1;
            let target = moment_2d_closed(&k, a1, a2);
            let got = s.discrete_moment(a1, a2);
            let tol = 1e-9 * scale * delta.powi(total as i32);
            assert!(
                (got - target).abs() < tol.max(1e-9 * target.abs()),
                "moment ({a1},{a2}): {got} vs {target}"
            );
        }
    }
}

#[test]
fn sector_stencil_antisymmetry_is_bitwise() {
    let delta = 0.125_f64;
    let k = KernelSpec::sector_2d(delta, 1.0, 0.5, 1.0, -1.0, 0).unwrap();
    let s = build_stencil(&k, delta / 6.0, StencilOrder::Two).unwrap();
    for &(k1, k2) in s.offsets() {
        let w = s.weight(k1, k2);
        let wm = s.weight(-k1, -k2);
        if (k1, k2) == (0, 0) {
            assert_eq!(w, 0.0);
        } else {
            assert_eq!(wm.to_bits(), (-w).to_bits(), "offset ({k1},{k2})");
        }
    }
}

#[test]
fn one_sided_sector_stencil_mixed_parity_moments() {
    // single sector, neither symmetric nor antisymmetric
    let delta = 0.1_f64;
    let k = KernelSpec::sector_2d(delta, 0.5, 0.5, 1.0, 0.0, 0).unwrap();
    let s = build_stencil(&k, delta / 4.0, StencilOrder::Two).unwrap();
    let scale = s.abs_sum();
    for total in 0..=4 {
        for a1 in 0..=total {
            let a2 = total - a1;
            let target = moment_2d_closed(&k, a1, a2);
            let got = s.discrete_moment(a1, a2);
            let tol = 1e-9 * scale * delta.powi(total as i32);
            assert!((got - target).abs() < tol.max(1e-9 * target.abs()), "({a1},{a2})");
        }
    }
}

/// Moment of a d = 1 kernel through the public table (j ≤ 5).
fn reference_moment(k: &KernelSpec, j: usize) -> f64 {
    match j {
        0 => k.moments(0).unwrap().zeroth,
        1 => k.moments(1).unwrap().first[0],
        _ => {
            let m = k.moments(j).unwrap();
            m.higher.iter().find(|(a, _)| a.0 == j).unwrap().1
        }
    }
}

/// Independent planar sector moment: radial factor analytic, angular factor
/// by composite Simpson on the sector arc. Never touches the crate's own
/// moment code.
fn moment_2d_closed(k: &KernelSpec, a1: usize, a2: usize) -> f64 {
    let (t, plus, minus, axis) = match k.theta() {
        Some(nonlocal_core::kernel::Theta::Sector { t, plus, minus, axis }) => {
            (t, plus, minus, axis)
        }
        other => panic!("expected sector theta, got {other:?}"),
    };
    let (e1, e2) = if axis == 0 { (a1, a2) } else { (a2, a1) };
    if e2 % 2 == 1 {
        return 0.0;
    }
    let phi = t.acos();
    let f = |psi: f64| psi.cos().powi(e1 as i32) * psi.sin().powi(e2 as i32);
    let n = 4096;
    let h = 2.0 * phi / n as f64;
    let mut w = f(-phi) + f(phi);
    for i in 1..n {
        let x = -phi + i as f64 * h;
        w += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    w *= h / 3.0;
    // z^α brings r^{|α|}, the area element brings one more r:
    // ∫₀^δ r^{β−1+|α|+1} dr = δ^{β+1+|α|}/(β+1+|α|)
    let total = (e1 + e2) as f64;
    let sign = if (e1 + e2) % 2 == 0 { 1.0 } else { -1.0 };
    let radial = k.delta().powf(k.beta() + 1.0 + total) / (k.beta() + 1.0 + total);
    k.normalization() * (plus + sign * minus) * radial * w
}
