use nonlocal_core::geometry::{Domain, Grid, GridFunction, NormKind, Region, Support};
use nonlocal_core::Error;

#[test]
fn unit_interval_counts_and_coords() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let grid = Grid::build(dom, 0.1, 4).unwrap();

    assert_eq!(grid.h(), 0.025);
    assert_eq!(grid.omega_count(), 40);
    assert_eq!(grid.node_count(), 48);
    assert_eq!(grid.collar_flats().len(), 8);

    // first node is centered in the first collar cell
    let x0 = grid.coords(0)[0];
    assert!((x0 - (-0.1 + 0.5 * 0.025)).abs() < 1e-15);
    // last node mirrors it past the right face
    let xl = grid.coords(47)[0];
    assert!((xl - (1.1 - 0.5 * 0.025)).abs() < 1e-15);

    // region bands: 4 collar, 4 rim, 32 core, 4 rim, 4 collar
    let regions: Vec<Region> = (0..48).map(|f| grid.region(f)).collect();
    assert!(regions[..4].iter().all(|r| *r == Region::Collar));
    assert!(regions[4..8].iter().all(|r| *r == Region::BoundaryLayer));
    assert!(regions[8..40].iter().all(|r| *r == Region::InteriorCore));
    assert!(regions[40..44].iter().all(|r| *r == Region::BoundaryLayer));
    assert!(regions[44..].iter().all(|r| *r == Region::Collar));

    // integer classification agrees with the geometric definition
    for f in 0..48 {
        let x = grid.coords(f)[0];
        let inside = x > 0.0 && x < 1.0;
        assert_eq!(grid.is_omega(f), inside);
        if inside {
            let dist = x.min(1.0 - x);
            let core = grid.region(f) == Region::InteriorCore;
            assert_eq!(core, dist >= 0.1);
        }
    }
}

#[test]
fn rectangle_counts_and_frame() {
    let dom = Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap();
    let grid = Grid::build(dom, 0.1, 2).unwrap();

    assert_eq!(grid.extent(0), 24);
    assert_eq!(grid.extent(1), 24);
    assert_eq!(grid.node_count(), 576);
    assert_eq!(grid.omega_count(), 400);
    assert_eq!(grid.collar_flats().len(), 576 - 400);

    // core shrinks by n_per_delta on each side of each axis
    let core = (0..grid.node_count())
        .filter(|&f| grid.region(f) == Region::InteriorCore)
        .count();
    assert_eq!(core, 16 * 16);

    // omega indexing round-trips through flat indices
    for o in 0..grid.omega_count() {
        let f = grid.omega_flat(o);
        assert_eq!(grid.omega_index(f), Some(o));
    }
    for f in grid.collar_flats() {
        assert_eq!(grid.omega_index(f), None);
    }
}

#[test]
fn build_rejects_bad_setups() {
    let dom = || Domain::interval(0.0, 1.0).unwrap();

    match Grid::build(dom(), 0.1, 1) {
        Err(Error::ResolutionTooCoarse { n_per_delta: 1 }) => {}
        other => panic!("expected coarse-resolution error, got {other:?}"),
    }
    assert!(matches!(Grid::build(dom(), 0.5, 4), Err(Error::DegenerateDomain(_))));
    // 1 / (0.07/4) is not an integer
    assert!(matches!(Grid::build(dom(), 0.07, 4), Err(Error::DegenerateDomain(_))));
    assert!(Domain::interval(1.0, 1.0).is_err());
    assert!(Domain::rectangle([0.0, 0.0], [1.0, f64::NAN]).is_err());
}

#[test]
fn extend_and_project_are_bit_exact_inverses() {
    let dom = Domain::rectangle([0.0, 0.0], [1.0, 0.5]).unwrap();
    let grid = Grid::build(dom, 0.05, 2).unwrap();

    let u = GridFunction::sample(&grid, Support::OnOmega, |x| {
        (31.0 * x[0]).sin() * (17.0 * x[1]).cos() + 0.1
    });
    let ext = u.extend_by_zero();
    assert_eq!(ext.support(), Support::ZeroOnCollar);
    for f in grid.collar_flats() {
        assert_eq!(ext.values()[f], 0.0);
    }
    let back = ext.project_to_omega();
    for (a, b) in u.values().iter().zip(back.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // at_flat sees the same values either way
    for f in 0..grid.node_count() {
        assert_eq!(u.at_flat(f).to_bits(), ext.at_flat(f).to_bits());
    }
}

#[test]
fn norms_carry_the_cell_volume() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let grid = Grid::build(dom, 0.1, 4).unwrap();

    let one = GridFunction::sample(&grid, Support::OnOmega, |_| 1.0);
    assert!((one.norm(NormKind::L1) - 1.0).abs() < 1e-12);
    assert!((one.norm(NormKind::L2) - 1.0).abs() < 1e-12);
    assert_eq!(one.norm(NormKind::LInf), 1.0);

    // extension by zero preserves all three norms
    let u = GridFunction::sample(&grid, Support::OnOmega, |x| (9.0 * x[0]).sin() - 0.3);
    let ext = u.extend_by_zero();
    for kind in [NormKind::L1, NormKind::L2, NormKind::LInf] {
        assert_eq!(u.norm(kind).to_bits(), ext.norm(kind).to_bits());
    }

    let v = GridFunction::sample(&grid, Support::OnOmega, |x| x[0]);
    let uv = u.dot(&v).unwrap();
    let mut byhand = 0.0;
    for (a, b) in u.values().iter().zip(v.values()) {
        byhand += a * b;
    }
    assert_eq!(uv.to_bits(), (byhand * 0.025).to_bits());
}

#[test]
fn mismatched_functions_are_rejected() {
    let grid_a = Grid::build(Domain::interval(0.0, 1.0).unwrap(), 0.1, 4).unwrap();
    let grid_b = Grid::build(Domain::interval(0.0, 1.0).unwrap(), 0.1, 5).unwrap();

    let a = GridFunction::zeros(&grid_a, Support::OnOmega);
    let b = GridFunction::zeros(&grid_b, Support::OnOmega);
    assert!(matches!(a.dot(&b), Err(Error::GridMismatch)));
    assert!(matches!(a.sub(&b), Err(Error::GridMismatch)));

    let full = GridFunction::zeros(&grid_a, Support::OnOmegaDelta);
    assert!(matches!(a.dot(&full), Err(Error::GridMismatch)));

    assert!(matches!(
        GridFunction::from_values(&grid_a, Support::OnOmega, vec![0.0; 7]),
        Err(Error::LengthMismatch { expected: 40, got: 7 })
    ));
    let mut vals = vec![0.0; grid_a.node_count()];
    vals[0] = 1.0;
    assert!(GridFunction::from_values(&grid_a, Support::ZeroOnCollar, vals).is_err());
}
