//! Command execution: a validated config becomes one CSV table plus a
//! list of named checks. Any failed check turns into exit code 1.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nonlocal_core::analysis::{
    compactness_decay, ibp_residual, oscillation_bound_check, poincare_ratio, reproduce_figure,
    spectrum_probe, strong_convergence_study, weak_convergence_study, Bump, ConvergenceReport,
    Subspace,
};
use nonlocal_core::geometry::{Grid, GridFunction, NormKind, Region, Support};
use nonlocal_core::kernel::KernelSpec;
use nonlocal_core::operator::{build_vector_operator, core_flats, NonlocalOperator, VectorKind};
use nonlocal_core::quadrature::{build_stencil, reference_integrate};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::config::{Command, Config, Expectation, Failure, Violation};
use crate::table::{Cell, Table};

/// One named assertion evaluated during a run.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check_le(name: impl Into<String>, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        pass: value.is_finite() && value <= bound,
        detail: format!("{value:.6e} vs bound {bound:.6e}"),
    }
}

fn check_ge(name: impl Into<String>, value: f64, floor: f64) -> Check {
    Check {
        name: name.into(),
        pass: value.is_finite() && value >= floor,
        detail: format!("{value:.6e} vs floor {floor:.6e}"),
    }
}

fn check_rel(name: impl Into<String>, value: f64, target: f64, rtol: f64) -> Check {
    let err = (value - target).abs();
    let tol = rtol * target.abs().max(f64::MIN_POSITIVE);
    Check {
        name: name.into(),
        pass: value.is_finite() && err <= tol,
        detail: format!("{value:.9e} vs {target:.9e}, off by {err:.3e} (tol {tol:.3e})"),
    }
}

/// Uniform draws in [-1, 1), 52 mantissa bits per draw.
fn next_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn fill_seeded(values: &mut [f64], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values {
        *v = next_unit(&mut rng);
    }
}

fn seeded_function(grid: &Grid, support: Support, seed: u64) -> GridFunction {
    let mut f = GridFunction::zeros(grid, support);
    fill_seeded(f.values_mut(), seed);
    f
}

/// Map a closure over items on up to `threads` workers, results in input
/// order. Work items are claimed through an atomic cursor, so identical
/// inputs give identical outputs at any thread count.
fn scope_map<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = threads.clamp(1, items.len().max(1));
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|o| o.expect("worker filled every slot"))
        .collect()
}

fn header(cfg: &Config) -> Vec<String> {
    let mut lines = vec![format!("nonlocal v{}", nonlocal_core::VERSION)];
    lines.extend(cfg.echo_lines());
    lines
}

fn write_coo(op: &NonlocalOperator, path: &Path) -> Result<(), Failure> {
    let mut text = String::new();
    for (row, col, value) in op.to_coo() {
        text.push_str(&format!("{row} {col} {value:.12e}\n"));
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

fn dump_unsupported(cmd: Command) -> Failure {
    Failure::Validation(vec![Violation {
        field: String::from("dump-matrix"),
        constraint: format!("{} assembles no single operator to dump", cmd.name()),
    }])
}

/// Σ over every lattice node of u·v·h^d, reading unstored collar values
/// as zero. Unlike `GridFunction::dot` this pairs across supports.
fn full_pairing(u: &GridFunction, v: &GridFunction, grid: &Grid) -> f64 {
    let hd = grid.h().powi(grid.dimension() as i32);
    (0..grid.node_count()).map(|f| u.at_flat(f) * v.at_flat(f)).sum::<f64>() * hd
}

/// Run one experiment. `dump` writes the assembled operator's sparse
/// triplets for the commands built around a single operator.
pub fn execute(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    match cfg.run.command {
        Command::KernelInfo => kernel_info(cfg, dump),
        Command::Apply => apply(cfg, dump),
        Command::Convergence => convergence(cfg, dump),
        Command::WeakConvergence => weak_convergence(cfg, dump),
        Command::Ibp => ibp(cfg, dump),
        Command::Spectrum => spectrum(cfg, dump),
        Command::Compactness => compactness(cfg, dump),
        Command::Poincare => poincare(cfg, dump),
        Command::Oscillation => oscillation(cfg, dump),
        Command::Figure => figure(cfg, dump),
        Command::DivergenceTheorem => divergence_theorem(cfg, dump),
        Command::DeformationGradient => deformation_gradient(cfg, dump),
    }
}

const MOMENT_COLUMNS: [&str; 7] = [
    "moment_0", "moment_1", "moment_2", "moment_3", "moment_4", "moment_5", "moment_6",
];

fn kernel_info(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let deltas = match cfg.sweep.as_ref().and_then(|s| s.deltas.clone()) {
        Some(d) => d,
        None => vec![kb.delta.expect("validated")],
    };
    let n_per = cfg.domain.as_ref().and_then(|d| d.n_per_delta);
    let moment_count = r.expect_moments.as_ref().map_or(0, Vec::len);

    let mut columns = vec!["delta", "normalization", "l1_ref", "first_ref", "second_sym_ref"];
    columns.extend(&MOMENT_COLUMNS[..moment_count]);
    if n_per.is_some() {
        columns.extend(["stencil_l1", "stencil_first", "stencil_second_sym"]);
    }
    let mut table = Table::new(header(cfg), columns);
    let mut checks = Vec::new();

    for &delta in &deltas {
        let k = kb.build(delta)?;
        let l1_closed = k.l1_norm();
        // reference_integrate takes an absolute budget; keep it far below
        // the tightest relative tolerance a check could ask for
        let budget = |scale: f64| 1e-12 * l1_closed * scale + 1e-15;
        let sign_of = |v: f64| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let l1_ref = reference_integrate(&k, |z| sign_of(k.evaluate(z)), budget(1.0))?;
        let first_ref = reference_integrate(&k, |z| z[0], budget(delta))?;
        let (sym, _) = k.decompose();
        let second_sym_ref =
            reference_integrate(&sym, |z| z[0] * z[0], budget(delta * delta))?;

        let mut row: Vec<Cell> = vec![
            delta.into(),
            k.normalization().into(),
            l1_ref.into(),
            first_ref.into(),
            second_sym_ref.into(),
        ];
        if let Some(expected) = &r.expect_moments {
            let moment_budget = (0.1 * r.moment_atol).clamp(1e-14, 1e-11);
            for (j, &target) in expected.iter().enumerate() {
                let m = reference_integrate(&k, |z| z[0].powi(j as i32), moment_budget)?;
                row.push(m.into());
                let err = (m - target).abs();
                checks.push(Check {
                    name: format!("moment {j} delta={delta}"),
                    pass: m.is_finite() && err <= r.moment_atol,
                    detail: format!(
                        "{m:.9e} vs {target:.9e}, off by {err:.3e} (tol {:.3e})",
                        r.moment_atol
                    ),
                });
            }
        }
        let h = n_per.map(|n| delta / n as f64).unwrap_or(f64::NAN);
        if let Some(n) = n_per {
            let st = build_stencil(&k, delta / n as f64, r.quad_order)?;
            let stencil_l1 = st.abs_sum();
            let stencil_first = st.discrete_moment(1, 0);
            let stencil_second_sym = st.parity_parts().0.discrete_moment(2, 0);
            row.push(stencil_l1.into());
            row.push(stencil_first.into());
            row.push(stencil_second_sym.into());
            if let Some(srtol) = r.stencil_rtol {
                for (label, value, target) in [
                    ("l1", stencil_l1, r.expect_l1),
                    ("first moment", stencil_first, r.expect_first),
                    ("symmetric second moment", stencil_second_sym, r.expect_second_sym),
                ] {
                    if let Some(t) = target {
                        checks.push(check_rel(
                            format!("stencil {label} delta={delta}"),
                            value,
                            t.eval(delta, h),
                            srtol,
                        ));
                    }
                }
            }
        }
        table.push_row(row);

        if let Some(target) = r.expect_normalization {
            checks.push(check_rel(
                format!("normalization delta={delta}"),
                k.normalization(),
                target,
                r.normalization_rtol,
            ));
        }
        for (label, value, target) in [
            ("l1", l1_ref, r.expect_l1),
            ("first moment", first_ref, r.expect_first),
            ("symmetric second moment", second_sym_ref, r.expect_second_sym),
        ] {
            if let Some(t) = target {
                checks.push(check_rel(
                    format!("reference {label} delta={delta}"),
                    value,
                    t.eval(delta, h),
                    r.moment_rtol,
                ));
            }
        }
    }
    Ok((table, checks))
}

fn apply(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let db = cfg.domain.as_ref().expect("validated");
    let profile = r.profile.expect("validated");
    let delta = kb.delta.expect("validated");
    let domain = db.build()?;
    let kernel = kb.build(delta)?;
    let resolutions = cfg.sweep.as_ref().and_then(|s| s.resolutions.clone());

    match resolutions {
        None => {
            let grid = Grid::build(domain, delta, db.n_per_delta.expect("validated"))?;
            let op = NonlocalOperator::assemble(&kernel, &grid, r.quad_order)?;
            if let Some(path) = dump {
                write_coo(&op, path)?;
            }
            let u = GridFunction::sample(&grid, Support::OnOmegaDelta, |x| {
                profile.eval(x[0], delta)
            });
            let du = op.apply(&u)?;
            let mut table = Table::new(header(cfg), vec!["x", "u", "nonlocal"]);
            let mut core_max = 0.0f64;
            for (o, &d) in du.values().iter().enumerate() {
                let flat = grid.omega_flat(o);
                let x = grid.coords(flat)[0];
                table.push_row(vec![x.into(), profile.eval(x, delta).into(), d.into()]);
                if grid.region(flat) == Region::InteriorCore {
                    core_max = core_max.max(d.abs());
                }
            }
            let mut checks = Vec::new();
            if let Some(bound) = r.max_abs_core {
                checks.push(check_le(
                    "core maximum",
                    core_max,
                    bound.eval(delta, grid.h()),
                ));
            }
            Ok((table, checks))
        }
        Some(ns) => {
            if dump.is_some() {
                return Err(dump_unsupported(cfg.run.command));
            }
            let mut table = Table::new(
                header(cfg),
                vec!["n_per_delta", "h", "max_abs_core", "max_abs_omega", "l2_omega"],
            );
            let mut checks = Vec::new();
            for &n in &ns {
                let grid = Grid::build(domain.clone(), delta, n)?;
                let op = NonlocalOperator::assemble(&kernel, &grid, r.quad_order)?;
                let u = GridFunction::sample(&grid, Support::OnOmegaDelta, |x| {
                    profile.eval(x[0], delta)
                });
                let du = op.apply(&u)?;
                let mut core_max = 0.0f64;
                let mut omega_max = 0.0f64;
                for (o, &d) in du.values().iter().enumerate() {
                    omega_max = omega_max.max(d.abs());
                    if grid.region(grid.omega_flat(o)) == Region::InteriorCore {
                        core_max = core_max.max(d.abs());
                    }
                }
                table.push_row(vec![
                    n.into(),
                    grid.h().into(),
                    core_max.into(),
                    omega_max.into(),
                    du.norm(NormKind::L2).into(),
                ]);
                if let Some(bound) = r.max_abs_core {
                    checks.push(check_le(
                        format!("core maximum n={n}"),
                        core_max,
                        bound.eval(delta, grid.h()),
                    ));
                }
            }
            Ok((table, checks))
        }
    }
}

fn report_comments(table: &mut Table, report: &ConvergenceReport) {
    table.comment(format!("fitted_order = {:.6}", report.fitted_order));
    table.comment(format!("predicted_order = {:.6}", report.predicted_order));
}

fn slope_checks(report: &ConvergenceReport, cfg: &Config, checks: &mut Vec<Check>) {
    if let Some(floor) = cfg.run.slope_min {
        checks.push(check_ge("fitted order", report.fitted_order, floor));
    }
    if let Some(cap) = cfg.run.slope_max {
        checks.push(check_le("fitted order cap", report.fitted_order, cap));
    }
}

fn convergence(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let domain = cfg.domain.as_ref().expect("validated").build()?;
    let deltas = cfg.sweep.as_ref().and_then(|s| s.deltas.clone()).expect("validated");
    let profile = r.profile.expect("validated");
    let p = r.norm_p.unwrap_or(f64::INFINITY);
    let report = strong_convergence_study(
        &domain,
        // horizon-free profiles ignore the second argument
        |x| profile.eval(x, 0.0),
        |x| profile.derivative(x, 0.0),
        |d| kb.build(d),
        &deltas,
        p,
        r.quad_order,
    )?;
    let mut table = Table::new(header(cfg), vec!["delta", "error"]);
    report_comments(&mut table, &report);
    if p == f64::INFINITY {
        table.comment(String::from("norm = Linf"));
    } else {
        table.comment(format!("norm = L{p}"));
    }
    for (&d, &e) in report.deltas.iter().zip(&report.errors) {
        table.push_row(vec![d.into(), e.into()]);
    }
    let mut checks = Vec::new();
    slope_checks(&report, cfg, &mut checks);
    Ok((table, checks))
}

fn weak_convergence(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let domain = cfg.domain.as_ref().expect("validated").build()?;
    let deltas = cfg.sweep.as_ref().and_then(|s| s.deltas.clone()).expect("validated");
    let profile = r.profile.expect("validated");
    let bump = Bump::new(r.bump_center.expect("validated"), r.bump_width.expect("validated"));
    let report = weak_convergence_study(
        &domain,
        |x| profile.eval(x, 0.0),
        |x| bump.eval(x),
        |x| bump.derivative(x),
        bump.support(),
        |d| kb.build(d),
        &deltas,
        r.quad_order,
    )?;
    let mut table = Table::new(header(cfg), vec!["delta", "residual"]);
    report_comments(&mut table, &report);
    for (&d, &e) in report.deltas.iter().zip(&report.errors) {
        table.push_row(vec![d.into(), e.into()]);
    }
    let mut checks = Vec::new();
    slope_checks(&report, cfg, &mut checks);
    Ok((table, checks))
}

fn ibp(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let db = cfg.domain.as_ref().expect("validated");
    let delta = kb.delta.expect("validated");
    let grid = Grid::build(db.build()?, delta, db.n_per_delta.expect("validated"))?;
    let kernel = kb.build(delta)?;
    let op = NonlocalOperator::assemble(&kernel, &grid, r.quad_order)?;
    if let Some(path) = dump {
        write_coo(&op, path)?;
    }
    if r.zero_collar && !op.is_antisymmetric() {
        return Err(Failure::Core(nonlocal_core::Error::NotAntisymmetric));
    }
    let rnb = op.row_norm_bound();
    let pairs: Vec<usize> = (0..r.pairs.unwrap_or(10)).collect();

    struct PairResult {
        residuals: (f64, f64, f64),
        adjoint_gap: f64,
        skew: Option<f64>,
        scale: f64,
    }
    let adjoint = op.adjoint();
    let results = scope_map(r.threads, &pairs, |_, &i| -> Result<PairResult, Failure> {
        let (u, v) = if r.zero_collar {
            let uo = seeded_function(&grid, Support::OnOmega, r.seed + 2 * i as u64);
            let vo = seeded_function(&grid, Support::OnOmega, r.seed + 2 * i as u64 + 1);
            (uo.extend_by_zero(), vo.extend_by_zero())
        } else {
            (
                seeded_function(&grid, Support::OnOmegaDelta, r.seed + 2 * i as u64),
                seeded_function(&grid, Support::OnOmegaDelta, r.seed + 2 * i as u64 + 1),
            )
        };
        let residuals = ibp_residual(&u, &v, &kernel, &grid, r.quad_order)?;
        let scale =
            (u.norm(NormKind::L2) * v.norm(NormKind::L2)).max(f64::MIN_POSITIVE);
        let du = op.apply(&u)?;
        let vo = v.project_to_omega();
        let forward = du.dot(&vo)?;
        let atv = adjoint.apply(&v)?;
        let backward = full_pairing(&u, &atv, &grid);
        let adjoint_gap = (forward - backward).abs() / scale;
        let skew = if r.zero_collar {
            let dv = op.apply(&v)?;
            let uo = u.project_to_omega();
            Some((du.dot(&vo)? + dv.dot(&uo)?).abs())
        } else {
            None
        };
        Ok(PairResult { residuals, adjoint_gap, skew, scale })
    });

    let mut columns = vec!["pair", "res_sym", "res_anti", "res_full", "adjoint_gap"];
    if r.zero_collar {
        columns.push("skew");
    }
    let mut table = Table::new(header(cfg), columns);
    table.comment(format!("row_norm_bound = {rnb:.12e}"));
    let mut worst_residual = 0.0f64;
    let mut worst_adjoint = 0.0f64;
    let mut worst_skew = 0.0f64;
    for (i, result) in results.into_iter().enumerate() {
        let pr = result?;
        let (rs, ra, rf) = pr.residuals;
        let mut row: Vec<Cell> =
            vec![i.into(), rs.into(), ra.into(), rf.into(), pr.adjoint_gap.into()];
        // the zero kernel has an empty matrix; keep 0/0 out of the ratios
        let denom = (rnb * pr.scale).max(f64::MIN_POSITIVE);
        worst_residual = worst_residual.max(rs.max(ra).max(rf) / denom);
        worst_adjoint = worst_adjoint.max(pr.adjoint_gap);
        if let Some(s) = pr.skew {
            row.push(s.into());
            worst_skew = worst_skew.max(s / denom);
        }
        table.push_row(row);
    }
    let mut checks = Vec::new();
    if let Some(tol) = r.residual_tol {
        checks.push(check_le(
            "summation-by-parts residual over matrix scale",
            worst_residual,
            tol,
        ));
        if r.zero_collar {
            checks.push(check_le("skew pairing residual over matrix scale", worst_skew, tol));
        }
    }
    if let Some(tol) = r.adjoint_tol {
        checks.push(check_le("adjoint pairing gap", worst_adjoint, tol));
    }
    Ok((table, checks))
}

fn spectrum(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let db = cfg.domain.as_ref().expect("validated");
    let delta = kb.delta.expect("validated");
    let grid = Grid::build(db.build()?, delta, db.n_per_delta.expect("validated"))?;
    let kernel = kb.build(delta)?;
    if let Some(path) = dump {
        let op = NonlocalOperator::assemble(&kernel, &grid, r.quad_order)?;
        write_coo(&op, path)?;
    }
    let subspace = r.subspace.unwrap_or(Subspace::ZeroOnCollar);
    let report = spectrum_probe(&kernel, &grid, subspace, r.quad_order)?;
    let sigma_max = report.max_singular_values[0];
    let (mut max_re, mut max_im) = (0.0f64, 0.0f64);
    let mut table = Table::new(header(cfg), vec!["index", "re", "im"]);
    for (i, z) in report.spectrum_sample.iter().enumerate() {
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
        table.push_row(vec![i.into(), z.re.into(), z.im.into()]);
    }
    table.comment(format!("sigma_min = {:.12e}", report.min_singular_values[0]));
    table.comment(format!("sigma_max = {sigma_max:.12e}"));
    table.comment(format!("kernel_mean = {:.12e}", report.kernel_mean));
    table.comment(format!("max_abs_re = {max_re:.12e}"));
    table.comment(format!("max_abs_im = {max_im:.12e}"));
    let mut checks = Vec::new();
    match r.expect {
        Some(Expectation::ImaginaryAxis) => checks.push(check_le(
            "real parts against sigma_max",
            max_re,
            r.axis_tol * sigma_max,
        )),
        Some(Expectation::RealAxis) => checks.push(check_le(
            "imaginary parts against sigma_max",
            max_im,
            r.axis_tol * sigma_max,
        )),
        _ => {}
    }
    Ok((table, checks))
}

fn compactness(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let delta = kb.delta.expect("validated");
    let kernel = kb.build(delta)?;
    let sizes = cfg.sweep.as_ref().and_then(|s| s.sizes.clone()).expect("validated");
    // one size per call keeps the values bitwise equal to the joint sweep
    // while letting sizes run on separate workers
    let results = scope_map(r.threads, &sizes, |_, &n| -> Result<(f64, f64), Failure> {
        let report = compactness_decay(&kernel, &[n], r.quad_order)?;
        Ok((report.min_singular_values[0], report.max_singular_values[0]))
    });
    let mut sigmas = Vec::with_capacity(sizes.len());
    let mut table = Table::new(header(cfg), vec!["grid_size", "sigma_min", "sigma_max"]);
    table.comment(format!("kernel_mean = {:.12e}", kernel.mean()));
    for (&n, result) in sizes.iter().zip(results) {
        let (lo, hi) = result?;
        table.push_row(vec![n.into(), lo.into(), hi.into()]);
        sigmas.push(lo);
    }
    let mut checks = Vec::new();
    match r.expect {
        Some(Expectation::Decay) => {
            let worst_step = sigmas
                .windows(2)
                .map(|w| w[1] / w[0].max(f64::MIN_POSITIVE))
                .fold(0.0f64, f64::max);
            checks.push(check_le("sigma_min non-increasing (worst step ratio)", worst_step, 1.0));
            let total = sigmas.last().expect("validated nonempty")
                / sigmas[0].max(f64::MIN_POSITIVE);
            checks.push(check_le("sigma_min terminal decay ratio", total, r.decay_ratio_max));
        }
        Some(Expectation::Plateau) => {
            let floor = sigmas.iter().copied().fold(f64::INFINITY, f64::min)
                / sigmas[0].max(f64::MIN_POSITIVE);
            checks.push(check_ge("sigma_min plateau ratio", floor, r.plateau_floor));
        }
        _ => {}
    }
    Ok((table, checks))
}

fn poincare(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    let r = &cfg.run;
    let kb = cfg.kernel.as_ref().expect("validated");
    let db = cfg.domain.as_ref().expect("validated");
    let delta = kb.delta.expect("validated");
    let n_per = db.n_per_delta.expect("validated");
    let grid = Grid::build(db.build()?, delta, n_per)?;
    let kernel = kb.build(delta)?;
    if let Some(path) = dump {
        let op = NonlocalOperator::assemble(&kernel, &grid, r.quad_order)?;
        write_coo(&op, path)?;
    }
    let ratio = poincare_ratio(&kernel, &grid, r.quad_order)?;
    let mut table = Table::new(header(cfg), vec!["n_per_delta", "ratio"]);
    table.push_row(vec![n_per.into(), ratio.into()]);
    let mut checks = Vec::new();
    if let Some(floor) = r.ratio_min {
        checks.push(check_ge("coercivity ratio floor", ratio, floor));
    }
    if let Some(cap) = r.ratio_max {
        checks.push(check_le("coercivity ratio cap", ratio, cap));
    }
    Ok((table, checks))
}

fn oscillation(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let deltas = cfg.sweep.as_ref().and_then(|s| s.deltas.clone()).expect("validated");
    let report = oscillation_bound_check(&deltas)?;
    let mut table = Table::new(header(cfg), vec!["delta", "value", "bound"]);
    let mut slack = f64::INFINITY;
    for ((&d, &v), &b) in report.deltas.iter().zip(&report.values).zip(&report.bounds) {
        table.push_row(vec![d.into(), v.into(), b.into()]);
        slack = slack.min(b - v);
    }
    let checks = vec![Check {
        name: String::from("oscillation bound"),
        pass: report.within_bounds(),
        detail: format!("smallest slack {slack:.6e}"),
    }];
    Ok((table, checks))
}

fn figure(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let db = cfg.domain.as_ref().expect("validated");
    let delta = db.delta.expect("validated");
    let grid = Grid::build(db.build()?, delta, db.n_per_delta.expect("validated"))?;
    let fig = reproduce_figure(r.which.expect("validated"), &grid, r.quad_order)?;
    let mismatch = fig.smooth_region_mismatch();
    let amplification = fig.kink_amplification();
    let mut table = Table::new(header(cfg), vec!["x", "u", "derivative", "nonlocal"]);
    table.comment(format!("delta = {delta}"));
    table.comment(format!("kink_value = {:.12e}", fig.kink_value));
    table.comment(format!("smooth_mismatch = {mismatch:.12e}"));
    table.comment(format!("amplification = {amplification:.12e}"));
    for i in 0..fig.xs.len() {
        table.push_row(vec![
            fig.xs[i].into(),
            fig.u_values[i].into(),
            fig.derivative_values[i].into(),
            fig.nonlocal_values[i].into(),
        ]);
    }
    let finite = fig.nonlocal_values.iter().all(|v| v.is_finite()) && fig.kink_value.is_finite();
    let mut checks = vec![Check {
        name: String::from("finite table"),
        pass: finite,
        detail: format!("{} rows", fig.xs.len()),
    }];
    if let Some(cap) = r.smooth_mismatch_max {
        checks.push(check_le("smooth region mismatch", mismatch, cap));
    }
    if let Some(bound) = r.kink_max {
        checks.push(check_le(
            "kink-point value",
            fig.kink_value.abs(),
            bound.eval(delta, grid.h()),
        ));
    }
    if let Some(cap) = r.amplification_max {
        checks.push(check_le("kink amplification", amplification, cap));
    }
    Ok((table, checks))
}

fn paired_kernels(cfg: &Config) -> Result<(Grid, [KernelSpec; 2]), Failure> {
    let kb1 = cfg.kernel.as_ref().expect("validated");
    let kb2 = cfg.kernel2.as_ref().expect("validated");
    let db = cfg.domain.as_ref().expect("validated");
    let delta = kb1.delta.expect("validated");
    let grid = Grid::build(db.build()?, delta, db.n_per_delta.expect("validated"))?;
    let k1 = kb1.build(delta)?;
    let k2 = kb2.build(kb2.delta.expect("validated"))?;
    Ok((grid, [k1, k2]))
}

fn divergence_theorem(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let (grid, kernels) = paired_kernels(cfg)?;
    let coefficients = r.coefficients.clone().unwrap_or_else(|| vec![1.0, 1.0]);
    let vop =
        build_vector_operator(&kernels, &coefficients, VectorKind::Divergence, &grid, r.quad_order)?;
    let reach: f64 = vop
        .components()
        .iter()
        .zip(&coefficients)
        .map(|(op, c)| c.abs() * op.row_norm_bound())
        .sum();
    let area: f64 = (0..2).map(|a| grid.domain().width(a)).product();
    let fields: Vec<usize> = (0..r.fields.unwrap_or(10)).collect();
    let results = scope_map(r.threads, &fields, |_, &i| -> Result<(f64, f64), Failure> {
        let v = [
            seeded_function(&grid, Support::OnOmegaDelta, r.seed + 2 * i as u64),
            seeded_function(&grid, Support::OnOmegaDelta, r.seed + 2 * i as u64 + 1),
        ];
        let residual = vop.divergence_theorem_residual(&v)?;
        let vmax = v[0].norm(NormKind::LInf).max(v[1].norm(NormKind::LInf));
        Ok((residual, reach * vmax * area))
    });
    let mut table = Table::new(header(cfg), vec!["field", "residual", "scale"]);
    let mut worst = 0.0f64;
    for (i, result) in results.into_iter().enumerate() {
        let (residual, scale) = result?;
        table.push_row(vec![i.into(), residual.into(), scale.into()]);
        worst = worst.max(residual / scale.max(f64::MIN_POSITIVE));
    }
    let mut checks = Vec::new();
    if let Some(tol) = r.residual_tol {
        checks.push(check_le("divergence theorem residual over scale", worst, tol));
    }
    Ok((table, checks))
}

fn deformation_gradient(cfg: &Config, dump: Option<&Path>) -> Result<(Table, Vec<Check>), Failure> {
    if dump.is_some() {
        return Err(dump_unsupported(cfg.run.command));
    }
    let r = &cfg.run;
    let (grid, kernels) = paired_kernels(cfg)?;
    let vop =
        build_vector_operator(&kernels, &[1.0, 1.0], VectorKind::Gradient, &grid, r.quad_order)?;
    let flats = core_flats(&grid);
    let matrices: Vec<usize> = (0..r.matrices.unwrap_or(5)).collect();
    let results = scope_map(r.threads, &matrices, |_, &i| -> Result<f64, Failure> {
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed + i as u64);
        let mut a = [[0.0f64; 2]; 2];
        for row in &mut a {
            for entry in row.iter_mut() {
                *entry = next_unit(&mut rng);
            }
        }
        let y = [
            GridFunction::sample(&grid, Support::OnOmegaDelta, |x| {
                a[0][0] * x[0] + a[0][1] * x[1]
            }),
            GridFunction::sample(&grid, Support::OnOmegaDelta, |x| {
                a[1][0] * x[0] + a[1][1] * x[1]
            }),
        ];
        let mut worst = 0.0f64;
        for &flat in &flats {
            let f = vop.deformation_gradient(&y, flat)?;
            for row in 0..2 {
                for col in 0..2 {
                    worst = worst.max((f[row][col] - a[row][col]).abs());
                }
            }
        }
        Ok(worst)
    });
    let mut table = Table::new(header(cfg), vec!["matrix", "max_abs_error"]);
    let mut worst = 0.0f64;
    for (i, result) in results.into_iter().enumerate() {
        let e = result?;
        table.push_row(vec![i.into(), e.into()]);
        worst = worst.max(e);
    }
    let checks = vec![check_le("deformation gradient recovery", worst, r.ftol)];
    Ok((table, checks))
}
