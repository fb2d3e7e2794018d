//! Binary contract: exit codes, reproducible output, matrix dumps, and
//! the CSV shape, exercised through the installed executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonlocal"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("config written");
    path
}

fn run_to_file(config: &Path, out: &Path) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary ran")
}

const OSCILLATION: &str = "
[run]
command = oscillation

[sweep]
deltas = 0.1,0.05,0.01
";

#[test]
fn stdout_gets_the_csv_when_no_output_path_is_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "osc.conf", OSCILLATION);
    let out = bin().arg("--config").arg(cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("delta,value,bound"));
    assert!(text.contains("check oscillation bound: pass"));
    // header carries the library version and the resolved config
    assert!(text.starts_with("# nonlocal v"));
    assert!(text.contains("# command = oscillation"));
    assert!(text.contains("# seed = 0"));
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[run]
command = ibp
pairs = 12
seed = 41
residual_tol = 1e-10
adjoint_tol = 1e-12

[kernel]
family = one-sided
delta = 0.25
beta = 0.5

[domain]
lo = 0
hi = 1
n_per_delta = 8
";
    let cfg = write_config(dir.path(), "ibp.conf", text);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_to_file(&cfg, &a).status.success());
    assert!(run_to_file(&cfg, &b).status.success());
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn thread_count_changes_no_data_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[run]
command = ibp
pairs = 8
seed = 9

[kernel]
family = sign
delta = 0.25

[domain]
lo = 0
hi = 1
n_per_delta = 8
";
    let cfg = write_config(dir.path(), "ibp.conf", text);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_to_file(&cfg, &a).status.success());
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--threads")
        .arg("4")
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(out.status.success());
    let data = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect()
    };
    assert_eq!(data(&a), data(&b));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ibp.conf",
        "
[run]
command = ibp
pairs = 2
seed = 1

[kernel]
family = sign
delta = 0.25

[domain]
lo = 0
hi = 1
n_per_delta = 8
",
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_to_file(&cfg, &a).status.success());
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--seed")
        .arg("2")
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text_a = std::fs::read_to_string(&a).unwrap();
    let text_b = std::fs::read_to_string(&b).unwrap();
    assert!(text_a.contains("# seed = 1"));
    assert!(text_b.contains("# seed = 2"));
    assert_ne!(text_a, text_b);
}

#[test]
fn failing_checks_exit_one_and_say_so() {
    let dir = tempfile::tempdir().unwrap();
    // a symmetric kernel has a real spectrum; expecting the imaginary
    // axis must fail loudly
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "
[run]
command = spectrum
expect = imaginary-axis

[kernel]
family = potential
delta = 0.25
beta = 0.5
theta_minus = 1
theta_plus = 1
normalize = false
amplitude = 2

[domain]
lo = 0
hi = 1
n_per_delta = 8
",
    );
    let out = run_to_file(&cfg, &dir.path().join("o.csv"));
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL"));
}

#[test]
fn config_problems_exit_two_with_the_reasons_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "
[run]
command = kernel-info

[kernel]
family = potential
delta = 0.05
beta = -1.5
theta_minus = -1
theta_plus = 1
",
    );
    let out = bin().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("kernel.beta"));

    let missing = bin().arg("--config").arg(dir.path().join("nope.conf")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn core_failures_surface_as_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // horizon wider than half the box: geometry refuses
    let cfg = write_config(
        dir.path(),
        "wide.conf",
        "
[run]
command = poincare

[kernel]
family = sign
delta = 0.6

[domain]
lo = 0
hi = 1
n_per_delta = 4
",
    );
    let out = bin().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
}

#[test]
fn matrix_dump_lists_sorted_triplets_with_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.conf",
        "
[run]
command = poincare

[kernel]
family = sign
delta = 0.25

[domain]
lo = 0
hi = 1
n_per_delta = 4
",
    );
    let coo = dir.path().join("op.coo");
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--dump-matrix")
        .arg(&coo)
        .arg("--out")
        .arg(dir.path().join("o.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&coo).unwrap();
    let mut rows = Vec::new();
    let mut has_diagonal = false;
    for line in text.lines() {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts.len(), 3, "row col value triplets");
        let r: usize = parts[0].parse().unwrap();
        let c: usize = parts[1].parse().unwrap();
        let _: f64 = parts[2].parse().unwrap();
        assert!(parts[2].contains('e'), "scientific notation");
        if r == c {
            has_diagonal = true;
        }
        rows.push((r, c));
    }
    assert!(has_diagonal);
    let mut sorted = rows.clone();
    sorted.sort_unstable();
    assert_eq!(rows, sorted, "triplets sorted by row then column");
    // collar rows are zero and omitted: 4 collar nodes each side, 16 in omega
    assert!(rows.iter().all(|&(r, _)| (4..20).contains(&r)));
}

#[test]
fn dump_is_refused_where_no_single_operator_exists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "osc.conf", OSCILLATION);
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--dump-matrix")
        .arg(dir.path().join("op.coo"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("dump-matrix"));
}

#[test]
fn quad_order_flag_rejects_other_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "osc.conf", OSCILLATION);
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--quad-order")
        .arg("3")
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn shipped_sample_configs_all_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).expect("configs directory") {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "conf") {
            continue;
        }
        seen += 1;
        let out = bin().arg("--config").arg(&path).output().unwrap();
        assert!(out.status.success(), "{} failed", path.display());
    }
    assert!(seen >= 5, "sample configs present");
}

#[test]
fn figure_output_has_exactly_four_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "fig.conf",
        "
[run]
command = figure
which = absval

[domain]
lo = 0
hi = 1
delta = 0.1
n_per_delta = 8
",
    );
    let csv = dir.path().join("fig.csv");
    assert!(run_to_file(&cfg, &csv).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "x,u,derivative,nonlocal");
    let mut count = 0;
    for line in lines {
        assert_eq!(line.split(',').count(), 4);
        count += 1;
    }
    assert_eq!(count, 80, "one row per omega node");
}
