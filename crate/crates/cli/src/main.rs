//! `nonlocal`: run nonlocal-derivative experiments from config files.
//!
//! Exit codes: 0 when every configured check passes, 1 when a numeric
//! check fails, 2 for config or execution errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonlocal_cli::{config, run};
use nonlocal_core::quadrature::StencilOrder;

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "Nonlocal derivative experiments")]
struct Args {
    /// Experiment config file
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here, overriding the config's `out` (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Cap worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// Stencil construction order
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    quad_order: Option<u8>,
    /// Dump the assembled operator as `row col value` triplets
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run_with(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(2)
        }
    }
}

fn run_with(args: Args) -> Result<bool, config::Failure> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = config::load(&text)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.run.threads = threads.max(1);
    }
    if let Some(q) = args.quad_order {
        cfg.run.quad_order = StencilOrder::from_index(q as usize).expect("clap bounds the range");
    }
    if let Some(out) = args.out {
        cfg.run.out = Some(out.to_string_lossy().into_owned());
    }

    let (table, checks) = run::execute(&cfg, args.dump_matrix.as_deref())?;
    let rendered = table.render();
    match &cfg.run.out {
        Some(path) => std::fs::write(path, rendered.as_bytes())?,
        None => print!("{rendered}"),
    }
    let mut all_pass = true;
    for check in &checks {
        let verdict = if check.pass {
            "pass"
        } else {
            all_pass = false;
            "FAIL"
        };
        println!("check {}: {} ({})", check.name, verdict, check.detail);
    }
    Ok(all_pass)
}
