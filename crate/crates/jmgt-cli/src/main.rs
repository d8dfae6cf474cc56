//! `jmgt` command-line harness.
//!
//! Usage:
//!   jmgt <simulate|symbol|verify-energy|scan-smallness|convergence>
//!        --config PATH [--out DIR] [--seed N] [--stride K]
//!
//! Exit codes: 0 success, 2 blow-up detected, 3 configuration error,
//! 4 numerical invariant violation.

use jmgt::config::{ExperimentKind, RunSpec};
use jmgt::experiments;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "usage: jmgt <simulate|symbol|verify-energy|scan-smallness|convergence> \
--config PATH [--out DIR] [--seed N] [--stride K]";

struct Args {
    kind: ExperimentKind,
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    stride: Option<usize>,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let sub = argv.next().ok_or(USAGE.to_string())?;
    let kind = ExperimentKind::parse(&sub).map_err(|e| format!("{e}\n{USAGE}"))?;
    let mut config = None;
    let mut out = None;
    let mut seed = None;
    let mut stride = None;
    while let Some(flag) = argv.next() {
        let mut value = || argv.next().ok_or(format!("missing value for {flag}"));
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value()?)),
            "--out" => out = Some(PathBuf::from(value()?)),
            "--seed" => {
                seed = Some(
                    value()?
                        .parse::<u64>()
                        .map_err(|_| "--seed expects an unsigned integer".to_string())?,
                )
            }
            "--stride" => {
                stride = Some(
                    value()?
                        .parse::<usize>()
                        .map_err(|_| "--stride expects a positive integer".to_string())?,
                )
            }
            other => return Err(format!("unknown flag {other}\n{USAGE}")),
        }
    }
    Ok(Args {
        kind,
        config: config.ok_or(format!("--config is required\n{USAGE}"))?,
        out,
        seed,
        stride,
    })
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(3);
        }
    };
    let mut spec = match RunSpec::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(3);
        }
    };
    if spec.kind != args.kind {
        // the subcommand selects the experiment; a differing kind in the
        // config is a configuration error
        let declared = spec.kind;
        if config_declares_kind(&args.config) && declared != args.kind {
            eprintln!(
                "config error: experiment.kind = {} does not match subcommand {}",
                declared.as_str(),
                args.kind.as_str()
            );
            return ExitCode::from(3);
        }
        spec.kind = args.kind;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(stride) = args.stride {
        spec.stride = stride.max(1);
    }
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from(&spec.out_dir));

    let run = || -> Result<u8, jmgt::JmgtError> {
        match args.kind {
            ExperimentKind::Simulate => {
                let r = experiments::cmd_simulate(&spec, &out_dir)?;
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                if let Some(b) = r.blow_up {
                    eprintln!("blow-up detected at t = {}: {}", b.t, b.reason);
                    return Ok(2);
                }
                println!(
                    "simulate: {} reports written to {}",
                    r.reports.len(),
                    out_dir.display()
                );
                Ok(0)
            }
            ExperimentKind::Symbol => {
                let r = experiments::cmd_symbol(&spec, &out_dir)?;
                for f in &r.fits {
                    println!(
                        "fit {}: slope {:.4} (r2 = {:.6}) over [{}, {}]",
                        f.series_id, f.slope, f.r2, f.t_lo, f.t_hi
                    );
                }
                Ok(0)
            }
            ExperimentKind::VerifyEnergy => {
                let r = experiments::cmd_verify_energy(&spec, &out_dir)?;
                let mut all = true;
                for row in &r.rows {
                    println!(
                        "{} {} (value {:.3e}, tolerance {:.3e})",
                        if row.pass { "PASS" } else { "FAIL" },
                        row.name,
                        row.value,
                        row.tolerance
                    );
                    all &= row.pass;
                }
                Ok(if all { 0 } else { 4 })
            }
            ExperimentKind::ScanSmallness => {
                let r = experiments::cmd_scan_smallness(&spec, &out_dir)?;
                for row in &r.rows {
                    println!(
                        "amplitude {:.4e}: {:?} (sup ratio {:.3})",
                        row.amplitude, row.verdict, row.sup_ratio
                    );
                }
                match r.bracket {
                    Some((ok, bad)) => {
                        println!("bracketing interval: [{ok:.4e}, {bad:.4e}]");
                        Ok(0)
                    }
                    None => {
                        eprintln!("scan did not bracket bounded/growing within the ladder");
                        Ok(4)
                    }
                }
            }
            ExperimentKind::Convergence => {
                let r = experiments::cmd_convergence(&spec, &out_dir)?;
                println!("rk4 observed order {:.3}", r.rk4_order);
                println!("etd observed order {:.3}", r.etd_order);
                for (n, e) in &r.spatial {
                    println!("spatial {n}: error vs finest {e:.3e}");
                }
                Ok(0)
            }
        }
    };

    match run() {
        Ok(code) => ExitCode::from(code),
        Err(jmgt::JmgtError::BlowUp { t, reason }) => {
            eprintln!("blow-up at t = {t}: {reason}");
            ExitCode::from(2)
        }
        Err(jmgt::JmgtError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}

fn config_declares_kind(path: &std::path::Path) -> bool {
    std::fs::read_to_string(path)
        .map(|text| {
            let mut in_experiment = false;
            for raw in text.lines() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.starts_with('[') {
                    in_experiment = line == "[experiment]";
                } else if in_experiment {
                    if let Some((k, _)) = line.split_once('=') {
                        if k.trim() == "kind" {
                            return true;
                        }
                    }
                }
            }
            false
        })
        .unwrap_or(false)
}
