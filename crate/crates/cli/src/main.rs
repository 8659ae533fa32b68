use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use beamspace::io::{save_constellation_csv, save_json, save_results, JsonF64};
use beamspace::stats::{summarize, EmpiricalCdf};
use beamspace::{Error, Pipeline, Result, RunConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "beamspace",
    version,
    about = "Beam-space MIMO near-field perturbation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    scenarios: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct RxOverrides {
    /// Receive antenna 1 polar angle, degrees.
    #[arg(long)]
    rx1_theta: Option<f64>,
    #[arg(long)]
    rx1_phi: Option<f64>,
    #[arg(long)]
    rx2_theta: Option<f64>,
    #[arg(long)]
    rx2_phi: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Basis correlation, power imbalance, average EVM and per-state power ratios.
    Metrics,
    /// Transmit EVM over the sphere.
    EvmMap,
    /// Ideal vs actual constellation points at the transmitter and after ZF.
    Constellation(RxOverrides),
    /// Random line-of-sight sweep and per-stream error CDFs.
    MonteCarlo,
    /// Quick invariant checks.
    Selftest,
}

fn load_config(common: &Common, rx: Option<&RxOverrides>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.monte_carlo.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.monte_carlo.threads = Some(threads);
    }
    if let Some(n) = common.scenarios {
        cfg.monte_carlo.scenarios = n;
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(rx) = rx {
        let r = &mut cfg.receiver;
        for (slot, v) in [
            (&mut r.rx1_theta_deg, rx.rx1_theta),
            (&mut r.rx1_phi_deg, rx.rx1_phi),
            (&mut r.rx2_theta_deg, rx.rx2_theta),
            (&mut r.rx2_phi_deg, rx.rx2_phi),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3} dB")
    } else {
        format!("{v} dB")
    }
}

fn metrics(cfg: RunConfig) -> Result<()> {
    let dir = cfg.output.dir.clone();
    let p = Pipeline::new(cfg)?;
    let m = p.metrics()?;
    let written = save_results(&dir, Some(&m), None, None)?;
    println!(
        "correlation {}, imbalance {}, average EVM {}",
        fmt_db(m.correlation_db.0),
        fmt_db(m.imbalance_db.0),
        fmt_db(m.average_evm_db.0)
    );
    report_written(&written);
    Ok(())
}

fn evm_map(cfg: RunConfig) -> Result<()> {
    let dir = cfg.output.dir.clone();
    let p = Pipeline::new(cfg)?;
    let map = p.evm_map()?;
    let avg = map.average();
    let written = save_results::<()>(&dir, None, Some(&map), None)?;
    println!(
        "average EVM {} (mean {}, mean of dB {}), max {}, masked {:.4}",
        fmt_db(avg.rms_db()),
        fmt_db(avg.mean_db()),
        fmt_db(avg.mean_of_db),
        fmt_db(20.0 * map.max().log10()),
        avg.masked_fraction
    );
    report_written(&written);
    Ok(())
}

fn constellation(cfg: RunConfig) -> Result<()> {
    let dir = cfg.output.dir.clone();
    let p = Pipeline::new(cfg)?;
    let rows = p.constellation_rows()?;
    beamspace::io::ensure_dir(&dir)?;
    let path = dir.join("constellation.csv");
    save_constellation_csv(&path, &rows, &p.constellation.ratio_set())?;
    let worst = |side| {
        rows.iter()
            .filter(|r| r.side == side)
            .map(|r| (r.actual[0] - r.x1).norm().max((r.actual[1] - r.x2).norm()))
            .fold(0.0, f64::max)
    };
    println!(
        "max point error: transmit {:.3e}, receive {:.3e}",
        worst(beamspace::pipeline::Side::Transmit),
        worst(beamspace::pipeline::Side::Receive)
    );
    report_written(&[path]);
    Ok(())
}

fn stream_report(stream: usize, cdf: &EmpiricalCdf) -> Result<Value> {
    let s = summarize(cdf)?;
    Ok(json!({
        "stream": stream,
        "count": s.count,
        "quantiles": s.quantiles.iter().map(|&(p, v)| json!({"p": p, "error": JsonF64(v)})).collect::<Vec<_>>(),
        "exceedance": s.exceedance.iter().map(|&(t, q)| json!({"threshold": t, "probability": q})).collect::<Vec<_>>(),
    }))
}

fn monte_carlo(cfg: RunConfig) -> Result<()> {
    let dir = cfg.output.dir.clone();
    let mc = cfg.monte_carlo;
    let p = Pipeline::new(cfg)?;
    let start = Instant::now();
    let result = p.monte_carlo()?;
    let elapsed = start.elapsed().as_secs_f64();
    let cdfs = [result.cdf(1)?, result.cdf(2)?];
    let mut written = save_results::<()>(&dir, None, None, Some([&cdfs[0], &cdfs[1]]))?;
    let report = json!({
        "scenarios": mc.scenarios,
        "accepted": result.accepted,
        "rejected": result.rejected,
        "seed": mc.seed,
        "threads": mc.threads,
        "wall_clock_s": elapsed,
        "streams": [stream_report(1, &cdfs[0])?, stream_report(2, &cdfs[1])?],
    });
    let path = dir.join("run_report.json");
    save_json(&path, &report)?;
    written.push(path);
    println!(
        "{} accepted, {} rejected in {:.2} s; median error stream 1 {:.4e}, stream 2 {:.4e}",
        result.accepted,
        result.rejected,
        elapsed,
        cdfs[0].median(),
        cdfs[1].median()
    );
    report_written(&written);
    Ok(())
}

fn selftest(seed: u64) -> Result<bool> {
    let results = beamspace::selftest::run_all(seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:<width$}  {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    Ok(results.iter().all(|r| r.passed))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", display(p));
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<bool> {
    let rx = match &cli.command {
        Command::Constellation(rx) => Some(rx),
        _ => None,
    };
    if let Command::Selftest = cli.command {
        return selftest(cli.common.seed.unwrap_or(1));
    }
    let cfg = load_config(&cli.common, rx)?;
    match cli.command {
        Command::Metrics => metrics(cfg)?,
        Command::EvmMap => evm_map(cfg)?,
        Command::Constellation(_) => constellation(cfg)?,
        Command::MonteCarlo => monte_carlo(cfg)?,
        Command::Selftest => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        1
    }
}
