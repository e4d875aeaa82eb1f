//! Closed-loop attitude NMPC simulation driven by the semismooth
//! predictor-corrector solver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sspc::harness::{run_closed_loop, write_trace, Integrator, SimConfig, TraceFormat};
use sspc::ocp::Case;
use sspc::Error;

#[derive(Parser, Debug)]
#[command(name = "sspc-sim", version, about)]
struct Cli {
    /// JSON configuration file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constraint case (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    case: Option<u8>,
    /// Prediction horizon N.
    #[arg(long)]
    horizon: Option<usize>,
    /// Largest parameter change per homotopy step.
    #[arg(long)]
    kappa: Option<f64>,
    /// KKT residual tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Initial regularization.
    #[arg(long)]
    delta0: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<TraceFormat>,
    /// Trace output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solves per instant used to average the timing.
    #[arg(long)]
    repeats: Option<usize>,
    /// Use the reduced (Schur complement) linear solve.
    #[arg(long)]
    schur: bool,
    #[arg(long, value_enum)]
    integrator: Option<Integrator>,
    /// Seed for the measurement noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement noise standard deviation (deg/s, deg).
    #[arg(long)]
    noise: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<SimConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(c) = cli.case {
        cfg.case = Case::try_from(c)?;
    }
    if let Some(v) = cli.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = cli.kappa {
        cfg.solver.kappa = v;
    }
    if let Some(v) = cli.eps {
        cfg.solver.eps = v;
    }
    if let Some(v) = cli.delta0 {
        cfg.solver.delta0 = v;
    }
    if let Some(v) = cli.duration {
        cfg.duration = v;
    }
    if let Some(v) = cli.format {
        cfg.format = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = cli.repeats {
        cfg.repeats = v;
    }
    if cli.schur {
        cfg.solver.use_schur = true;
    }
    if let Some(v) = cli.integrator {
        cfg.integrator = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.noise {
        cfg.measurement_noise = v;
    }
    if cfg.out.is_none() {
        return Err(Error::InvalidConfig("no output path (use --out or \"out\" in the config file)".into()));
    }
    cfg.validate(cfg.params()?.tau)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sspc-sim: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cfg.out.clone().expect("checked in load_config");
    let (trace, failure) = match run_closed_loop(&cfg) {
        Ok(trace) => (trace, None),
        Err(mut f) => (std::mem::take(&mut f.trace), Some(f)),
    };
    if let Err(e) = write_trace(&trace, &out, cfg.format) {
        eprintln!("sspc-sim: {e}");
        return ExitCode::from(2);
    }
    match failure {
        None => {
            let worst = trace.iter().map(|r| r.kkt_res).fold(0.0, f64::max);
            let ms: f64 = trace.iter().map(|r| r.solve_ms).sum();
            println!(
                "{} steps written to {} (max residual {worst:.3e}, total solve time {ms:.1} ms)",
                trace.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Some(f) => {
            eprintln!("sspc-sim: {f}");
            eprintln!("sspc-sim: partial trace ({} steps) written to {}", trace.len(), out.display());
            ExitCode::FAILURE
        }
    }
}
