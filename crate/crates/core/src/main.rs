use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use circlestate::experiments::{self, Reference, RunConfig, SweepKind};
use circlestate::Result;

#[derive(Parser)]
#[command(name = "circlestate", version, about = "Pair-coherent state generation in a parametric oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional quadrature distributions of the ideal circle state
    IdealDistributions(Common),
    /// Evolve from the vacuum; write observables and distribution surfaces
    Evolve(Common),
    /// Fidelity series against the ideal circle state or the conditioned cat
    Fidelity {
        /// circle | cat
        reference: Reference,
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a config key, concurrently
    Sweep {
        /// Config key to vary, e.g. g2
        #[arg(long)]
        key: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// evolve | circle | cat
        #[arg(long, default_value = "evolve")]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Write the sparse generator as (row, col, value) triples
    ExportLiouvillian(Common),
}

/// Flags override values read from `--config`.
#[derive(Args)]
struct Common {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Scaled nonlinearity g^2
    #[arg(long)]
    g2: Option<String>,
    /// Ratio lambda / g^2 (exclusive with --lambda)
    #[arg(long, conflicts_with = "lambda")]
    ratio: Option<String>,
    /// Scaled pump lambda
    #[arg(long)]
    lambda: Option<String>,
    /// Crystal preset (AgGaSe2 | KTP); needs --gamma3 and --epsilon
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    gamma3: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Circle radius for ideal-distributions
    #[arg(long)]
    r0: Option<String>,
    /// sqrt | linear
    #[arg(long)]
    radius_mapping: Option<String>,
    /// Highest Fock level per mode
    #[arg(long)]
    nmax: Option<String>,
    /// End time in tau = gamma t
    #[arg(long)]
    t_end: Option<String>,
    /// Fixed RK4 step
    #[arg(long, conflicts_with = "rel_tol")]
    dt: Option<String>,
    /// Step-doubling tolerance
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_max: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("name", &self.name),
            ("g2", &self.g2),
            ("ratio", &self.ratio),
            ("lambda", &self.lambda),
            ("preset", &self.preset),
            ("gamma3", &self.gamma3),
            ("epsilon", &self.epsilon),
            ("r0", &self.r0),
            ("radius-mapping", &self.radius_mapping),
            ("nmax", &self.nmax),
            ("t-end", &self.t_end),
            ("dt", &self.dt),
            ("rel-tol", &self.rel_tol),
            ("record-every", &self.record_every),
            ("grid-min", &self.grid_min),
            ("grid-max", &self.grid_max),
            ("grid-points", &self.grid_points),
            ("out", &self.out),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        // a flag for one of the exclusive pairs replaces the file's choice
        if self.lambda.is_some() {
            cfg.ratio = None;
        }
        if self.ratio.is_some() {
            cfg.lambda = None;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IdealDistributions(common) => {
            let s = experiments::ideal_distributions(&common.config()?)?;
            println!(
                "ideal r0={} visibility_x0={:.6} visibility_p={:.6} peaks_x0={:?} peaks_p={:?}",
                s.r0, s.fringes.visibility_x0, s.fringes.visibility_p, s.fringes.peaks_x0, s.fringes.peaks_p
            );
        }
        Command::Evolve(common) => {
            let s = experiments::run_evolve(&common.config()?)?;
            println!(
                "evolve steps={} {} max_leakage={:e} max_trace_drift={:e} peak visibility_x0={:?} visibility_p={:?}",
                s.steps, s.scheme, s.max_leakage, s.max_trace_drift, s.peak_visibility_x0, s.peak_visibility_p
            );
        }
        Command::Fidelity { reference, common } => {
            let s = experiments::run_fidelity(&common.config()?, reference)?;
            println!("{}", s.line());
        }
        Command::Sweep { key, values, kind, common } => {
            let entries = experiments::run_sweep(&common.config()?, &key, &values, kind)?;
            let mut failed = 0;
            for e in &entries {
                match &e.error {
                    None => println!("{key}={}: {}", e.value, e.summary_line),
                    Some(err) => {
                        failed += 1;
                        eprintln!("{key}={}: error: {err}", e.value);
                    }
                }
            }
            if failed > 0 {
                return Err(circlestate::Error::Config(format!("{failed} sweep entries failed")));
            }
        }
        Command::ExportLiouvillian(common) => {
            let path = experiments::export_liouvillian(&common.config()?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
