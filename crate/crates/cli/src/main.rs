mod cli_error;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cli_error::{CliError, CliResult};
use commands::{
    FramesArgs, GenArgs, LightfieldArgs, ReconstructArgs, ResinCalArgs, SweepArgs,
};
use config::{parse_model, FilterConfig, RunConfig, CONFIG_VERSION};
use tomolith::optimize::InitMode;

#[derive(Parser)]
#[command(
    name = "tomolith",
    version,
    about = "Tomographic projection synthesis for volumetric curing"
)]
struct Cli {
    /// Worker threads (default: all cores; CAL_THREADS env as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every optimization-backed command.
#[derive(Args, Clone)]
struct OptimizeFlags {
    /// Number of projection angles.
    #[arg(long)]
    angles: Option<usize>,
    /// Angular range in degrees: 180 or 360.
    #[arg(long)]
    range: Option<f64>,
    /// First angle in degrees.
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Development model: hard:T | double:lo,hi | sigmoid:mu,sigma.
    #[arg(long, default_value = "hard:0.5")]
    model: String,
    /// Initial projections: ct | random.
    #[arg(long, default_value = "ct")]
    init: String,
    /// Seed for random initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration budget.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Step size.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Round to 8-bit levels every iteration (true) or once at the end.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    quantize_each_iter: bool,
    /// Stop once the normalized pixel error reaches this value.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Error-backprojection filter: ramp-exp[:k0] | ramp | none.
    #[arg(long, default_value = "ramp-exp")]
    filter: String,
    /// Peak intensity of the default linear calibration, W/cm^2.
    #[arg(long, default_value_t = 1.0)]
    imax: f64,
    /// Measured calibration curve (CSV dlp_value,intensity_w_cm2).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Gray level above which a loaded pixel counts as solid.
    #[arg(long, default_value_t = 0.5)]
    binarize_cut: f64,
}

impl OptimizeFlags {
    fn into_run_config(
        self,
        target: Option<PathBuf>,
        default_range: f64,
    ) -> CliResult<RunConfig> {
        let init = match self.init.as_str() {
            "ct" => InitMode::CtBased,
            "random" => InitMode::Random { seed: self.seed },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown init {other:?}; expected ct or random"
                )))
            }
        };
        let angles = self.angles.ok_or_else(|| {
            CliError::Usage("--angles is required (projection angle count)".into())
        })?;
        Ok(RunConfig {
            version: CONFIG_VERSION.to_string(),
            target,
            angles,
            start_deg: self.start,
            range_deg: self.range.unwrap_or(default_range),
            model: parse_model(&self.model)?,
            init,
            iters: self.iters,
            eta: self.eta,
            quantize_each_iter: self.quantize_each_iter,
            error_tolerance: self.tol,
            filter: FilterConfig::parse(&self.filter)?,
            i_max_w_cm2: self.imax,
            calibration_csv: self.calibration,
            binarize_cut: self.binarize_cut,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Project a target, filter, apply positivity heuristics, reconstruct.
    Reconstruct {
        /// Input image (PNG or PGM) to project.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Input sinogram (CALS) to reconstruct; with --target it serves as
        /// the error reference.
        #[arg(long)]
        sinogram: Option<PathBuf>,
        #[arg(long)]
        angles: Option<usize>,
        #[arg(long, default_value_t = 180.0)]
        range: f64,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// ramp-exp[:k0] | ramp | none.
        #[arg(long, default_value = "ramp-exp")]
        filter: String,
        /// Positivity heuristic before backprojection: clamp | offset | none.
        #[arg(long)]
        heuristic: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        binarize_cut: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize optimized 8-bit projections for a binary target.
    Optimize {
        /// Target image; required unless --config provides it.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Load a full run configuration instead of flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: OptimizeFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize every z-slice of a volume and emit projector frames.
    Frames {
        /// Directory of slice images, lexicographic z order.
        #[arg(long)]
        volume: PathBuf,
        /// Vial rotation speed, degrees per second.
        #[arg(long, default_value_t = 25.0)]
        speed: f64,
        #[command(flatten)]
        flags: OptimizeFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the time-intensity resin calibration matrix.
    ResinCal {
        /// Comma-separated intensities in W/cm^2.
        #[arg(long, value_delimiter = ',')]
        intensities: Vec<f64>,
        /// Comma-separated exposure times in seconds.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
        /// Resin parameter JSON (defaults to illustrative constants).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Size the microlens lightfield projector.
    Lightfield {
        /// Target (print volume) radius in meters.
        #[arg(long = "r")]
        target_radius: f64,
        /// Outer (lens array) radius in meters.
        #[arg(long = "R")]
        outer_radius: Option<f64>,
        /// Spatial samples per transverse dimension.
        #[arg(long = "N")]
        n_spatial: usize,
        /// Subpixel size in meters (for --solve R).
        #[arg(long)]
        lambda: Option<f64>,
        /// Solve for a quantity instead of evaluating: R.
        #[arg(long)]
        solve: Option<String>,
        /// Also write a CSV sweep over N: start:end:step.
        #[arg(long)]
        sweep_n: Option<String>,
        /// CSV path for --sweep-n.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Develop scaled exposures of an optimized projection set.
    Sweep {
        /// Optimized projections (CALS).
        #[arg(long)]
        projections: PathBuf,
        /// Comma-separated dose scales.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0")]
        scales: Vec<f64>,
        /// Development model used for the hard develop threshold.
        #[arg(long, default_value = "hard:0.5")]
        model: String,
        #[arg(long, default_value_t = 1.0)]
        imax: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic benchmark target.
    Gen {
        /// rect | disk | annulus | star | full.
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        outer: Option<f64>,
        #[arg(long)]
        inner: Option<f64>,
        #[arg(long, default_value_t = 16)]
        spokes: usize,
        /// Output image path (.png or .pgm).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a documented study preset: fig5 | fig6 | fig7.
    Repro {
        which: String,
        #[command(flatten)]
        flags: OptimizeFlags,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads(requested: Option<usize>) {
    let threads = requested.or_else(|| {
        std::env::var("CAL_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(t) = threads {
        // results are thread-count independent; this only tunes parallelism
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads);
    match cli.command {
        Command::Reconstruct {
            target,
            sinogram,
            angles,
            range,
            start,
            filter,
            heuristic,
            binarize_cut,
            out,
        } => commands::cmd_reconstruct(&ReconstructArgs {
            target,
            sinogram,
            angles,
            start,
            range,
            filter: FilterConfig::parse(&filter)?,
            heuristic,
            binarize_cut,
            out,
        }),
        Command::Optimize {
            target,
            config,
            flags,
            out,
        } => {
            let cfg = match config {
                Some(path) => {
                    let mut cfg = RunConfig::load(&path)?;
                    if let Some(t) = target {
                        cfg.target = Some(t);
                    }
                    cfg
                }
                None => flags.into_run_config(target, 180.0)?,
            };
            commands::cmd_optimize(&cfg, &out)
        }
        Command::Frames {
            volume,
            speed,
            flags,
            out,
        } => {
            let cfg = flags.into_run_config(None, 360.0)?;
            commands::cmd_frames(&cfg, &FramesArgs { volume, speed, out })
        }
        Command::ResinCal {
            intensities,
            times,
            params,
            out,
        } => commands::cmd_resin_cal(&ResinCalArgs {
            intensities,
            times,
            params,
            out,
        }),
        Command::Lightfield {
            target_radius,
            outer_radius,
            n_spatial,
            lambda,
            solve,
            sweep_n,
            out,
        } => commands::cmd_lightfield(&LightfieldArgs {
            target_radius,
            outer_radius,
            n_spatial,
            lambda,
            solve,
            sweep_n,
            out,
        }),
        Command::Sweep {
            projections,
            scales,
            model,
            imax,
            out,
        } => commands::cmd_sweep(&SweepArgs {
            projections,
            scales,
            model: parse_model(&model)?,
            i_max: imax,
            out,
        }),
        Command::Gen {
            shape,
            size,
            width,
            height,
            outer,
            inner,
            spokes,
            out,
        } => commands::cmd_gen(&GenArgs {
            shape,
            size,
            out,
            width,
            height,
            outer,
            inner,
            spokes,
        }),
        Command::Repro { which, flags, out } => {
            let mut flags = flags;
            if flags.angles.is_none() {
                flags.angles = Some(202);
            }
            let cfg = flags.into_run_config(None, 180.0)?;
            commands::cmd_repro(&which, &cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
