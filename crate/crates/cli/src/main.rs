use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ricker_ide::model::Frame;
use ricker_ide_cli::config::KEYS;
use ricker_ide_cli::{load_config, run, Command, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrameArg {
    Original,
    Transformed,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::Original => Frame::Original,
            FrameArg::Transformed => Frame::Transformed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check the model and kernel hypotheses and the operator properties
    Validate,
    /// Equilibria in both frames with their stability
    Equilibria,
    /// Monostable spreading speeds and counter-propagation sums
    Speeds {
        /// Also write the sampled objective curves
        #[arg(long)]
        curve: bool,
    },
    /// Iterate the operator from sigmoid initial data
    Simulate {
        #[arg(long, value_enum, default_value = "transformed")]
        frame: FrameArg,
    },
    /// Solve for the bistable traveling wave and validate it
    Wave {
        #[arg(long, value_enum, default_value = "original")]
        frame: FrameArg,
    },
    /// Counter-propagation sums over the sweep lattice
    Sweep,
}

#[derive(Debug, Parser)]
#[command(
    name = "ricker-ide",
    version,
    about = "Two-species Ricker integrodifference experiments"
)]
#[command(after_help = key_help())]
struct Cli {
    /// Configuration file of `section.key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Seed for the randomized property checks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Grid spacing (overrides grid.dx)
    #[arg(long, global = true)]
    dx: Option<f64>,
    /// Domain half-length (overrides grid.L)
    #[arg(long = "L", global = true)]
    half_length: Option<f64>,
    /// Simulation steps (overrides simulate.steps)
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

fn key_help() -> String {
    let mut s = String::from("Configuration keys (default in brackets):\n");
    for (key, default, what) in KEYS {
        if default.is_empty() {
            s.push_str(&format!("  {key:<22} {what}\n"));
        } else {
            s.push_str(&format!("  {key:<22} [{default}] {what}\n"));
        }
    }
    s.push_str("Without --config the reference model r = (0.5, 0.5), a = (2, 3) with Gaussian(1) kernels is used.");
    s
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();

    let mut overrides = Vec::new();
    if let Some(dx) = cli.dx {
        overrides.push(("grid.dx".to_string(), dx.to_string()));
    }
    if let Some(l) = cli.half_length {
        overrides.push(("grid.L".to_string(), l.to_string()));
    }
    if let Some(n) = cli.steps {
        overrides.push(("simulate.steps".to_string(), n.to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("output.dir".to_string(), out.display().to_string()));
    }

    let cfg = match load_config(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let command = match cli.cmd {
        Cmd::Validate => Command::Validate,
        Cmd::Equilibria => Command::Equilibria,
        Cmd::Speeds { curve } => Command::Speeds { curve },
        Cmd::Simulate { frame } => Command::Simulate {
            frame: frame.into(),
        },
        Cmd::Wave { frame } => Command::Wave {
            frame: frame.into(),
        },
        Cmd::Sweep => Command::Sweep,
    };
    let opts = RunOptions {
        jobs: cli.jobs,
        seed: cli.seed,
    };
    match run(command, &cfg, &opts) {
        Ok(report) => {
            print!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
