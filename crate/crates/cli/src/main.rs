use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use greenlab_cli::commands::{cmd_bounds, cmd_simulate, cmd_special, cmd_verify, RunArgs, SpecialArgs, SpecialFn, Theorem};

#[derive(Parser)]
#[command(name = "greenlab", version, about = "Green-function bounds and Monte-Carlo checks for killed jump-diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides [run] seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides [run] n_paths
    #[arg(long)]
    paths: Option<u64>,
    /// Worker threads, 0 for all cores; never changes results
    #[arg(long, env = "GREENLAB_WORKERS", default_value_t = 0)]
    workers: usize,
}

impl From<Common> for RunArgs {
    fn from(c: Common) -> Self {
        RunArgs {
            config: c.config,
            out: c.out,
            seed: c.seed,
            paths: c.paths,
            workers: c.workers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the comparison function over the config grid
    Bounds(Common),
    /// Run one verification experiment
    Verify {
        theorem: Theorem,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a special function
    Special {
        function: SpecialFn,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lam: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Exit times and pointwise Green estimates over the config grid
    Simulate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bounds(c) => cmd_bounds(&c.into()),
        Command::Verify { theorem, common } => cmd_verify(theorem, &common.into()),
        Command::Special {
            function,
            beta,
            t,
            a,
            alpha,
            lam,
            x,
            r,
            d,
        } => cmd_special(
            function,
            &SpecialArgs {
                beta,
                t,
                a,
                alpha,
                lam,
                x,
                r,
                d,
            },
        ),
        Command::Simulate(c) => cmd_simulate(&c.into()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
