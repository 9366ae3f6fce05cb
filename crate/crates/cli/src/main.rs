use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lama_cli::{cmd_reconstruct, cmd_simulate, cmd_verify, CliError, ReconstructOptions, RunConfig, VerifyOptions};

/// Sparse-view CT reconstruction by safeguarded dual-domain alternating
/// minimization.
///
/// Exit codes: 0 success, 1 I/O or other error, 2 config error,
/// 3 numerical failure, 4 verification failure.
#[derive(Parser)]
#[command(name = "lama", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; omitted keys keep their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set solver.max_iters=200`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (same as `--set output_dir=...`).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut overrides = self.overrides.clone();
        if let Some(dir) = &self.output {
            overrides.push(format!("output_dir={:?}", dir.display().to_string()));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the phantom, full and sparse sinograms (and noisy variants).
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the baselines, the initializer and the solver; write images,
    /// the solver trace and a metrics table.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Stop after zero-filled FBP and the initializer.
        #[arg(long)]
        baseline_only: bool,
        /// Read a container written by `simulate` instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run the invariant battery and print PASS/FAIL per check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Perturb the back-projection in the adjoint check (fault injection).
        #[arg(long)]
        corrupt_adjoint: bool,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => {
            for path in cmd_simulate(&common.load()?)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Reconstruct {
            common,
            baseline_only,
            input,
        } => {
            let cfg = common.load()?;
            let rec = cmd_reconstruct(&cfg, &ReconstructOptions { baseline_only, input })?;
            if let Some(s) = &rec.solve {
                println!(
                    "{} iterations, stopped by {}, final eps {:.3e}, loss {:.6e}",
                    s.result.trace.len(),
                    s.result.termination,
                    s.result.iterate.eps,
                    s.loss
                );
            }
            for (name, m) in rec.metrics()? {
                println!("{name:>16}: PSNR {:6.2} dB  SSIM {:.4}  sinogram RMSE {:.4e}", m.psnr, m.ssim, m.sino_rmse);
            }
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Verify { common, corrupt_adjoint } => {
            cmd_verify(&common.load()?, &VerifyOptions { corrupt_adjoint })?;
        }
        Command::Config { common } => print!("{}", common.load()?.to_toml()),
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_args(std::env::args_os()))
}
