use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use varcap::config::Command;
use varcap::driver::run_config;

/// Variable-exponent capacities, Dirichlet problems and thinness diagnostics
/// on uniform grids. Log verbosity comes from VARCAP_LOG (error, warn, info,
/// debug, trace; default warn).
#[derive(Parser, Debug)]
#[command(name = "varcap", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs one invocation and returns the exit code: 0 converged, 2 not
/// converged (outputs written), 1 on errors.
fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    match run_config(&cli.config, cli.command, cli.out.as_deref()) {
        Ok(report) => {
            for p in &report.paths {
                let _ = writeln!(stdout, "{}", p.display());
            }
            if let Some(e) = &report.error {
                error!("{e}");
                let _ = writeln!(stderr, "varcap: {e}");
            } else if report.status.exit_code() != 0 {
                let _ = writeln!(stderr, "varcap: solver did not converge; outputs are partial");
            }
            report.status.exit_code() as u8
        }
        Err(e) => {
            let _ = writeln!(stderr, "varcap: {e}");
            1
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VARCAP_LOG", "warn")).init();
    let cli = Cli::parse();
    ExitCode::from(execute(&cli, &mut std::io::stdout(), &mut std::io::stderr()))
}
