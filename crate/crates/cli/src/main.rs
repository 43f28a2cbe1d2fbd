mod ample;
mod error;
mod floer;
mod run;
mod specflow;
mod spectrum;
mod svg;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "fueterlab", version, about = "Fueter operator experiments on framed 3-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Output {
    /// Output directory (default: fueterlab-<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite files in a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

impl Output {
    pub fn dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(format!("fueterlab-{command}")))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Block spectra, kernel dimension and regularity verdict of a frame.
    Spectrum(spectrum::SpectrumArgs),
    /// Spectral flow along a path of frames.
    Specflow(specflow::SpecflowArgs),
    /// Check one identity on random samples.
    Verify(verify::VerifyArgs),
    /// Critical points and optional trajectory of the perturbed equation on the torus.
    Floer(floer::FloerArgs),
    /// Randomized checks of the ampleness criterion and convex decomposition.
    Ample(ample::AmpleArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("FUETERLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("FUETERLAB_THREADS must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return Err(CliError::Input("FUETERLAB_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; help and version requests succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Spectrum(a) => spectrum::run(a),
        Command::Specflow(a) => specflow::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Floer(a) => floer::run(a),
        Command::Ample(a) => ample::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

/// Create the run directory, execute `body`, and always write the manifest.
pub fn with_run<F>(
    output: &Output,
    command: &str,
    config: serde_json::Value,
    inputs: Vec<(String, Vec<u8>)>,
    body: F,
) -> Result<(), CliError>
where
    F: FnOnce(&mut run::Run) -> Result<(), CliError>,
{
    let mut run = run::Run::create(&output.dir(command), output.force, command, config, inputs)?;
    let outcome = body(&mut run);
    run.finish(&outcome)?;
    outcome
}
