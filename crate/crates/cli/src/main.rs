use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flexfit_cli::commands;
use flexfit_cli::config::{self, EvalConfig, ExtractConfig, FitShapeConfig, InvertConfig, Overrides, RenderConfig};
use flexfit_cli::CliError;

#[derive(Parser)]
#[command(name = "flexfit", version, about = "Shape fitting, prompt inversion, rendering and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    config: PathBuf,
    /// Replaces the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the iteration count (stages, generations or texture steps).
    #[arg(long)]
    iters: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            iters: self.iters,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the SDF network to an analytic shape and export the mesh.
    FitShape(Common),
    /// Optimize pseudo-token embeddings against a scoring oracle.
    Invert(Common),
    /// Rasterize a mesh from the configured cameras.
    Render(Common),
    /// Compute chamfer, topology and PSNR metrics.
    Eval(Common),
    /// Extract a mesh from a saved network checkpoint.
    ExtractMesh(Common),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = |c: &Common| c.config.clone();
    match &cli.command {
        Command::FitShape(c) => {
            let (mut cfg, _) = config::load::<FitShapeConfig>(&path(c))?;
            cfg.apply(&c.overrides());
            let m = commands::fit_shape(&cfg)?;
            report(&cfg.out, m.rows.len());
        }
        Command::Invert(c) => {
            let (mut cfg, base) = config::load::<InvertConfig>(&path(c))?;
            cfg.apply(&c.overrides());
            let m = commands::invert(&cfg, &base)?;
            report(&cfg.out, m.rows.len());
        }
        Command::Render(c) => {
            let (mut cfg, base) = config::load::<RenderConfig>(&path(c))?;
            cfg.apply(&c.overrides());
            let files = commands::render(&cfg, &base)?;
            report(&cfg.out, files.len());
        }
        Command::Eval(c) => {
            let (mut cfg, base) = config::load::<EvalConfig>(&path(c))?;
            cfg.apply(&c.overrides());
            let m = commands::eval(&cfg, &base)?;
            report(&cfg.out, m.rows.len());
        }
        Command::ExtractMesh(c) => {
            let (mut cfg, base) = config::load::<ExtractConfig>(&path(c))?;
            cfg.apply(&c.overrides());
            let out = commands::extract_mesh(&cfg, &base)?;
            log::info!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn report(out: &Path, n: usize) {
    log::info!("{n} entries written under {}", out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
