//! `waveguide`: spectra of Dirac operators on thin curved strips from a TOML configuration.

use std::io::{IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use waveguide_cli::config::{BandRange, Format, RunConfig};
use waveguide_cli::emit;
use waveguide_cli::run::{self, Failure};

#[derive(Parser)]
#[command(name = "waveguide", version = emit::VERSION, about = "Spectra of infinite-mass Dirac operators on curved planar strips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for assembly and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    mass: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Subcommand)]
enum Command {
    /// Transverse energies E_p(m) with asymptotic checks.
    Transverse {
        /// Band range, e.g. `1..4`.
        #[arg(long)]
        p: Option<String>,
    },
    /// Bands ±sqrt(m² + k² + E_p(m)) of the straight strip over a k grid.
    Dispersion {
        #[arg(long)]
        p: Option<String>,
    },
    /// Essential spectrum threshold and its thin-width renormalization.
    Edge,
    /// Discrete eigenvalues of the curved strip below the essential edge.
    Spectrum,
    /// Convergence of edge − π/(4ε) to 2m/π.
    ThinSweep,
    /// Gap between the strip and the Dirichlet Laplacian for growing mass.
    MassSweep,
    /// Certificate for discrete spectrum of a compactly supported bump.
    Certify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Transverse { .. } => "transverse",
            Command::Dispersion { .. } => "dispersion",
            Command::Edge => "edge",
            Command::Spectrum => "spectrum",
            Command::ThinSweep => "thin-sweep",
            Command::MassSweep => "mass-sweep",
            Command::Certify => "certify",
        }
    }
}

fn paint(text: &str, code: &str, tty: bool) -> String {
    if tty && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Validation)?,
        None => RunConfig::default(),
    };
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    if let Some(m) = cli.mass {
        cfg.mass = m;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = &cli.format {
        cfg.output.formats = f.clone();
        cfg.output.formats.sort();
        cfg.output.formats.dedup();
    }
    if let Command::Transverse { p: Some(p) } | Command::Dispersion { p: Some(p) } = &cli.command {
        cfg.bands = BandRange::parse(p).map_err(Failure::Validation)?;
    }
    cfg.validate().map_err(Failure::Validation)?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Vec<String>, Failure> {
    let mut cfg = resolve(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let artifacts = match cli.command {
        Command::Transverse { .. } => run::transverse(&mut cfg),
        Command::Dispersion { .. } => run::dispersion(&mut cfg),
        Command::Edge => run::edge(&mut cfg),
        Command::Spectrum => run::spectrum(&mut cfg),
        Command::ThinSweep => run::thin_sweep(&mut cfg),
        Command::MassSweep => run::mass_sweep(&mut cfg),
        Command::Certify => run::certificate(&mut cfg),
    }?;
    let written = emit::emit(cli.command.name(), &cfg, &artifacts)?;
    let mut lines = artifacts.summary;
    lines.extend(written.iter().map(|p| format!("wrote {}", p.display())));
    Ok(lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for line in lines {
                let _ = writeln!(out, "{line}");
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            let tty = std::io::stderr().is_terminal();
            eprintln!("{} {}", paint("error:", "1;31", tty), failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
