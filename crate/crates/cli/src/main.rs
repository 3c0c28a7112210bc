use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use teichlab::harmonic::GridKind;
use teichlab_cli::commands;
use teichlab_cli::config::{worker_threads, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lab", about = "Harmonic-map energies on a genus-two surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the refined octagon mesh with its side pairings as JSON.
    BuildSurface {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the configured quadratic differentials.
    Qd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniformize the deformed domain metric.
    Liouville {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy sweep over the z-grid or the t-ray; writes CSV traces.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "z")]
        kind: Kind,
    },
    /// Run the Weil-Petersson ray suite.
    Wp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run verification suites and write the report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Z,
    T,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    refine: Option<i64>,
    #[arg(long)]
    depth: Option<i64>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    random_seed: Option<u64>,
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(r) = self.refine {
            cfg.refine = r;
        }
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(o) = &self.out_dir {
            cfg.out_dir = o.clone();
        }
        if self.svg {
            cfg.svg = true;
        }
        if let Some(s) = self.random_seed {
            cfg.random_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn verify(mut cfg: ExperimentConfig, suite: Option<String>, report: Option<PathBuf>) -> anyhow::Result<bool> {
    if let Some(s) = suite {
        cfg.suite = s;
    }
    cfg.validate()?;
    let out = commands::verify(&cfg, worker_threads()?, report.as_deref())?;
    let r = &out.report;
    println!("{}/{} checks passed", r.total - r.failed.len(), r.total);
    for f in &r.failed {
        println!("FAILED {f}");
    }
    Ok(r.passed)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::BuildSurface { common, out } => {
            let p = commands::build_surface(&common.config()?, out.as_deref())?;
            println!("{}", p.display());
        }
        Command::Qd { common, out } => {
            let p = commands::qd(&common.config()?, out.as_deref())?;
            println!("{}", p.display());
        }
        Command::Liouville { common, out } => {
            let p = commands::liouville(&common.config()?, out.as_deref())?;
            println!("{}", p.display());
        }
        Command::Sweep { common, kind } => {
            let kind = match kind {
                Kind::Z => GridKind::Z,
                Kind::T => GridKind::T,
            };
            for p in commands::sweep(&common.config()?, kind, worker_threads()?)? {
                println!("{}", p.display());
            }
        }
        Command::Wp { common, report } => return verify(common.config()?, Some("wp".into()), report),
        Command::Verify { common, suite, report } => return verify(common.config()?, suite, report),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()).context("lab") {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
