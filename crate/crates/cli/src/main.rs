mod config;
mod pipeline;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{resolve, RunConfig};

#[derive(Parser)]
#[command(name = "relu-align", version, about = "Simulate and check small-initialization training of two-layer ReLU networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (toy2d, toy2d-gd, mnist01, mu-sweep, orthogonal, large-eps).
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the initialization seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the data and initialization assumptions and print every bound.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate one run and write its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run even when the assumptions are violated.
        #[arg(long)]
        force: bool,
    },
    /// Recompute and print the bound-vs-measured table of a run directory.
    Report {
        /// Run directory (alternatively --out).
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured grid of angles and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn load(common: &Common, out: Option<PathBuf>) -> Result<RunConfig> {
    if common.config.is_none() && common.preset.is_none() {
        bail!("one of --config or --preset is required");
    }
    let mut cfg = resolve(common.preset.as_deref(), common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    Ok(cfg)
}

fn check(common: &Common) -> Result<u8> {
    let cfg = load(common, None)?;
    let p = pipeline::prepare(&cfg)?;
    print!("{}", pipeline::render_check(&p));
    Ok(if p.compliant() { 0 } else { 1 })
}

fn run(common: &Common, out: Option<PathBuf>, force: bool) -> Result<u8> {
    let cfg = load(common, out)?;
    let p = pipeline::prepare(&cfg)?;
    if !p.compliant() && !force {
        eprint!("{}", pipeline::render_check(&p));
        bail!("configuration is non-compliant; pass --force to run it anyway");
    }
    let outcome = pipeline::run(&cfg, &p, &cfg.out)?;
    if let Some(s) = &outcome.summary {
        print!("{}", s.render_table());
    }
    println!("artifacts: {}", cfg.out.display());
    if let Some(a) = outcome.abort {
        eprintln!("error: {a}");
        return Ok(1);
    }
    Ok(0)
}

fn report(dir: Option<PathBuf>, out: Option<PathBuf>) -> Result<u8> {
    let Some(dir) = dir.or(out) else {
        bail!("report needs a run directory");
    };
    let s = pipeline::report(&dir)?;
    print!("{}", s.render_table());
    println!("{}", serde_json::to_string(&s)?);
    Ok(if s.all_pass { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Check { common } => check(&common),
        Cmd::Run { common, out, force } => run(&common, out, force),
        Cmd::Report { dir, out } => report(dir, out),
        Cmd::Sweep { common, out, force } => load(&common, out).and_then(|cfg| sweep::sweep(&cfg, force)),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
