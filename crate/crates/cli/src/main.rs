use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod svg;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "microcavity", version, about = "Elliptic dielectric microcavity resonances, self-energies and decay channels")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the columns of every CSV output and exit.
    #[arg(long)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Poincaré surface of section with separatrix and critical-line overlays.
    Psos {
        #[arg(long)]
        ecc: f64,
        /// Number of initial conditions.
        #[arg(long, default_value_t = 40)]
        seeds: usize,
        #[arg(long, default_value_t = 400)]
        bounces: usize,
        /// Refractive index for the critical line.
        #[arg(long)]
        n: Option<f64>,
    },
    /// Closed and open resonances of the configured labels at one eccentricity.
    Modes {
        #[arg(long)]
        ecc: f64,
    },
    /// Tracks every label, closed and open, over the configured grid.
    Sweep,
    /// Husimi map of one mode.
    Husimi {
        #[arg(long)]
        ecc: f64,
        /// Mode as `m,l`; defaults to the first configured label.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value = "open")]
        kind: String,
    },
    /// Self-energy differences and decay-channel distances of the configured pairs.
    Analyze,
}

pub const SCHEMA: &str = "\
psos.csv        seed,bounce,s,p          s = normalized arclength from the major-axis end, p = sin of the angle of incidence
modes.csv       m,l,kind,parity,e,re_kr,im_kr,q,residual,elements
trajectories.csv e,m,l,kind,parity,re_kr,im_kr,residual   residual = smallest singular value / Frobenius norm
self_energy.csv e,m,l,s_e                 s_e = Re kR(closed) - Re kR(open)
husimi.csv      s,p,weight                cell centres, weights normalized to unit integral
parity          two letters for the x and y reflections: e = even, o = odd
";

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.schema {
        print!("{SCHEMA}");
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no command given; see --help");
    };
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Command::Psos { n: Some(n), .. } = command {
        cfg.n = n;
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .context("starting the worker pool")?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let clean = match command {
        Command::Psos { ecc, seeds, bounces, .. } => commands::psos(&cfg, ecc, seeds, bounces)?,
        Command::Modes { ecc } => commands::modes(&cfg, ecc)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Husimi { ecc, label, kind } => commands::husimi(&cfg, ecc, label.as_deref(), &kind)?,
        Command::Analyze => commands::analyze(&cfg)?,
    };
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
