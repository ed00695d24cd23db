//! Command-line front end. Exit codes: 0 success, 2 config error, 3 numeric failure.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::identity_suite;
use crate::error::{Error, Result};
use config::{preset_from_str, refine_preset, ExperimentConfig};
use experiment::{run_experiment, run_refine, Stages};

#[derive(Parser, Debug)]
#[command(name = "crack-imaging", version, about = "Far-field crack imaging experiments")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Table-1 preset such as "Γ1,TM", "G2,TE" or "Γ3,TM,left".
    #[arg(long)]
    pub preset: Option<String>,
    /// Noise seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize MSR matrices.
    Forward(RunArgs),
    /// Synthesize data and write the map, its metadata and metrics.
    Image(RunArgs),
    /// Run the numerical identity checks; optionally re-hash a run's artifacts.
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// manifest.json of a previous run.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Gauss–Newton shape refinement (defaults to the Γ2 experiment).
    Refine(RunArgs),
    /// Map CSV to binary PGM.
    Render { csv: PathBuf, out: PathBuf },
}

fn resolve(args: &RunArgs, fallback: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => return Err(Error::config("use either --config or --preset, not both")),
        (Some(p), None) => ExperimentConfig::load(p)?,
        (None, Some(p)) => preset_from_str(p)?,
        (None, None) => fallback.ok_or_else(|| Error::config("need --config or --preset"))?,
    };
    if let Some(s) = args.seed {
        match &mut cfg.noise {
            Some(n) => n.seed = s,
            None => return Err(Error::config("--seed given but the config has no noise")),
        }
    }
    if let Some(o) = &args.out {
        cfg.output = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Forward(a) => {
            let cfg = resolve(&a, None)?;
            let m = run_experiment(&cfg, Stages::Forward)?;
            println!("wrote {} MSR files to {}", m.outputs.len(), cfg.output);
        }
        Command::Image(a) => {
            let cfg = resolve(&a, None)?;
            run_experiment(&cfg, Stages::Image)?;
            print!("{}", std::fs::read_to_string(PathBuf::from(&cfg.output).join("metrics.txt"))?);
            println!("wrote map.csv, map.meta, metrics.txt to {}", cfg.output);
        }
        Command::Verify { seed, manifest } => {
            let mut failed = 0;
            for c in identity_suite(seed)? {
                let tag = if c.passed() { "PASS" } else { "FAIL" };
                println!("{tag} {:<28} error {:.3e} (tol {:.1e})", c.name, c.error, c.tol);
                failed += usize::from(!c.passed());
            }
            if let Some(p) = manifest {
                let n = manifest::verify_manifest(&p)?;
                println!("PASS manifest                     {n} artifacts match");
            }
            if failed > 0 {
                return Err(Error::domain(format!("{failed} identity checks failed")));
            }
        }
        Command::Refine(a) => {
            let cfg = resolve(&a, Some(refine_preset()))?;
            if cfg.refine.is_none() {
                return Err(Error::config("refinement needs a [refine] section (the default run uses the Γ2 experiment)"));
            }
            let (traj, _) = run_refine(&cfg)?;
            let mut out = std::io::stdout();
            crate::refine::write_trajectory(&traj, &mut out)?;
        }
        Command::Render { csv, out } => render::render_map(&csv, &out)?,
    }
    Ok(())
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: could not set up {n} worker threads");
            return 2;
        }
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
