use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levy_atoms::catalogue::{list_catalogue, Catalogue};
use levy_atoms::exfun::SamplePool;
use levy_atoms::experiment::{self, ExperimentSpec, EXIT_ERROR};
use levy_atoms::stats::{default_resolution, detect_atoms};
use levy_atoms::Result;

#[derive(Parser, Debug)]
#[command(name = "levy-atoms", version, about = "Atoms and continuity of Lévy process functionals")]
struct Cli {
    /// Overrides the seed in the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory of user density files (`x,density` CSV).
    #[arg(long, global = true)]
    user_dir: Option<PathBuf>,
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, env = "LEVY_THREADS", default_value_t = 0, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic classification only.
    Classify { spec: PathBuf },
    /// Draw the sample pool and write it as CSV.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Atom detection on an existing pool.
    Atoms {
        pool: PathBuf,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Classify, simulate, test and compare.
    Verify {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the registry of processes, g functions and oracles.
    List,
}

fn catalogue(cli: &Cli) -> Result<Catalogue> {
    match &cli.user_dir {
        Some(d) => Catalogue::with_user_dir(d),
        None => Ok(Catalogue::builtin()),
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentSpec> {
    let mut spec = experiment::load_spec(path)?;
    if let Some(s) = cli.seed {
        spec.sampler.seed = s;
    }
    Ok(spec)
}

fn print_out(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    print_out(&serde_json::to_string_pretty(v)?)
}

fn run(cli: &Cli) -> Result<i32> {
    let cat = catalogue(cli)?;
    match &cli.command {
        Command::Classify { spec } => {
            let spec = load(cli, spec)?;
            print_json(&experiment::classify(&spec.build(&cat)?)?)?;
            Ok(0)
        }
        Command::Simulate { spec, out } => {
            let spec = load(cli, spec)?;
            let dir = out.clone().unwrap_or_else(|| spec.output_dir());
            let pool = experiment::simulate(&spec.build(&cat)?, &spec.sampler)?;
            let path = experiment::write_pool(&pool, &dir, spec.analyses.histogram_bins)?;
            eprintln!("wrote {} samples to {}", pool.len(), path.display());
            Ok(0)
        }
        Command::Atoms { pool, resolution } => {
            let pool = SamplePool::read(pool)?;
            let r = resolution.unwrap_or_else(|| default_resolution(&pool));
            print_json(&detect_atoms(&pool, r)?)?;
            Ok(0)
        }
        Command::Verify { spec, out } => {
            let spec = load(cli, spec)?;
            let dir = out.clone().unwrap_or_else(|| spec.output_dir());
            let report = experiment::verify(&spec, &cat, &dir)?;
            print_json(&report)?;
            if let Some(c) = &report.contradiction {
                eprintln!("contradiction: {c}");
            }
            Ok(report.exit_code)
        }
        Command::List => {
            print_out(list_catalogue(&cat).trim_end())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
