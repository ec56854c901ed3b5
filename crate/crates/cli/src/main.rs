use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use unitprod::config::ProjectConfig;
use unitprod::dataset::{self, Dataset};
use unitprod::pipeline;
use unitprod::scoring;
use unitprod::synth::{self, WorldConfig};

/// Field-standardized productivity of research units and tests for returns to size.
#[derive(Debug, Parser)]
#[command(name = "unitprod", version)]
struct Cli {
    /// Project configuration (TOML).
    #[arg(long, global = true, env = "UNITPROD_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate the publications and roster.
    Ingest,
    /// Compute baselines, unit scores and scientist scores.
    Score,
    /// Run the two-stage returns-to-size analysis and write the report.
    Analyze,
    /// Generate a synthetic world with planted returns to size.
    Simulate(SimulateArgs),
    /// Print the summary of a previous `analyze` run found in --out.
    Report,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Full generator configuration (TOML); the flags below override it.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Number of sectors.
    #[arg(long)]
    sds: Option<usize>,
    #[arg(long)]
    universities: Option<usize>,
    /// Returns-to-size exponent for sectors without an override.
    #[arg(long)]
    beta_default: Option<f64>,
    /// CSV `sds_id,beta`.
    #[arg(long)]
    beta_overrides: Option<PathBuf>,
    /// Coupling between unit size and scientist quality, in [-1, 1].
    #[arg(long)]
    rho: Option<f64>,
}

/// Exit status 2 marks bad input: configuration, loading or validation.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest => ingest(cli),
        Command::Score => score(cli),
        Command::Analyze => analyze(cli),
        Command::Simulate(args) => simulate(cli, args),
        Command::Report => {
            let table = pipeline::summary_from_dir(&cli.out)
                .with_context(|| format!("reading report in {}", cli.out.display()))
                .map_err(invalid)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ProjectConfig, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| invalid(anyhow!("no configuration: pass --config or set UNITPROD_CONFIG")))?;
    let mut cfg = ProjectConfig::load(path).map_err(invalid)?;
    if let Some(seed) = cli.seed {
        cfg.analysis.seed = seed;
    }
    Ok(cfg)
}

/// Loads the dataset and validates it. Warnings go to stderr; unsupported
/// baseline cells fail the run.
fn load_checked(cfg: &ProjectConfig) -> Result<Dataset, Failure> {
    let ds = cfg.load_dataset().map_err(invalid)?;
    let report = dataset::validate(&ds);
    if !report.is_empty() {
        eprint!("{report}");
    }
    if report.has_errors() {
        return Err(invalid(anyhow!("validation failed")));
    }
    Ok(ds)
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn ingest(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let ds = load_checked(&cfg)?;
    println!(
        "{} publications ({} in {}-{}), {} scientists, {} units, {} sectors",
        ds.publications.len(),
        ds.publications_in_period().count(),
        ds.period.start,
        ds.period.end,
        ds.roster.len(),
        ds.roster_units().len(),
        ds.sds_ids().len()
    );
    Ok(())
}

fn score(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let ds = load_checked(&cfg)?;
    let scores = pipeline::score_dataset(&ds).map_err(invalid)?;
    create_out(&cli.out)?;
    let out = |name: &str| cli.out.join(name);
    scoring::write_unit_scores(&out("unit_scores.csv"), &scores.units).context("writing unit scores")?;
    scoring::write_scientist_scores(&out("scientist_scores.csv"), &scores.scientists)
        .context("writing scientist scores")?;
    scores
        .baselines
        .write_csv(&out("baselines.csv"))
        .context("writing baselines")?;
    eprintln!(
        "scored {} units and {} scientists into {}",
        scores.units.len(),
        scores.scientists.len(),
        cli.out.display()
    );
    Ok(())
}

fn analyze(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let ds = load_checked(&cfg)?;
    let report = pipeline::run_analysis(&ds, &cfg).map_err(invalid)?;
    create_out(&cli.out)?;
    report.write(&cli.out).context("writing report")?;
    print!("{}", report.summary_table());
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), Failure> {
    let mut world = match &args.world {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(invalid)?;
            toml::from_str::<WorldConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(invalid)?
        }
        None => WorldConfig::default(),
    };
    if let Some(n) = args.sds {
        world.n_sds = n;
    }
    if let Some(n) = args.universities {
        world.n_universities = n;
    }
    if let Some(b) = args.beta_default {
        world.beta_default = b;
    }
    if let Some(path) = &args.beta_overrides {
        world.beta_overrides = synth::read_beta_overrides(path).map_err(invalid)?;
    }
    if let Some(rho) = args.rho {
        world.rho = rho;
    }
    if let Some(seed) = cli.seed {
        world.seed = seed;
    }
    world.validate().map_err(invalid)?;
    let generated = synth::generate_world(&world).map_err(invalid)?;
    let files = synth::world_to_files(&generated, &cli.out).context("writing world")?;
    eprintln!(
        "{} sectors, {} scientists, {} publications; analyze with --config {}",
        generated.truth.sds.len(),
        generated.dataset.roster.len(),
        generated.dataset.publications.len(),
        files.config.display()
    );
    Ok(())
}
