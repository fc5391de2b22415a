use clap::{Args, Parser, Subcommand};
use onebit_mimo::admm::AdmmVariant;
use onebit_mimo::config::{FileConfig, Overrides};
use onebit_mimo::report::{self, RunManifest, MANIFEST_FILE, RESULTS_FILE};
use onebit_mimo::sim::run_campaign;
use onebit_mimo::validate::{run_validation, ValidationOptions};
use onebit_mimo::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "onebit-mimo", version, about = "One-bit massive MIMO uplink detection campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER campaign and write results.csv and manifest.json.
    Run(RunArgs),
    /// Run the fast numerical self-checks.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file. Omit to use built-in defaults.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Rerun the configuration recorded in a previous manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    setups: Option<u64>,
    #[arg(long)]
    uses: Option<u64>,
    /// Comma-separated detector list, e.g. `mrc,bmmse,admm-soft`.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<String>>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    variant: Option<AdmmVariant>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Do not print the BER table.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Tolerance for the ADMM update-oracle checks.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Test hook: clamp arcsine arguments to this limit.
    #[arg(long, hide = true, default_value_t = 1.0)]
    corrupt_arcsine_clamp: f64,
}

/// Exit status for a configuration file that cannot be read.
const EXIT_MISSING_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn load_base(args: &RunArgs) -> Result<FileConfig, ExitCode> {
    if let Some(path) = &args.config {
        return FileConfig::load(path).map_err(|e| load_failure(path, e));
    }
    if let Some(path) = &args.manifest {
        let manifest = std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|text| serde_json::from_str::<RunManifest>(&text).map_err(Error::from))
            .map_err(|e| load_failure(path, e))?;
        return Ok(manifest.config);
    }
    Ok(FileConfig::default())
}

fn load_failure(path: &Path, e: Error) -> ExitCode {
    match e {
        Error::Io(io) => {
            eprintln!("error: cannot read config file {}: {io}", path.display());
            ExitCode::from(EXIT_MISSING_CONFIG)
        }
        other => {
            eprintln!("error: invalid config {}: {other}", path.display());
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let mut file_cfg = match load_base(&args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    file_cfg.apply(&Overrides {
        seed: args.seed,
        workers: args.workers,
        setups: args.setups,
        uses: args.uses,
        detectors: args.detectors.clone(),
        rho: args.rho,
        iterations: args.iters,
        variant: args.variant,
    });
    let cfg = match file_cfg.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    let started = chrono::Utc::now().to_rfc3339();
    let report = match run_campaign(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: campaign failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let finished = chrono::Utc::now().to_rfc3339();

    let write = || -> onebit_mimo::Result<()> {
        std::fs::create_dir_all(&args.out_dir)?;
        let results = args.out_dir.join(RESULTS_FILE);
        report::write_csv(&report, std::fs::File::create(&results)?)?;
        RunManifest::new(&file_cfg, &report, started, finished, &results)
            .write(&args.out_dir.join(MANIFEST_FILE))
    };
    if let Err(e) = write() {
        eprintln!("error: writing results to {}: {e}", args.out_dir.display());
        return ExitCode::FAILURE;
    }
    if !args.quiet {
        print!("{}", report::format_table(&report));
    }
    if report.setups_failed > 0 {
        eprintln!(
            "warning: {} of {} setups were skipped as numerically singular",
            report.setups_failed, cfg.setups
        );
    }
    ExitCode::SUCCESS
}

fn cmd_validate(args: ValidateArgs) -> ExitCode {
    let opts = ValidationOptions {
        tolerance: args.tolerance,
        seed: args.seed,
        arcsine_clamp: args.corrupt_arcsine_clamp,
    };
    let outcomes = run_validation(&opts);
    let mut ok = true;
    for c in &outcomes {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
