//! Command-line front end: fit, simulate, table, query, sensitivity.
//!
//! Every command that writes files also writes a `manifest.json` with the
//! full configuration and SHA-256 checksums of the outputs, so any artifact
//! can be traced back to a reproducible invocation.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error,
//! 3 domain error (out-of-range query, insufficient data), 4 malformed
//! input data.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tumor_age::error::Error;
use tumor_age::geometry::{Diameter, Volume};
use tumor_age::growth::{simulate_ensemble, truncated_count, write_ensemble_csv, SimulationConfig};
use tumor_age::ingest::{read_rdt_csv, IngestError};
use tumor_age::invert::{CrossingMode, DiameterGrid};
use tumor_age::manifest::RunManifest;
use tumor_age::mixture::RdtMixture;
use tumor_age::report::{build_table, query_age, sensitivity_sweep, TableRun};

#[derive(Parser)]
#[command(
    name = "tumor-age",
    version,
    about = "Estimate the age distribution of a renal tumor from its diameter"
)]
struct Cli {
    /// Worker threads (0 = one per core); does not affect results
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the two-sided exponential growth-rate model to RDT samples
    Fit(FitCmd),
    /// Simulate growth histories and export them as CSV
    Simulate(SimulateCmd),
    /// Build the age-percentile table over the diameter grid
    Table(TableCmd),
    /// Look up the age distribution at one diameter
    Query(QueryCmd),
    /// Compare age tables across serial-correlation strengths
    Sensitivity(SensitivityCmd),
}

/// Growth-rate model parameters (defaults fitted to the renal cohort).
#[derive(Args)]
struct ModelArgs {
    /// Probability that an interval shrinks the tumor
    #[arg(long, default_value_t = 0.35)]
    p_negative: f64,
    /// Exponential rate of the growth branch (mean RDT = 1/rate)
    #[arg(long, default_value_t = 0.79)]
    lambda_pos: f64,
    /// Exponential rate of the shrinkage branch
    #[arg(long, default_value_t = 5.0)]
    lambda_neg: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<RdtMixture, CliError> {
        RdtMixture::new(self.p_negative, self.lambda_pos, self.lambda_neg).map_err(usage)
    }
}

/// Simulation parameters (defaults reproduce the published table).
#[derive(Args)]
struct SimArgs {
    /// Starting tumor volume, mL
    #[arg(long, default_value_t = 0.01)]
    v0: f64,
    /// Terminal volume ending a history, mL
    #[arg(long, default_value_t = 4200.0)]
    vmax: f64,
    /// Scan interval, days
    #[arg(long, default_value_t = 245.0)]
    h_days: f64,
    /// Number of simulated histories
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Base RNG seed; ensembles are reproducible per (seed, n)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lag-1 serial correlation of growth rates, in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Cap on intervals per history (bounds shrink-forever paths)
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
}

impl SimArgs {
    fn config(&self) -> Result<SimulationConfig, CliError> {
        let config = SimulationConfig {
            v0: Volume::new(self.v0).map_err(usage)?,
            v_max: Volume::new(self.vmax).map_err(usage)?,
            interval_years: self.h_days / 365.0,
            n_histories: self.n,
            seed: self.seed,
            rho: self.rho,
            max_steps: self.max_steps,
        };
        config.validate().map_err(usage)?;
        Ok(config)
    }
}

#[derive(Args)]
struct GridArgs {
    /// Comma-separated diameter grid in cm (default: the 14 reported sizes)
    #[arg(long, value_delimiter = ',', value_name = "CM,...")]
    grid: Option<Vec<f64>>,
}

impl GridArgs {
    fn grid(&self) -> Result<DiameterGrid, CliError> {
        match &self.grid {
            None => Ok(DiameterGrid::default()),
            Some(values) => {
                let thresholds = values
                    .iter()
                    .map(|&cm| Diameter::new(cm))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(usage)?;
                DiameterGrid::new(thresholds).map_err(usage)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CrossingsArg {
    /// Pool scan ages spent inside each size bucket (reference convention)
    ScanOccupancy,
    /// Pool exact crossing instants, both directions
    All,
    /// Pool only the first upward crossing per history
    FirstUpward,
}

#[derive(Args)]
struct CrossingsArgs {
    /// What counts as observing a size
    #[arg(long, value_enum, default_value = "scan-occupancy")]
    crossings: CrossingsArg,
}

impl CrossingsArgs {
    fn mode(&self) -> CrossingMode {
        match self.crossings {
            CrossingsArg::ScanOccupancy => CrossingMode::ScanOccupancy,
            CrossingsArg::All => CrossingMode::All,
            CrossingsArg::FirstUpward => CrossingMode::FirstUpward,
        }
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory, created if missing
    #[arg(long, env = "TUMOR_AGE_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FitCmd {
    /// CSV of RDT samples: header `rdt`, one value per line
    input: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TableCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    crossings: CrossingsArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct QueryCmd {
    /// Tumor diameter to look up, cm
    #[arg(allow_negative_numbers = true)]
    diameter: f64,
    /// Query a previously written table.json instead of simulating
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    crossings: CrossingsArgs,
}

// The sweep always pools exact crossings: occupancy ages are quantized to
// the scan interval, too coarse to difference, so there is no --crossings
// choice here.
#[derive(Args)]
struct SensitivityCmd {
    /// Comma-separated correlation values in [0, 1); a 0 baseline is
    /// added when missing and any --rho value is ignored
    #[arg(long, value_delimiter = ',', required = true, value_name = "RHO,...")]
    rhos: Vec<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
enum CliError {
    /// Bad flags or configuration → exit 2.
    Usage(String),
    /// Valid request outside the model's domain → exit 3.
    Domain(String),
    /// Unreadable or malformed input data → exit 4 (empty file → 2).
    Ingest(IngestError),
    /// A --table file that does not deserialize → exit 4.
    BadTable { path: String, reason: String },
    /// Failed writes → exit 1.
    Io(io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Ingest(IngestError::Empty { .. }) => 2,
            CliError::Ingest(_) | CliError::BadTable { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m.clone(),
            CliError::Ingest(e) => e.to_string(),
            CliError::BadTable { path, reason } => {
                format!("{path} is not a table.json produced by this tool: {reason}")
            }
            CliError::Io(e) => e.to_string(),
        }
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidValue { .. }
            | Error::InvalidProbability { .. }
            | Error::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            Error::NotFinite { .. }
            | Error::InsufficientData { .. }
            | Error::EmptyInput { .. }
            | Error::VolumeOverflow { .. }
            | Error::OutOfRange { .. } => CliError::Domain(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Ingest(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Output files staged together with their manifest.
struct OutputDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    fn create(dir: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let mut manifest = RunManifest::new(command);
        manifest.command = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
        Ok(OutputDir { dir: dir.to_path_buf(), manifest })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.record_output(name, bytes);
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        self.manifest.write(&self.dir)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct FitReport {
    p_negative: f64,
    lambda_pos: f64,
    lambda_neg: f64,
    ks_distance: f64,
    n: usize,
}

fn cmd_fit(cmd: FitCmd) -> Result<(), CliError> {
    let samples = read_rdt_csv(&cmd.input)?;
    let model = RdtMixture::fit(&samples)?;
    let ks = model.ks_distance(&samples)?;
    let report = FitReport {
        p_negative: model.p_negative(),
        lambda_pos: model.lambda_pos(),
        lambda_neg: model.lambda_neg(),
        ks_distance: ks,
        n: samples.len(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");

    let mut out = OutputDir::create(&cmd.out.out, "fit")?;
    out.manifest.model = Some(model);
    out.manifest.input = Some(cmd.input.display().to_string());
    out.write("fit.json", json.as_bytes())?;
    out.finish()
}

fn cmd_simulate(cmd: SimulateCmd) -> Result<(), CliError> {
    let model = cmd.model.model()?;
    let config = cmd.sim.config()?;
    let ensemble = simulate_ensemble(&model, &config)?;
    let mut csv = Vec::new();
    write_ensemble_csv(&mut csv, &ensemble)?;

    let mut out = OutputDir::create(&cmd.out.out, "simulate")?;
    out.manifest.model = Some(model);
    out.manifest.config = Some(config);
    out.write("ensemble.csv", &csv)?;
    out.finish()?;
    println!(
        "simulated {} histories ({} truncated) -> {}",
        ensemble.len(),
        truncated_count(&ensemble),
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_table(cmd: TableCmd) -> Result<(), CliError> {
    let model = cmd.model.model()?;
    let config = cmd.sim.config()?;
    let grid = cmd.grid.grid()?;
    let run = build_table(&model, &config, &grid, cmd.crossings.mode())?;

    let mut csv = Vec::new();
    run.table.write_csv(&mut csv)?;
    let json = serde_json::to_string_pretty(&run).expect("table serializes");

    let mut out = OutputDir::create(&cmd.out.out, "table")?;
    out.manifest.model = Some(model);
    out.manifest.config = Some(config);
    out.manifest.grid = Some(run.grid.clone());
    out.manifest.mode = Some(run.mode);
    out.write("table.csv", &csv)?;
    out.write("table.json", json.as_bytes())?;
    out.finish()?;
    println!(
        "wrote table.csv and table.json ({} rows, {} truncated histories) -> {}",
        run.table.rows.len(),
        run.truncated_histories,
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_query(cmd: QueryCmd) -> Result<(), CliError> {
    if !(cmd.diameter > 0.0 && cmd.diameter.is_finite()) {
        return Err(CliError::Usage(format!(
            "diameter must be a positive number of cm, got {}",
            cmd.diameter
        )));
    }
    let diameter = Diameter::new(cmd.diameter).map_err(usage)?;
    let table = match &cmd.table {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let run: TableRun = serde_json::from_str(&text).map_err(|e| CliError::BadTable {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            run.table
        }
        None => {
            let model = cmd.model.model()?;
            let config = cmd.sim.config()?;
            let grid = cmd.grid.grid()?;
            build_table(&model, &config, &grid, cmd.crossings.mode())?.table
        }
    };
    let result = query_age(&table, diameter)?;
    println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
    Ok(())
}

fn cmd_sensitivity(cmd: SensitivityCmd) -> Result<(), CliError> {
    let model = cmd.model.model()?;
    let config = cmd.sim.config()?;
    let grid = cmd.grid.grid()?;
    let report = sensitivity_sweep(&model, &config, &grid, &cmd.rhos)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");

    let mut out = OutputDir::create(&cmd.out.out, "sensitivity")?;
    out.manifest.model = Some(model);
    out.manifest.config = Some(config);
    out.manifest.grid = Some(grid);
    out.manifest.rhos = Some(report.rhos.clone());
    out.write("sensitivity.csv", &csv)?;
    out.write("sensitivity.json", json.as_bytes())?;
    out.finish()?;
    println!(
        "wrote sensitivity.csv and sensitivity.json ({} rows) -> {}",
        report.rows.len(),
        cmd.out.out.display()
    );
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(cmd) => cmd_fit(cmd),
        Command::Simulate(cmd) => cmd_simulate(cmd),
        Command::Table(cmd) => cmd_table(cmd),
        Command::Query(cmd) => cmd_query(cmd),
        Command::Sensitivity(cmd) => cmd_sensitivity(cmd),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
