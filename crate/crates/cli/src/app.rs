use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{run_durations, run_identify, run_penetration, run_seasonal, run_single, Outputs};
use crate::config::{AnalysisKind, ScenarioConfig};
use crate::error::CliError;
use crate::inputs::Scenario;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FLEXREGION_THREADS";

/// Flexibility regions of a distribution grid at its point of common coupling.
///
/// Exit codes: 0 success, 1 input error, 2 solver failure.
#[derive(Debug, Parser)]
#[command(name = "ffor", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flexibility region of one timestep (t0 in the config).
    Single(CommonArgs),
    /// Nested regions for each sustained duration in the config.
    Durations(CommonArgs),
    /// Maximum sustained ±ΔP from fixed hours of every day in a date range.
    Seasonal(CommonArgs),
    /// Maximum sustained ±ΔP as heat-pump capacities are scaled up.
    Penetration(CommonArgs),
    /// PV and heat-pump capacities per node from metering and weather data.
    Identify(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Grid document (JSON: base_mva, nominal_kv, buses, lines).
    #[arg(long, value_name = "FILE")]
    pub grid: Option<PathBuf>,
    /// Device fleet document (JSON array of bess / pv / controllable_load records, MW units).
    #[arg(long, value_name = "FILE")]
    pub fleet: Option<PathBuf>,
    /// Metered net consumption CSV (timestamp,node_id,p_net_mw). Without it
    /// no nonflexible load is assumed.
    #[arg(long, value_name = "FILE")]
    pub measurements: Option<PathBuf>,
    /// Weather CSV (timestamp,temp_c,irr_wm2) on a 15-minute grid.
    #[arg(long, value_name = "FILE")]
    pub weather: Option<PathBuf>,
    /// Scenario configuration (TOML); command-line paths override its paths.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write the LP of the maximum-ΔP direction in LP text format.
    #[arg(long, value_name = "FILE")]
    pub dump_lp: Option<PathBuf>,
}

impl Command {
    pub fn kind(&self) -> AnalysisKind {
        match self {
            Command::Single(_) => AnalysisKind::Single,
            Command::Durations(_) => AnalysisKind::Durations,
            Command::Seasonal(_) => AnalysisKind::Seasonal,
            Command::Penetration(_) => AnalysisKind::Penetration,
            Command::Identify(_) => AnalysisKind::Identify,
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Single(a)
            | Command::Durations(a)
            | Command::Seasonal(a)
            | Command::Penetration(a)
            | Command::Identify(a) => a,
        }
    }
}

/// Effective configuration: the config file overlaid with command-line paths.
pub fn resolve_config(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let overlay = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    overlay(&mut cfg.grid, &args.grid);
    overlay(&mut cfg.fleet, &args.fleet);
    overlay(&mut cfg.measurements, &args.measurements);
    overlay(&mut cfg.weather, &args.weather);
    overlay(&mut cfg.out, &args.out);
    Ok(cfg)
}

/// Runs one verb and returns its documents without touching the disk.
pub fn execute(command: &Command) -> Result<(ScenarioConfig, Outputs, Option<String>), CliError> {
    let kind = command.kind();
    let args = command.args();
    let cfg = resolve_config(args)?;
    cfg.validate(kind)?;
    if args.dump_lp.is_some() && matches!(kind, AnalysisKind::Seasonal | AnalysisKind::Identify) {
        return Err(CliError::input(format!("--dump-lp is not available for {}", kind.name())));
    }
    let (outputs, lp) = match kind {
        AnalysisKind::Identify => (run_identify(&cfg)?, None),
        _ => {
            let scenario = Scenario::load(&cfg)?;
            match kind {
                AnalysisKind::Single => run_single(&cfg, &scenario)?,
                AnalysisKind::Durations => run_durations(&cfg, &scenario)?,
                AnalysisKind::Penetration => run_penetration(&cfg, &scenario)?,
                _ => (run_seasonal(&cfg, &scenario)?, None),
            }
        }
    };
    Ok((cfg, outputs, lp))
}

pub fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("creating {}: {e}", dir.display())))?;
    for (name, contents) in &outputs.files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV} must be a positive integer, got \"{value}\"")))?;
    // A pool configured earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outputs, CliError> {
    configure_threads()?;
    let (cfg, outputs, lp) = execute(&cli.command)?;
    write_outputs(&cfg.out_dir(), &outputs)?;
    if let (Some(path), Some(lp)) = (&cli.command.args().dump_lp, lp) {
        std::fs::write(path, lp).map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
    }
    Ok(outputs)
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outputs) => {
            for note in &outputs.notes {
                println!("{note}");
            }
            0
        }
        Err(e) => {
            eprintln!("ffor: {e}");
            e.exit_code()
        }
    }
}
