use std::collections::BTreeMap;
use std::path::Path;

use flexregion::baseline::{build_frame_with_residual, nonflexible_injections, BaselineAudit, WeatherSeries};
use flexregion::devices::load_fleet;
use flexregion::grid::load_network;
use flexregion::identification::{read_measurements_csv, read_weather_csv, MeasurementSeries};
use flexregion::{Device, Network, ScenarioFrame};

use crate::config::ScenarioConfig;
use crate::error::CliError;

/// Length of one metering step in hours.
pub const STEP_HOURS: f64 = flexregion::identification::STEP_MINUTES as f64 / 60.0;

pub fn read_file(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("reading {what} file {}: {e}", path.display())))
}

/// Measurements and weather on a common time grid.
pub fn load_series(cfg: &ScenarioConfig) -> Result<MeasurementSeries, CliError> {
    let weather_path = cfg.weather.as_deref().ok_or_else(|| CliError::input("no weather file given"))?;
    let weather = read_weather_csv(&read_file(weather_path, "weather")?)
        .map_err(|e| CliError::input(format!("{}: {e}", weather_path.display())))?;
    let measurements = match cfg.measurements.as_deref() {
        Some(p) => read_measurements_csv(&read_file(p, "measurements")?)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    MeasurementSeries::from_records(&measurements, &weather).map_err(|e| CliError::input(e.to_string()))
}

/// Why a time window cannot be evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowGap {
    OutOfRange,
    Weather,
    Measurements,
}

impl WindowGap {
    pub fn reason(&self) -> &'static str {
        match self {
            WindowGap::OutOfRange => "window extends beyond the data",
            WindowGap::Weather => "weather data missing",
            WindowGap::Measurements => "measurements missing",
        }
    }
}

/// Grid, fleet and time series of a flexibility analysis.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: Network,
    pub fleet: Vec<Device>,
    pub series: MeasurementSeries,
}

impl Scenario {
    pub fn load(cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let grid_path = cfg.grid.as_deref().ok_or_else(|| CliError::input("no grid file given"))?;
        let net = load_network(&read_file(grid_path, "grid")?)
            .map_err(|e| CliError::input(format!("{}: {e}", grid_path.display())))?;
        let fleet_path = cfg.fleet.as_deref().ok_or_else(|| CliError::input("no fleet file given"))?;
        let fleet = load_fleet(&read_file(fleet_path, "fleet")?, net.base_mva)
            .map_err(|e| CliError::input(format!("{}: {e}", fleet_path.display())))?;
        let series = load_series(cfg)?;
        Ok(Scenario { net, fleet, series })
    }

    /// Gap-free weather and measurements over `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<(WeatherSeries, BTreeMap<String, Vec<f64>>), WindowGap> {
        if start.checked_add(len).is_none_or(|end| end > self.series.len()) {
            return Err(WindowGap::OutOfRange);
        }
        let weather = self.series.weather_window(start, len).ok_or(WindowGap::Weather)?;
        let measured = self.series.node_window(start, len).ok_or(WindowGap::Measurements)?;
        Ok((weather, measured))
    }

    /// Like [`Scenario::window`] but failing with an input error.
    pub fn window_or_err(
        &self,
        start: usize,
        len: usize,
    ) -> Result<(WeatherSeries, BTreeMap<String, Vec<f64>>), CliError> {
        self.window(start, len).map_err(|g| {
            CliError::input(format!(
                "steps {start}..{} of a {}-step record: {}",
                start + len,
                self.series.len(),
                g.reason()
            ))
        })
    }

    /// Frame for `fleet` over a window whose nonflexible residual is
    /// derived with `residual_fleet`; the two differ when the installed
    /// devices are hypothetically rescaled.
    pub fn frame(
        &self,
        cfg: &ScenarioConfig,
        fleet: &[Device],
        residual_fleet: &[Device],
        weather: &WeatherSeries,
        measured: &BTreeMap<String, Vec<f64>>,
    ) -> Result<(ScenarioFrame, BaselineAudit), CliError> {
        let residual = nonflexible_injections(&self.net, residual_fleet, weather, measured, &cfg.heating)?;
        let (frame, audit) =
            build_frame_with_residual(&self.net, fleet, weather, residual, &cfg.heating, STEP_HOURS, weather.len())?;
        Ok((frame.with_line_polygon(cfg.n_poly), audit))
    }
}
