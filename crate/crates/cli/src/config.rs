use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flexregion::baseline::HeatingDemandModel;
use flexregion::devices::DEFAULT_N_POLY;
use flexregion::ffor::{DEFAULT_TOL_REL_AREA, MAX_DIRECTIONS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Single,
    Durations,
    Seasonal,
    Penetration,
    Identify,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Single => "single",
            AnalysisKind::Durations => "durations",
            AnalysisKind::Seasonal => "seasonal",
            AnalysisKind::Penetration => "penetration",
            AnalysisKind::Identify => "identify",
        }
    }
}

/// Scenario description read from a TOML file. Every field is optional;
/// paths given on the command line take precedence over those in the file,
/// and relative paths in the file are resolved against its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: Option<PathBuf>,
    pub fleet: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// When present, must agree with the verb the CLI was invoked with.
    pub analysis: Option<AnalysisKind>,
    /// First timestep (index into the weather series) of single, durations
    /// and penetration runs.
    pub t0: usize,
    /// Sustained durations in steps for the durations analysis.
    pub durations: Vec<usize>,
    /// Sustained duration in steps for seasonal and penetration runs.
    pub duration: usize,
    /// Inclusive first and last day of the seasonal sweep; the whole weather
    /// record when absent. A range ending before it starts is empty.
    pub date_range: Option<[NaiveDate; 2]>,
    /// Hours of the day at which seasonal quantifications start.
    pub start_hours: Vec<u32>,
    /// Heat-pump capacity multipliers of the penetration sweep.
    pub multipliers: Vec<f64>,
    /// Vertices of the polygons replacing line apparent-power limits.
    pub n_poly: usize,
    pub tol_rel_area: f64,
    /// Heating-demand model. `q_max` (°C/h of indoor-temperature change at
    /// full heating) scales the thermal energy heat pumps can shift; it is
    /// not measured anywhere and should be set per building stock.
    pub heating: HeatingDemandModel,
    /// Installed PV capacity of the whole grid in MW, needed by `identify`.
    pub total_pv_capacity_mw: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid: None,
            fleet: None,
            measurements: None,
            weather: None,
            out: None,
            analysis: None,
            t0: 0,
            durations: vec![1, 4, 8],
            duration: 8,
            date_range: None,
            start_hours: vec![0, 12],
            multipliers: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            n_poly: DEFAULT_N_POLY,
            tol_rel_area: DEFAULT_TOL_REL_AREA,
            heating: HeatingDemandModel::default(),
            total_pv_capacity_mw: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(source: &str) -> Result<Self, CliError> {
        toml::from_str(source).map_err(|e| CliError::input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("reading config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&source).map_err(|e| e.context(path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.grid, &mut cfg.fleet, &mut cfg.measurements, &mut cfg.weather, &mut cfg.out] {
            if let Some(rel) = p.as_ref().filter(|p| p.is_relative()) {
                *p = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    /// Checks the parts of the configuration the given analysis relies on.
    pub fn validate(&self, kind: AnalysisKind) -> Result<(), CliError> {
        if let Some(a) = self.analysis.filter(|&a| a != kind) {
            return Err(CliError::input(format!(
                "config declares analysis \"{}\" but \"{}\" was requested",
                a.name(),
                kind.name()
            )));
        }
        let need = |p: &Option<PathBuf>, what: &str| -> Result<(), CliError> {
            match p {
                None => Err(CliError::input(format!("no {what} file given (use --{what} or the config)"))),
                Some(p) if !p.is_file() => Err(CliError::input(format!("{what} file {} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        need(&self.weather, "weather")?;
        if kind == AnalysisKind::Identify {
            need(&self.measurements, "measurements")?;
            match self.total_pv_capacity_mw {
                Some(c) if c >= 0.0 && c.is_finite() => {}
                Some(_) => return Err(CliError::input("total_pv_capacity_mw must be non-negative")),
                None => return Err(CliError::input("identify needs total_pv_capacity_mw in the config")),
            }
        } else {
            need(&self.grid, "grid")?;
            need(&self.fleet, "fleet")?;
            if let Some(p) = self.measurements.as_ref().filter(|p| !p.is_file()) {
                return Err(CliError::input(format!("measurements file {} does not exist", p.display())));
            }
        }
        if !(self.tol_rel_area > 0.0 && self.tol_rel_area.is_finite()) {
            return Err(CliError::input("tol_rel_area must be positive"));
        }
        if self.n_poly < 4 || self.n_poly > MAX_DIRECTIONS {
            return Err(CliError::input(format!("n_poly must lie in [4, {MAX_DIRECTIONS}]")));
        }
        match kind {
            AnalysisKind::Durations if self.durations.is_empty() => {
                return Err(CliError::input("durations analysis needs a nonempty duration list"));
            }
            AnalysisKind::Durations if self.durations.contains(&0) => {
                return Err(CliError::input("durations must be at least one step"));
            }
            AnalysisKind::Seasonal | AnalysisKind::Penetration if self.duration == 0 => {
                return Err(CliError::input("duration must be at least one step"));
            }
            _ => {}
        }
        if kind == AnalysisKind::Seasonal {
            if let Some(h) = self.start_hours.iter().find(|&&h| h > 23) {
                return Err(CliError::input(format!("start hour {h} is not an hour of the day")));
            }
        }
        if kind == AnalysisKind::Penetration {
            if let Some(m) = self.multipliers.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
                return Err(CliError::input(format!("multiplier {m} must be non-negative")));
            }
        }
        self.heating.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(())
    }

    /// Output directory, `out` in the working directory by default.
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
