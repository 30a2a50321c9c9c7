//! Scenario directories on disk and a runner for the `ffor` binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use flexregion::baseline::WeatherSeries;
use flexregion::devices::fleet_to_json;
use flexregion::identification::{
    format_timestamp, measurements_to_csv, weather_to_csv, MeasurementRecord, WeatherRecord,
};
use flexregion::synthetic::{
    default_identification_nodes, epoch, heat_pump, identification_dataset, toy2, toy2_with_line_limit, toy_bess,
    two_feeder_parts, IdentificationDataset, TOY_HORIZON, TWO_FEEDER_HP,
};
use flexregion::{Device, Network};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("scenario.toml")
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }

    pub fn read_out(&self, name: &str) -> String {
        let p = self.out().join(name);
        std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("reading {}: {e}", p.display()))
    }

    pub fn write(&self, name: &str, contents: &str) {
        std::fs::write(self.path(name), contents).unwrap();
    }

    /// Runs `ffor <verb> --config scenario.toml` plus extra arguments.
    pub fn run(&self, verb: &str, extra: &[&str]) -> Output {
        let config = self.config();
        let mut args = vec![verb, "--config", config.to_str().unwrap()];
        args.extend_from_slice(extra);
        ffor(&args, &[])
    }

    /// Like [`Fixture::run`], panicking unless the run succeeds.
    pub fn run_ok(&self, verb: &str, extra: &[&str]) -> Output {
        let out = self.run(verb, extra);
        assert!(
            out.status.success(),
            "ffor {verb} failed with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    /// All output files, sorted by name, with their bytes.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(self.out()).unwrap() {
            let entry = entry.unwrap();
            files.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).unwrap());
        }
        files
    }
}

pub fn ffor(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ffor"));
    cmd.args(args).env_remove("FLEXREGION_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("ffor runs")
}

pub fn weather_records(w: &WeatherSeries) -> Vec<WeatherRecord> {
    w.timestamps
        .iter()
        .zip(w.temp_c.iter().zip(&w.irr_wm2))
        .map(|(t, (&temp_c, &irr_wm2))| WeatherRecord { timestamp: format_timestamp(*t), temp_c, irr_wm2 })
        .collect()
}

/// Writes grid, fleet, weather, optional measurements and a config whose
/// paths are relative to the fixture directory.
pub fn write_fixture(
    net: &Network,
    fleet: &[Device],
    weather: &[WeatherRecord],
    measurements: Option<&[MeasurementRecord]>,
    config: &str,
) -> Fixture {
    let fx = Fixture { dir: tempfile::tempdir().unwrap() };
    fx.write("grid.json", &net.to_json());
    fx.write("fleet.json", &fleet_to_json(fleet, net.base_mva));
    fx.write("weather.csv", &weather_to_csv(weather));
    let mut header =
        String::from("grid = \"grid.json\"\nfleet = \"fleet.json\"\nweather = \"weather.csv\"\nout = \"out\"\n");
    if let Some(m) = measurements {
        fx.write("measurements.csv", &measurements_to_csv(m));
        header.push_str("measurements = \"measurements.csv\"\n");
    }
    fx.write("scenario.toml", &format!("{header}{config}"));
    fx
}

fn constant_weather(start: NaiveDateTime, n: usize, temp_c: f64) -> Vec<WeatherRecord> {
    weather_records(&WeatherSeries::constant(start, 15, n, temp_c, 0.0))
}

/// TOY2 with a single battery at `n1` over 8 quarter-hours.
pub fn toy2f(config: &str) -> Fixture {
    write_fixture(&toy2(), &[Device::Bess(toy_bess("n1"))], &constant_weather(epoch(), TOY_HORIZON, 10.0), None, config)
}

/// TOY2 without any device.
pub fn empty_fleet(config: &str) -> Fixture {
    write_fixture(&toy2(), &[], &constant_weather(epoch(), TOY_HORIZON, 10.0), None, config)
}

/// TOY2 whose 0.5 p.u. line carries a 2 MW metered load: no baseline exists.
pub fn overloaded(config: &str) -> Fixture {
    let weather = constant_weather(epoch(), TOY_HORIZON, 10.0);
    let meas: Vec<MeasurementRecord> = weather
        .iter()
        .map(|w| MeasurementRecord { timestamp: w.timestamp.clone(), node_id: "n1".into(), p_net_mw: 2.0 })
        .collect();
    write_fixture(&toy2_with_line_limit(0.5), &[Device::Bess(toy_bess("n1"))], &weather, Some(&meas), config)
}

/// The saturating two-feeder grid at 0 °C with unit heat-pump multiplier.
pub fn two_feeder(config: &str) -> Fixture {
    let (net, fleet, weather) = two_feeder_parts(TWO_FEEDER_HP.0, TWO_FEEDER_HP.1);
    write_fixture(&net, &fleet, &weather_records(&weather), None, config)
}

pub const SEASONAL_DAYS: i64 = 6;
pub const COLD_DAYS: i64 = 3;
pub const COLD_C: f64 = 0.0;
pub const WARM_C: f64 = 20.0;

pub fn seasonal_start() -> NaiveDate {
    epoch().date()
}

/// Six days on TOY2 (battery plus optional 0.5 p.u. heat pump): three at
/// 0 °C followed by three at 20 °C. Weather between 12:00 and 13:00 of the
/// second day is missing.
pub fn seasonal(config: &str, with_heat_pump: bool) -> Fixture {
    let steps = (SEASONAL_DAYS * 96) as usize;
    let gap_from = epoch() + TimeDelta::days(1) + TimeDelta::hours(12);
    let gap_to = gap_from + TimeDelta::hours(1);
    let weather: Vec<WeatherRecord> = (0..steps)
        .filter_map(|k| {
            let t = epoch() + TimeDelta::minutes(15 * k as i64);
            if t >= gap_from && t < gap_to {
                return None;
            }
            let temp_c = if (k as i64) < COLD_DAYS * 96 { COLD_C } else { WARM_C };
            Some(WeatherRecord { timestamp: format_timestamp(t), temp_c, irr_wm2: 0.0 })
        })
        .collect();
    let mut fleet = vec![Device::Bess(toy_bess("n1"))];
    if with_heat_pump {
        fleet.push(Device::Load(heat_pump("hp", "n1", 0.5)));
    }
    write_fixture(&toy2(), &fleet, &weather, None, config)
}

pub const IDENT_DAYS: usize = 60;
pub const IDENT_NOISE: f64 = 0.02;
pub const IDENT_SEED: u64 = 42;

/// The synthetic metering dataset plus a dead node `n9` without any value.
pub fn identification() -> (Fixture, IdentificationDataset) {
    let data = identification_dataset(&default_identification_nodes(), IDENT_DAYS, IDENT_NOISE, IDENT_SEED);
    let mut meas = data.measurements.clone();
    meas.extend(data.weather.iter().take(96).map(|w| MeasurementRecord {
        timestamp: w.timestamp.clone(),
        node_id: "n9".into(),
        p_net_mw: f64::NAN,
    }));
    let fx = Fixture { dir: tempfile::tempdir().unwrap() };
    fx.write("weather.csv", &weather_to_csv(&data.weather));
    fx.write("measurements.csv", &measurements_to_csv(&meas));
    fx.write(
        "scenario.toml",
        &format!(
            "measurements = \"measurements.csv\"\nweather = \"weather.csv\"\nout = \"out\"\ntotal_pv_capacity_mw = {}\n",
            data.total_pv_mw()
        ),
    );
    (fx, data)
}

/// Parses a CSV output into header-keyed columns of numbers.
pub fn csv_column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

pub fn csv_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

pub fn assert_exists(p: &Path) {
    assert!(p.exists(), "{} missing", p.display());
}
