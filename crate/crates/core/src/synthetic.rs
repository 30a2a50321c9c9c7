//! Small constructed instances with known answers, used by tests, benches
//! and the command-line examples.

use std::f64::consts::PI;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{build_frame_with_residual, HeatingDemandModel, WeatherSeries, STC_IRRADIANCE};
use crate::devices::{BessDevice, ControllableLoad, Device, LoadKind, PvDevice, DEFAULT_N_POLY};
use crate::ffor::{DeviceSeries, ScenarioFrame};
use crate::grid::{Bus, Line, Network};
use crate::identification::{format_timestamp, MeasurementRecord, WeatherRecord, STEP_MINUTES};

pub const TOY_DT: f64 = 0.25;
pub const TOY_HORIZON: usize = 8;

pub fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

/// Voltage band of the toy load buses. A 1 p.u. reactive injection across
/// a susceptance of 10 p.u. lifts the voltage by 0.1 p.u., so the band is
/// wide enough that only devices and line ratings shape the toy regions.
pub const TOY_VOLTAGE_BAND: (f64, f64) = (0.85, 1.15);

fn toy_bus(id: &str) -> Bus {
    Bus { u_min: TOY_VOLTAGE_BAND.0, u_max: TOY_VOLTAGE_BAND.1, ..Bus::load(id) }
}

/// Two buses joined by one lossless line: `pcc` (slack) and `n1`.
pub fn toy2() -> Network {
    toy2_with_line_limit(5.0)
}

pub fn toy2_with_line_limit(s_max: f64) -> Network {
    Network::new(
        1.0,
        20.0,
        vec![Bus::slack("pcc"), toy_bus("n1")],
        vec![Line::new("pcc", "n1", 0.0, -10.0, 0.0, s_max)],
    )
    .expect("toy network is valid")
}

/// 1 p.u. battery with 2 p.u.·h, SOC window [0.4, 0.8] starting at 0.6.
pub fn toy_bess(bus: &str) -> BessDevice {
    BessDevice {
        id: "bess".into(),
        bus: bus.into(),
        s_max: 1.0,
        capacity_c: 2.0,
        soc_init: 0.6,
        soc_min: 0.4,
        soc_max: 0.8,
        n_poly: DEFAULT_N_POLY,
    }
}

pub fn heat_pump(id: &str, bus: &str, p_rated: f64) -> ControllableLoad {
    ControllableLoad {
        id: id.into(),
        bus: bus.into(),
        p_rated,
        power_factor: 1.0,
        temp_init: 21.0,
        temp_min: 20.0,
        temp_max: 22.0,
        kind: LoadKind::HeatPump,
        base_consumption: 0.0,
    }
}

/// A frame with all-zero nonflexible injections.
pub fn zero_residual_frame(
    net: Network,
    fleet: Vec<Device>,
    series: Vec<DeviceSeries>,
    horizon: usize,
) -> ScenarioFrame {
    let n = net.n_buses();
    ScenarioFrame::new(net, fleet, series, vec![vec![(0.0, 0.0); horizon]; n], TOY_DT, horizon)
        .expect("constructed frame is valid")
}

/// TOY2 with one idle battery at `n1` and nothing else.
pub fn toy2f() -> ScenarioFrame {
    toy2f_with_line_limit(5.0)
}

pub fn toy2f_with_line_limit(s_max: f64) -> ScenarioFrame {
    zero_residual_frame(
        toy2_with_line_limit(s_max),
        vec![Device::Bess(toy_bess("n1"))],
        vec![DeviceSeries::constant(0.0, 0.0, TOY_HORIZON)],
        TOY_HORIZON,
    )
}

/// Lossy radial feeder `pcc – n1 – n2` with a battery at `n1` and PV at
/// `n2` producing 0.5 p.u.; the head line limits export.
pub fn three_bus_two_device() -> ScenarioFrame {
    let net = Network::new(
        1.0,
        20.0,
        vec![Bus::slack("pcc"), toy_bus("n1"), toy_bus("n2")],
        vec![Line::new("pcc", "n1", 2.0, -12.0, 0.0, 0.7), Line::new("n1", "n2", 1.0, -8.0, 0.0, 1.0)],
    )
    .expect("three-bus network is valid");
    let bess = BessDevice { s_max: 0.5, ..toy_bess("n1") };
    let pv = PvDevice { id: "pv".into(), bus: "n2".into(), p_capacity: 0.6, pf_min: 0.9 };
    zero_residual_frame(
        net,
        vec![Device::Bess(bess), Device::Pv(pv)],
        vec![DeviceSeries::constant(0.0, 0.0, 1), DeviceSeries::constant(0.5, 0.0, 1)],
        1,
    )
}

/// TOY2 with a single PV system at its maximum power point only.
pub fn pv_only() -> ScenarioFrame {
    let pv = PvDevice { id: "pv".into(), bus: "n1".into(), p_capacity: 1.0, pf_min: 0.9 };
    zero_residual_frame(toy2(), vec![Device::Pv(pv)], vec![DeviceSeries::constant(0.8, 0.0, TOY_HORIZON)], TOY_HORIZON)
}

/// TOY2 with a battery and a 0.5 p.u. heat pump at 0 °C outdoor temperature.
pub fn cold_heat_pump() -> ScenarioFrame {
    let fleet = vec![Device::Bess(toy_bess("n1")), Device::Load(heat_pump("hp", "n1", 0.5))];
    let weather = WeatherSeries::constant(epoch(), 15, TOY_HORIZON, 0.0, 0.0);
    build_frame_with_residual(
        &toy2(),
        &fleet,
        &weather,
        vec![vec![(0.0, 0.0); TOY_HORIZON]; 2],
        &HeatingDemandModel::default(),
        TOY_DT,
        TOY_HORIZON,
    )
    .expect("cold frame is valid")
    .0
}

/// Same frame with every heating demand set to zero.
pub fn without_heating_demand(frame: &ScenarioFrame) -> ScenarioFrame {
    let series = frame
        .device_series
        .iter()
        .map(|s| DeviceSeries { baseline: s.baseline.clone(), q_heat: vec![0.0; s.q_heat.len()] })
        .collect();
    ScenarioFrame::new(
        frame.net.clone(),
        frame.fleet.clone(),
        series,
        frame.bus_baseline.clone(),
        frame.dt,
        frame.horizon,
    )
    .expect("zeroing heating demand keeps the frame valid")
    .with_line_polygon(frame.n_poly_lines)
}

/// Head-line rating of feeder A in the two-feeder instance, p.u.
pub const TWO_FEEDER_LIMIT_A: f64 = 1.0;
/// Heat-pump capacity per unit multiplier on feeders A and B, p.u.
pub const TWO_FEEDER_HP: (f64, f64) = (1.0, 0.05);
pub const TWO_FEEDER_DURATION: usize = 8;

/// Two feeders below the PCC: feeder A (`a1`) behind a 1 p.u. head line,
/// feeder B (`b1`) behind an ample one with a battery. Heat pumps sit on
/// both; their capacities are the given values.
pub fn two_feeder_parts(c_a: f64, c_b: f64) -> (Network, Vec<Device>, WeatherSeries) {
    let net = Network::new(
        1.0,
        20.0,
        vec![Bus::slack("pcc"), toy_bus("a1"), toy_bus("b1")],
        vec![
            Line::new("pcc", "a1", 0.0, -10.0, 0.0, TWO_FEEDER_LIMIT_A),
            Line::new("pcc", "b1", 0.0, -10.0, 0.0, 10.0),
        ],
    )
    .expect("two-feeder network is valid");
    let bess = BessDevice { s_max: 0.5, ..toy_bess("b1") };
    let fleet = vec![
        Device::Bess(bess),
        Device::Load(heat_pump("hp_a", "a1", c_a)),
        Device::Load(heat_pump("hp_b", "b1", c_b)),
    ];
    let weather = WeatherSeries::constant(epoch(), 15, TWO_FEEDER_DURATION, 0.0, 0.0);
    (net, fleet, weather)
}

/// The two-feeder frame with heat-pump capacities scaled by `multiplier`.
pub fn two_feeder(multiplier: f64) -> ScenarioFrame {
    let (net, fleet, weather) = two_feeder_parts(TWO_FEEDER_HP.0 * multiplier, TWO_FEEDER_HP.1 * multiplier);
    build_frame_with_residual(
        &net,
        &fleet,
        &weather,
        vec![vec![(0.0, 0.0); TWO_FEEDER_DURATION]; 3],
        &HeatingDemandModel::default(),
        TOY_DT,
        TWO_FEEDER_DURATION,
    )
    .expect("two-feeder frame is valid")
    .0
}

/// Ground truth of one node of a synthetic metering dataset, MW.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNode {
    pub id: String,
    pub pv_mw: f64,
    pub hp_mw: f64,
    pub base_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationDataset {
    pub nodes: Vec<SyntheticNode>,
    pub measurements: Vec<MeasurementRecord>,
    pub weather: Vec<WeatherRecord>,
}

impl IdentificationDataset {
    pub fn total_pv_mw(&self) -> f64 {
        self.nodes.iter().map(|n| n.pv_mw).sum()
    }
}

/// Generates 15-minute metering for `days` days from known capacities.
///
/// Daily mean temperatures are drawn uniformly in [−6, 13] °C with ±1 °C
/// intra-day noise, so heat pumps stay on the linear part of their load
/// curve. Irradiance is a half-sine between 06:00 and 18:00 scaled by a
/// daily cloud factor. Every load component carries independent
/// multiplicative noise of at most `noise` (e.g. 0.02).
pub fn identification_dataset(nodes: &[SyntheticNode], days: usize, noise: f64, seed: u64) -> IdentificationDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heating = HeatingDemandModel::default();
    let steps_per_day = (24 * 60 / STEP_MINUTES) as usize;
    let mut weather = Vec::with_capacity(days * steps_per_day);
    let mut measurements = Vec::with_capacity(days * steps_per_day * nodes.len());
    for day in 0..days {
        let mean_temp: f64 = rng.gen_range(-6.0..13.0);
        let cloud = rng.gen_range(0.3..1.0);
        for s in 0..steps_per_day {
            let t = epoch() + TimeDelta::minutes(STEP_MINUTES * (day * steps_per_day + s) as i64);
            let hour = s as f64 * STEP_MINUTES as f64 / 60.0;
            let temp_c = (mean_temp + rng.gen_range(-1.0..1.0)).clamp(-7.0, 14.0);
            let irr_wm2 = if (6.0..=18.0).contains(&hour) {
                1000.0 * cloud * (PI * (hour - 6.0) / 12.0).sin().max(0.0)
            } else {
                0.0
            };
            let timestamp = format_timestamp(t);
            weather.push(WeatherRecord { timestamp: timestamp.clone(), temp_c, irr_wm2 });
            for n in nodes {
                let mut jitter = || 1.0 + rng.gen_range(-noise..=noise);
                let pv = n.pv_mw * (irr_wm2 / STC_IRRADIANCE).min(1.0) * jitter();
                let hp = n.hp_mw * heating.load_fraction(temp_c) * jitter();
                let base = n.base_mw * jitter();
                measurements.push(MeasurementRecord {
                    timestamp: timestamp.clone(),
                    node_id: n.id.clone(),
                    p_net_mw: base + hp - pv,
                });
            }
        }
    }
    IdentificationDataset { nodes: nodes.to_vec(), measurements, weather }
}

/// Four nodes with distinct PV/heat-pump mixes, including one with neither.
pub fn default_identification_nodes() -> Vec<SyntheticNode> {
    let node = |id: &str, pv_mw, hp_mw, base_mw| SyntheticNode { id: id.into(), pv_mw, hp_mw, base_mw };
    vec![node("n1", 2.0, 1.5, 3.0), node("n2", 0.5, 0.0, 1.2), node("n3", 0.0, 2.5, 2.0), node("n4", 1.0, 0.8, 0.9)]
}
