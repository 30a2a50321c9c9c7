//! Baseline operating schedules of devices and nonflexible loads, and the
//! assembly of a [`ScenarioFrame`] from weather and measured net load.
//!
//! PV follows its maximum power point at unity power factor, heat pumps
//! consume what keeps rooms at constant temperature, batteries idle, and
//! whatever remains of the measured net load is nonflexible.

use std::collections::BTreeMap;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{Device, LoadKind};
use crate::ffor::{add_network_block, BusInjections, DeviceSeries, FrameError, ScenarioFrame};
use crate::grid::Network;
use crate::lp::{self, LinearProgram, LpError, LpStatus};

/// Irradiance at which PV delivers its rated power, W/m².
pub const STC_IRRADIANCE: f64 = 1000.0;
/// Line or voltage overshoot of a baseline that triggers heat-pump capping, p.u.
pub const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("weather series: {0}")]
    Weather(String),
    #[error("heating model: {0}")]
    HeatingModel(String),
    #[error("{what} has {got} entries, expected {expected}")]
    Misaligned { what: String, expected: usize, got: usize },
    #[error("measurements reference unknown bus \"{0}\"")]
    UnknownBus(String),
    #[error("baseline at step {t} violates grid limits even with all heat pumps off")]
    Infeasible { t: usize },
    #[error("baseline capping at step {t}: {message}")]
    Solver { t: usize, message: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Ambient conditions on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub temp_c: Vec<f64>,
    pub irr_wm2: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, temp_c: Vec<f64>, irr_wm2: Vec<f64>) -> Result<Self, BaselineError> {
        let w = WeatherSeries { timestamps, temp_c, irr_wm2 };
        w.validate()?;
        Ok(w)
    }

    /// `n` steps of `step_minutes` starting at `start` with constant conditions.
    pub fn constant(start: NaiveDateTime, step_minutes: i64, n: usize, temp_c: f64, irr_wm2: f64) -> Self {
        WeatherSeries {
            timestamps: (0..n).map(|k| start + TimeDelta::minutes(step_minutes * k as i64)).collect(),
            temp_c: vec![temp_c; n],
            irr_wm2: vec![irr_wm2; n],
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let n = self.timestamps.len();
        for (what, len) in [("temperature", self.temp_c.len()), ("irradiance", self.irr_wm2.len())] {
            if len != n {
                return Err(BaselineError::Misaligned { what: what.into(), expected: n, got: len });
            }
        }
        if let Some(step) = self.step() {
            if step <= TimeDelta::zero() {
                return Err(BaselineError::Weather("timestamps must increase".into()));
            }
            if self.timestamps.windows(2).any(|w| w[1] - w[0] != step) {
                return Err(BaselineError::Weather("timestamps are not uniformly spaced".into()));
            }
        }
        if self.temp_c.iter().any(|t| !t.is_finite()) {
            return Err(BaselineError::Weather("non-finite temperature".into()));
        }
        if self.irr_wm2.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(BaselineError::Weather("irradiance must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> Option<TimeDelta> {
        (self.timestamps.len() >= 2).then(|| self.timestamps[1] - self.timestamps[0])
    }

    /// Sub-series of `len` steps starting at index `start`.
    pub fn slice(&self, start: usize, len: usize) -> WeatherSeries {
        let r = start..start + len;
        WeatherSeries {
            timestamps: self.timestamps[r.clone()].to_vec(),
            temp_c: self.temp_c[r.clone()].to_vec(),
            irr_wm2: self.irr_wm2[r].to_vec(),
        }
    }
}

/// Space-heating demand as a piecewise-linear function of outdoor temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingDemandModel {
    /// No heating at or above this temperature, °C.
    #[serde(default = "default_t_zero")]
    pub t_zero: f64,
    /// Full heating power at or below this temperature, °C.
    #[serde(default = "default_t_full")]
    pub t_full: f64,
    /// Heating demand at full power, °C/h.
    #[serde(default = "default_q_max")]
    pub q_max: f64,
}

fn default_t_zero() -> f64 {
    15.0
}
fn default_t_full() -> f64 {
    -8.0
}
fn default_q_max() -> f64 {
    1.0
}

impl Default for HeatingDemandModel {
    fn default() -> Self {
        HeatingDemandModel { t_zero: default_t_zero(), t_full: default_t_full(), q_max: default_q_max() }
    }
}

impl HeatingDemandModel {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.t_full < self.t_zero) {
            return Err(BaselineError::HeatingModel("need t_full < t_zero".into()));
        }
        if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            return Err(BaselineError::HeatingModel("q_max must be positive".into()));
        }
        Ok(())
    }

    /// Share of rated heating power needed at `temp_c`, in [0, 1].
    pub fn load_fraction(&self, temp_c: f64) -> f64 {
        ((self.t_zero - temp_c) / (self.t_zero - self.t_full)).clamp(0.0, 1.0)
    }
}

/// PV injection at the maximum power point, unity power factor.
pub fn pv_baseline(capacity: f64, weather: &WeatherSeries) -> Vec<(f64, f64)> {
    weather.irr_wm2.iter().map(|&g| (capacity * (g / STC_IRRADIANCE).min(1.0), 0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatPumpBaseline {
    /// Injection (negative when consuming).
    pub pq: Vec<(f64, f64)>,
    /// Heating demand, °C/h.
    pub q_heat: Vec<f64>,
}

pub fn hp_baseline(
    capacity: f64,
    model: &HeatingDemandModel,
    power_factor: f64,
    weather: &WeatherSeries,
) -> HeatPumpBaseline {
    let tan_phi = crate::devices::tan_arccos(power_factor);
    let fractions: Vec<f64> = weather.temp_c.iter().map(|&t| model.load_fraction(t)).collect();
    HeatPumpBaseline {
        pq: fractions
            .iter()
            .map(|f| {
                let p = -capacity * f;
                (p, p * tan_phi)
            })
            .collect(),
        q_heat: fractions.iter().map(|f| model.q_max * f).collect(),
    }
}

/// Nonflexible remainder of a measured net injection.
pub fn residual_load(measured_net: &[f64], pv_base: &[f64], hp_base: &[f64]) -> Result<Vec<f64>, BaselineError> {
    let n = measured_net.len();
    for (what, len) in [("PV baseline", pv_base.len()), ("heat-pump baseline", hp_base.len())] {
        if len != n {
            return Err(BaselineError::Misaligned { what: what.into(), expected: n, got: len });
        }
    }
    Ok(measured_net.iter().zip(pv_base).zip(hp_base).map(|((m, pv), hp)| m - hp - pv).collect())
}

/// Baseline of every fleet device, unmodified by grid limits.
pub fn device_baselines(fleet: &[Device], weather: &WeatherSeries, heating: &HeatingDemandModel) -> Vec<DeviceSeries> {
    let n = weather.len();
    fleet
        .iter()
        .map(|d| match d {
            Device::Bess(_) => DeviceSeries::constant(0.0, 0.0, n),
            Device::Pv(pv) => DeviceSeries { baseline: pv_baseline(pv.p_capacity, weather), q_heat: vec![0.0; n] },
            Device::Load(l) if l.kind == LoadKind::HeatPump => {
                let hp = hp_baseline(l.p_rated, heating, l.power_factor, weather);
                DeviceSeries { baseline: hp.pq, q_heat: hp.q_heat }
            }
            Device::Load(l) => {
                let p = -l.base_consumption;
                DeviceSeries::constant(p, p * l.q_per_p(), n)
            }
        })
        .collect()
}

/// Nonflexible injection per bus (p.u.) from measured net consumption in MW.
/// Buses without measurements carry no nonflexible load. Reactive residuals
/// are taken as zero because only active power is metered.
pub fn nonflexible_injections(
    net: &Network,
    fleet: &[Device],
    weather: &WeatherSeries,
    measured_mw: &BTreeMap<String, Vec<f64>>,
    heating: &HeatingDemandModel,
) -> Result<Vec<Vec<(f64, f64)>>, BaselineError> {
    let n = weather.len();
    let index = net.bus_index_map();
    let series = device_baselines(fleet, weather, heating);
    let mut pv = vec![vec![0.0; n]; net.n_buses()];
    let mut hp = vec![vec![0.0; n]; net.n_buses()];
    for (d, s) in fleet.iter().zip(&series) {
        let Some(&i) = index.get(d.bus()) else {
            return Err(BaselineError::UnknownBus(d.bus().to_string()));
        };
        let target = match d {
            Device::Pv(_) => &mut pv[i],
            Device::Load(_) => &mut hp[i],
            Device::Bess(_) => continue,
        };
        for (acc, (p, _)) in target.iter_mut().zip(&s.baseline) {
            *acc += p;
        }
    }
    let mut out = vec![vec![(0.0, 0.0); n]; net.n_buses()];
    for (bus, values) in measured_mw {
        let Some(&i) = index.get(bus) else {
            return Err(BaselineError::UnknownBus(bus.clone()));
        };
        if values.len() != n {
            return Err(BaselineError::Misaligned {
                what: format!("measurements of bus {bus}"),
                expected: n,
                got: values.len(),
            });
        }
        let injection: Vec<f64> = values.iter().map(|mw| -mw / net.base_mva).collect();
        let residual = residual_load(&injection, &pv[i], &hp[i])?;
        out[i] = residual.into_iter().map(|p| (p, 0.0)).collect();
    }
    Ok(out)
}

/// Scale applied to a heat pump's baseline at one step to respect grid limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCap {
    pub t: usize,
    pub device: String,
    pub scale: f64,
}

/// One row of the baseline audit: bus-level decomposition of the net injection (p.u.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: usize,
    pub bus: String,
    pub pv: f64,
    pub hp: f64,
    pub residual: f64,
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineAudit {
    pub caps: Vec<BaselineCap>,
    pub rows: Vec<AuditRow>,
}

impl BaselineAudit {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("audit rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }
}

/// Assembles a frame from device baselines and given nonflexible injections.
///
/// Where the raw heat-pump baseline would overload a line or violate a
/// voltage bound, the heat pumps' consumption at that step is scaled down
/// (and their heating demand with it) to the largest served total the grid
/// allows; the scaling factors are reported in the audit.
pub fn build_frame_with_residual(
    net: &Network,
    fleet: &[Device],
    weather: &WeatherSeries,
    nonflexible: Vec<Vec<(f64, f64)>>,
    heating: &HeatingDemandModel,
    dt: f64,
    horizon: usize,
) -> Result<(ScenarioFrame, BaselineAudit), BaselineError> {
    heating.validate()?;
    weather.validate()?;
    if weather.len() != horizon {
        return Err(BaselineError::Misaligned { what: "weather".into(), expected: horizon, got: weather.len() });
    }
    let mut series = device_baselines(fleet, weather, heating);
    let frame = ScenarioFrame::new(net.clone(), fleet.to_vec(), series.clone(), nonflexible.clone(), dt, horizon)?;
    let mut audit = BaselineAudit::default();
    let hps: Vec<usize> = (0..fleet.len()).filter(|&k| fleet[k].is_heat_pump()).collect();
    let mut capped = false;
    for t in 0..horizon {
        if frame.baseline_limit_violation(t)? <= LIMIT_SLACK || hps.is_empty() {
            continue;
        }
        let scales = cap_heat_pumps(&frame, &hps, t)?;
        for (&k, &s) in hps.iter().zip(&scales) {
            if s < 1.0 {
                let ser = &mut series[k];
                ser.baseline[t] = (ser.baseline[t].0 * s, ser.baseline[t].1 * s);
                ser.q_heat[t] *= s;
                audit.caps.push(BaselineCap { t, device: fleet[k].id().to_string(), scale: s });
                capped = true;
            }
        }
    }
    let frame =
        if capped { ScenarioFrame::new(net.clone(), fleet.to_vec(), series, nonflexible, dt, horizon)? } else { frame };
    audit.rows = audit_rows(&frame);
    Ok((frame, audit))
}

/// Builds a frame from measured net consumption (MW, consumption positive).
pub fn build_frame(
    net: &Network,
    fleet: &[Device],
    weather: &WeatherSeries,
    measured_mw: &BTreeMap<String, Vec<f64>>,
    heating: &HeatingDemandModel,
    dt: f64,
    horizon: usize,
) -> Result<(ScenarioFrame, BaselineAudit), BaselineError> {
    let nonflexible = nonflexible_injections(net, fleet, weather, measured_mw, heating)?;
    build_frame_with_residual(net, fleet, weather, nonflexible, heating, dt, horizon)
}

fn cap_heat_pumps(frame: &ScenarioFrame, hps: &[usize], t: usize) -> Result<Vec<f64>, BaselineError> {
    let n = frame.net.n_buses();
    let buses = frame.device_bus_indices();
    let mut lp = LinearProgram::new();
    let mut inj = BusInjections::zeros(n);
    for i in 0..n {
        inj.p_const[i] = frame.bus_baseline[i][t].0;
        inj.q_const[i] = frame.bus_baseline[i][t].1;
    }
    for (k, (&bus, s)) in buses.iter().zip(&frame.device_series).enumerate() {
        if !hps.contains(&k) {
            inj.p_const[bus] += s.baseline[t].0;
            inj.q_const[bus] += s.baseline[t].1;
        }
    }
    let mut objective = Vec::new();
    let scales: Vec<_> = hps
        .iter()
        .map(|&k| {
            let v = lp.add_var(format!("scale[{}]", frame.fleet[k].id()), 0.0, 1.0);
            let (p, q) = frame.device_series[k].baseline[t];
            inj.p_terms[buses[k]].push((v, p));
            inj.q_terms[buses[k]].push((v, q));
            objective.push((v, p));
            v
        })
        .collect();
    add_network_block(&mut lp, frame, t, &inj, (0.0, 0.0));
    lp.set_objective(objective);
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(scales.iter().map(|&v| sol.value(v).clamp(0.0, 1.0)).collect()),
        LpStatus::Infeasible => Err(BaselineError::Infeasible { t }),
        _ => Err(BaselineError::Solver { t, message: sol.message.unwrap_or_else(|| format!("{:?}", sol.status)) }),
    }
}

fn audit_rows(frame: &ScenarioFrame) -> Vec<AuditRow> {
    let buses = frame.device_bus_indices();
    let mut rows = Vec::with_capacity(frame.horizon * frame.net.n_buses());
    for t in 0..frame.horizon {
        for (i, bus) in frame.net.buses.iter().enumerate() {
            let (mut pv, mut hp) = (0.0, 0.0);
            let mut other = 0.0;
            for (k, d) in frame.fleet.iter().enumerate() {
                if buses[k] != i {
                    continue;
                }
                let p = frame.device_series[k].baseline[t].0;
                match d {
                    Device::Pv(_) => pv += p,
                    Device::Load(l) if l.kind == LoadKind::HeatPump => hp += p,
                    _ => other += p,
                }
            }
            let residual = frame.bus_baseline[i][t].0;
            rows.push(AuditRow { t, bus: bus.id.clone(), pv, hp, residual, net: residual + pv + hp + other });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{BessDevice, ControllableLoad, PvDevice};
    use crate::grid::{Bus, Line};
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn toy2() -> Network {
        Network::new(
            1.0,
            20.0,
            vec![Bus::slack("pcc"), Bus::load("n1")],
            vec![Line::new("pcc", "n1", 0.0, -10.0, 0.0, 5.0)],
        )
        .unwrap()
    }

    fn hp(id: &str, bus: &str, p_rated: f64) -> Device {
        Device::Load(ControllableLoad {
            id: id.into(),
            bus: bus.into(),
            p_rated,
            power_factor: 1.0,
            temp_init: 21.0,
            temp_min: 20.0,
            temp_max: 22.0,
            kind: LoadKind::HeatPump,
            base_consumption: 0.0,
        })
    }

    #[test]
    fn pv_baseline_examples() {
        let w = |g| WeatherSeries::constant(start(), 15, 3, 10.0, g);
        assert!(pv_baseline(0.0, &w(800.0)).iter().all(|&x| x == (0.0, 0.0)));
        assert!(pv_baseline(2.0, &w(1000.0)).iter().all(|&x| x == (2.0, 0.0)));
        assert!(pv_baseline(2.0, &w(500.0)).iter().all(|&x| x == (1.0, 0.0)));
        assert!(pv_baseline(2.0, &w(1300.0)).iter().all(|&x| x == (2.0, 0.0)));
    }

    #[test]
    fn hp_baseline_anchors() {
        let m = HeatingDemandModel::default();
        assert_eq!(m.load_fraction(15.0), 0.0);
        assert_eq!(m.load_fraction(-8.0), 1.0);
        assert_eq!(m.load_fraction(3.5), 0.5);
        assert_eq!(m.load_fraction(30.0), 0.0);
        assert_eq!(m.load_fraction(-20.0), 1.0);
        let w = WeatherSeries::new(
            (0..3).map(|k| start() + TimeDelta::minutes(15 * k)).collect(),
            vec![15.0, -8.0, 3.5],
            vec![0.0; 3],
        )
        .unwrap();
        let b = hp_baseline(2.0, &m, 1.0, &w);
        assert_eq!(b.pq, vec![(0.0, 0.0), (-2.0, 0.0), (-1.0, 0.0)]);
        assert_eq!(b.q_heat, vec![0.0, 1.0, 0.5]);
        let lagging = hp_baseline(1.0, &m, 0.8, &w);
        assert!((lagging.pq[1].1 - (-0.75)).abs() < 1e-12);
    }

    #[test]
    fn load_fraction_is_monotone() {
        let m = HeatingDemandModel::default();
        let mut prev = f64::INFINITY;
        for k in -300..300 {
            let f = m.load_fraction(k as f64 * 0.1);
            assert!(f <= prev);
            prev = f;
        }
    }

    #[test]
    fn heating_model_validation() {
        let bad = HeatingDemandModel { t_zero: -8.0, t_full: 15.0, q_max: 1.0 };
        assert!(bad.validate().is_err());
        let bad = HeatingDemandModel { q_max: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let parsed: HeatingDemandModel = serde_json::from_str(r#"{"q_max": 2.0}"#).unwrap();
        assert_eq!(parsed.t_zero, 15.0);
        assert_eq!(parsed.q_max, 2.0);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_load(&[1.0, -2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(residual_load(&[-3.0], &[0.5], &[-1.0]).unwrap(), vec![-2.5]);
        assert!(matches!(residual_load(&[1.0], &[0.0, 0.0], &[0.0]), Err(BaselineError::Misaligned { .. })));
        let m = [0.3, -1.7, 2.2];
        let pv = [0.1, 0.0, 0.9];
        let h = [-0.4, -0.2, 0.0];
        let r = residual_load(&m, &pv, &h).unwrap();
        for i in 0..3 {
            assert!((r[i] + h[i] + pv[i] - m[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn weather_validation() {
        let mut w = WeatherSeries::constant(start(), 15, 4, 5.0, 100.0);
        assert!(w.validate().is_ok());
        w.timestamps[2] += TimeDelta::minutes(1);
        assert!(matches!(w.validate(), Err(BaselineError::Weather(_))));
        let mut w = WeatherSeries::constant(start(), 15, 4, 5.0, 100.0);
        w.irr_wm2[0] = -1.0;
        assert!(w.validate().is_err());
        w.irr_wm2.pop();
        assert!(matches!(w.validate(), Err(BaselineError::Misaligned { .. })));
    }

    #[test]
    fn toy2f_frame_pcc_matches_nodal_sum() {
        let net = toy2();
        let fleet = vec![Device::Bess(BessDevice {
            id: "bess".into(),
            bus: "n1".into(),
            s_max: 1.0,
            capacity_c: 2.0,
            soc_init: 0.6,
            soc_min: 0.4,
            soc_max: 0.8,
            n_poly: 12,
        })];
        let w = WeatherSeries::constant(start(), 15, 4, 10.0, 0.0);
        let mut measured = BTreeMap::new();
        measured.insert("n1".to_string(), vec![0.3, 0.1, -0.2, 0.0]);
        let (frame, audit) = build_frame(&net, &fleet, &w, &measured, &HeatingDemandModel::default(), 0.25, 4).unwrap();
        for (pcc, mw) in frame.pcc_baseline.iter().zip(&measured["n1"]) {
            assert!((pcc.0 + mw).abs() <= 1e-6);
        }
        assert_eq!(frame.device_series[0].baseline, vec![(0.0, 0.0); 4]);
        assert!(audit.caps.is_empty());
        assert_eq!(audit.rows.len(), 8);
        assert!(audit.to_csv().starts_with("t,bus,pv,hp,residual,net\n"));
    }

    #[test]
    fn no_devices_pcc_is_propagated_residual() {
        let net = toy2();
        let w = WeatherSeries::constant(start(), 15, 2, 10.0, 0.0);
        let mut measured = BTreeMap::new();
        measured.insert("n1".to_string(), vec![0.5, 1.5]);
        let (frame, _) = build_frame(&net, &[], &w, &measured, &HeatingDemandModel::default(), 0.25, 2).unwrap();
        assert!((frame.pcc_baseline[0].0 + 0.5).abs() < 1e-9);
        assert!((frame.pcc_baseline[1].0 + 1.5).abs() < 1e-9);
    }

    #[test]
    fn residual_excludes_device_baselines() {
        let net = toy2();
        let fleet = vec![
            Device::Pv(PvDevice { id: "pv".into(), bus: "n1".into(), p_capacity: 1.0, pf_min: 0.9 }),
            hp("hp", "n1", 0.4),
        ];
        let w = WeatherSeries::constant(start(), 15, 1, 3.5, 500.0);
        let mut measured = BTreeMap::new();
        measured.insert("n1".to_string(), vec![2.0]);
        let nf = nonflexible_injections(&net, &fleet, &w, &measured, &HeatingDemandModel::default()).unwrap();
        // injection −2 = residual + pv 0.5 + hp −0.2
        assert!((nf[1][0].0 - (-2.3)).abs() < 1e-12);
        assert_eq!(nf[0][0], (0.0, 0.0));
    }

    #[test]
    fn wrong_length_measurements_rejected() {
        let net = toy2();
        let w = WeatherSeries::constant(start(), 15, 3, 10.0, 0.0);
        let mut measured = BTreeMap::new();
        measured.insert("n1".to_string(), vec![0.5]);
        let err = build_frame(&net, &[], &w, &measured, &HeatingDemandModel::default(), 0.25, 3).unwrap_err();
        assert!(matches!(err, BaselineError::Misaligned { .. }));
        measured.clear();
        measured.insert("zz".to_string(), vec![0.5; 3]);
        let err = build_frame(&net, &[], &w, &measured, &HeatingDemandModel::default(), 0.25, 3).unwrap_err();
        assert_eq!(err, BaselineError::UnknownBus("zz".into()));
    }

    #[test]
    fn overloaded_heat_pump_baseline_is_capped_at_the_line_limit() {
        let net = Network::new(
            1.0,
            20.0,
            vec![Bus::slack("pcc"), Bus::load("n1")],
            vec![Line::new("pcc", "n1", 0.0, -10.0, 0.0, 1.0)],
        )
        .unwrap();
        let fleet = vec![hp("hp", "n1", 3.0)];
        let w = WeatherSeries::constant(start(), 15, 2, -8.0, 0.0);
        let (frame, audit) = build_frame_with_residual(
            &net,
            &fleet,
            &w,
            vec![vec![(0.0, 0.0); 2]; 2],
            &HeatingDemandModel::default(),
            0.25,
            2,
        )
        .unwrap();
        assert_eq!(audit.caps.len(), 2);
        for t in 0..2 {
            assert!((frame.device_series[0].baseline[t].0 + 1.0).abs() < 1e-7);
            assert!((frame.device_series[0].q_heat[t] - 1.0 / 3.0).abs() < 1e-7);
            assert!(frame.baseline_limit_violation(t).unwrap() <= 1e-7);
        }
    }
}
