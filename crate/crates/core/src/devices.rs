//! Flexible device models: operating regions in the PQ plane and the
//! intertemporal battery and thermal states.
//!
//! Generator convention throughout: positive P/Q is injection into the grid,
//! consumption is negative injection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_N_POLY: usize = 12;
pub const DEFAULT_PV_PF_MIN: f64 = 0.9;
pub const DEFAULT_HP_POWER_FACTOR: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("device {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("available PV power {p_max} outside [0, {capacity}]")]
    PvAvailability { p_max: f64, capacity: f64 },
    #[error("no thermal flexibility available: baseline consumption is zero")]
    NoThermalFlexibility,
    #[error("fleet document does not match schema: {0}")]
    Schema(String),
}

fn invalid(id: &str, reason: impl Into<String>) -> DeviceError {
    DeviceError::Invalid { id: id.to_string(), reason: reason.into() }
}

/// One linear row `a_p·P + a_q·Q (≤ | =) rhs` of a region description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRow {
    pub a_p: f64,
    pub a_q: f64,
    pub rhs: f64,
    pub equality: bool,
}

/// Convex counterclockwise polygon in the PQ plane. One vertex is a point
/// and two vertices a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRegion {
    pub vertices: Vec<(f64, f64)>,
}

impl PolygonRegion {
    fn from_points(points: Vec<(f64, f64)>) -> Self {
        let mut vertices: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for p in points {
            if !vertices.iter().any(|v| (v.0 - p.0).abs() < 1e-15 && (v.1 - p.1).abs() < 1e-15) {
                vertices.push(p);
            }
        }
        PolygonRegion { vertices }
    }

    /// Linear rows whose solution set is exactly this polygon.
    pub fn halfspaces(&self) -> Vec<RegionRow> {
        let v = &self.vertices;
        match v.len() {
            0 => Vec::new(),
            1 => vec![
                RegionRow { a_p: 1.0, a_q: 0.0, rhs: v[0].0, equality: true },
                RegionRow { a_p: 0.0, a_q: 1.0, rhs: v[0].1, equality: true },
            ],
            2 => {
                let (a, b) = (v[0], v[1]);
                let d = (b.0 - a.0, b.1 - a.1);
                let len = d.0.hypot(d.1);
                let d = (d.0 / len, d.1 / len);
                let normal = (-d.1, d.0);
                vec![
                    RegionRow { a_p: normal.0, a_q: normal.1, rhs: normal.0 * a.0 + normal.1 * a.1, equality: true },
                    RegionRow { a_p: d.0, a_q: d.1, rhs: d.0 * b.0 + d.1 * b.1, equality: false },
                    RegionRow { a_p: -d.0, a_q: -d.1, rhs: -(d.0 * a.0 + d.1 * a.1), equality: false },
                ]
            }
            n => (0..n)
                .map(|j| {
                    let (a, b) = (v[j], v[(j + 1) % n]);
                    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                    let len = dx.hypot(dy);
                    let normal = (dy / len, -dx / len);
                    RegionRow { a_p: normal.0, a_q: normal.1, rhs: normal.0 * a.0 + normal.1 * a.1, equality: false }
                })
                .collect(),
        }
    }

    pub fn is_convex(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|j| {
            let (a, b, c) = (v[j], v[(j + 1) % n], v[(j + 2) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) >= -1e-12
        })
    }

    pub fn contains(&self, p: f64, q: f64, tol: f64) -> bool {
        self.halfspaces().iter().all(|r| {
            let lhs = r.a_p * p + r.a_q * q;
            if r.equality {
                (lhs - r.rhs).abs() <= tol
            } else {
                lhs <= r.rhs + tol
            }
        })
    }
}

/// Regular `n`-gon inscribed in the circle of `radius`, first vertex at angle 0.
pub fn regular_polygon(radius: f64, n: usize) -> PolygonRegion {
    let vertices = (0..n)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / n as f64;
            (radius * phi.cos(), radius * phi.sin())
        })
        .collect();
    PolygonRegion { vertices }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessDevice {
    pub id: String,
    pub bus: String,
    /// Apparent-power rating, p.u.
    pub s_max: f64,
    /// Energy capacity, p.u.·h.
    pub capacity_c: f64,
    pub soc_init: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub n_poly: usize,
}

impl BessDevice {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let ok_soc = 0.0 <= self.soc_min
            && self.soc_min <= self.soc_init
            && self.soc_init <= self.soc_max
            && self.soc_max <= 1.0;
        if !ok_soc {
            return Err(invalid(&self.id, "need 0 ≤ soc_min ≤ soc_init ≤ soc_max ≤ 1"));
        }
        if !(self.s_max > 0.0) {
            return Err(invalid(&self.id, "s_max must be positive"));
        }
        if !(self.capacity_c > 0.0) {
            return Err(invalid(&self.id, "capacity must be positive"));
        }
        if self.n_poly < 4 {
            return Err(invalid(&self.id, "n_poly must be at least 4"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvDevice {
    pub id: String,
    pub bus: String,
    /// Installed peak active power, p.u.
    pub p_capacity: f64,
    pub pf_min: f64,
}

impl PvDevice {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.p_capacity >= 0.0) {
            return Err(invalid(&self.id, "p_capacity must be non-negative"));
        }
        if !(self.pf_min > 0.0 && self.pf_min <= 1.0) {
            return Err(invalid(&self.id, "pf_min must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    HeatPump,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllableLoad {
    pub id: String,
    pub bus: String,
    /// Maximum active consumption, p.u.
    pub p_rated: f64,
    pub power_factor: f64,
    pub temp_init: f64,
    pub temp_min: f64,
    pub temp_max: f64,
    pub kind: LoadKind,
    /// Constant baseline consumption for `Other` loads, p.u. Heat pumps
    /// derive theirs from the weather.
    pub base_consumption: f64,
}

impl ControllableLoad {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.temp_min <= self.temp_init && self.temp_init <= self.temp_max) {
            return Err(invalid(&self.id, "need temp_min ≤ temp_init ≤ temp_max"));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(invalid(&self.id, "power_factor must lie in (0, 1]"));
        }
        if !(self.p_rated >= 0.0) {
            return Err(invalid(&self.id, "p_rated must be non-negative"));
        }
        if !(0.0..=self.p_rated).contains(&self.base_consumption) {
            return Err(invalid(&self.id, "base_consumption must lie in [0, p_rated]"));
        }
        Ok(())
    }

    /// Reactive-per-active ratio tan(arccos(cosφ)).
    pub fn q_per_p(&self) -> f64 {
        tan_arccos(self.power_factor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Device {
    Bess(BessDevice),
    Pv(PvDevice),
    Load(ControllableLoad),
}

impl Device {
    pub fn id(&self) -> &str {
        match self {
            Device::Bess(d) => &d.id,
            Device::Pv(d) => &d.id,
            Device::Load(d) => &d.id,
        }
    }

    pub fn bus(&self) -> &str {
        match self {
            Device::Bess(d) => &d.bus,
            Device::Pv(d) => &d.bus,
            Device::Load(d) => &d.bus,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        match self {
            Device::Bess(d) => d.validate(),
            Device::Pv(d) => d.validate(),
            Device::Load(d) => d.validate(),
        }
    }

    pub fn is_heat_pump(&self) -> bool {
        matches!(self, Device::Load(l) if l.kind == LoadKind::HeatPump)
    }
}

pub(crate) fn tan_arccos(pf: f64) -> f64 {
    (1.0 - pf * pf).max(0.0).sqrt() / pf
}

pub fn bess_region(dev: &BessDevice) -> PolygonRegion {
    regular_polygon(dev.s_max, dev.n_poly)
}

/// Lossless state-of-charge update; `p_t` is power delivered to the grid.
pub fn soc_step(soc_t: f64, p_t: f64, capacity_c: f64, dt: f64) -> f64 {
    soc_t - dt * p_t / capacity_c
}

pub fn pv_region(dev: &PvDevice, p_max_t: f64) -> Result<PolygonRegion, DeviceError> {
    if !(0.0..=dev.p_capacity).contains(&p_max_t) {
        return Err(DeviceError::PvAvailability { p_max: p_max_t, capacity: dev.p_capacity });
    }
    let q = p_max_t * tan_arccos(dev.pf_min);
    Ok(PolygonRegion::from_points(vec![(0.0, 0.0), (p_max_t, -q), (p_max_t, q)]))
}

pub fn load_region(dev: &ControllableLoad) -> PolygonRegion {
    PolygonRegion::from_points(vec![(0.0, 0.0), (-dev.p_rated, -dev.p_rated * dev.q_per_p())])
}

/// Room-temperature update of a controllable thermal load. `p_flex_t` is the
/// deviation in consumption from the baseline `p_base_t`.
pub fn temperature_step(temp_t: f64, p_flex_t: f64, p_base_t: f64, q_heat_t: f64, dt: f64) -> Result<f64, DeviceError> {
    if p_flex_t == 0.0 {
        return Ok(temp_t);
    }
    if p_base_t == 0.0 {
        return Err(DeviceError::NoThermalFlexibility);
    }
    Ok(temp_t + p_flex_t / p_base_t * q_heat_t * dt)
}

/// Fleet-file record in physical units (MW, MVA, MWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FleetRecord {
    Bess {
        #[serde(default)]
        id: Option<String>,
        bus: String,
        s_max_mva: f64,
        capacity_mwh: f64,
        soc_init: f64,
        soc_min: f64,
        soc_max: f64,
        #[serde(default = "default_n_poly")]
        n_poly: usize,
    },
    Pv {
        #[serde(default)]
        id: Option<String>,
        bus: String,
        p_capacity_mw: f64,
        #[serde(default = "default_pf_min")]
        pf_min: f64,
    },
    ControllableLoad {
        #[serde(default)]
        id: Option<String>,
        bus: String,
        kind: LoadKind,
        p_rated_mw: f64,
        #[serde(default = "default_hp_pf")]
        power_factor: f64,
        #[serde(default = "default_temp_init")]
        temp_init: f64,
        #[serde(default = "default_temp_min")]
        temp_min: f64,
        #[serde(default = "default_temp_max")]
        temp_max: f64,
        #[serde(default)]
        base_consumption_mw: f64,
    },
}

fn default_n_poly() -> usize {
    DEFAULT_N_POLY
}
fn default_pf_min() -> f64 {
    DEFAULT_PV_PF_MIN
}
fn default_hp_pf() -> f64 {
    DEFAULT_HP_POWER_FACTOR
}
fn default_temp_init() -> f64 {
    21.0
}
fn default_temp_min() -> f64 {
    20.0
}
fn default_temp_max() -> f64 {
    22.0
}

impl FleetRecord {
    pub fn into_device(self, index: usize, base_mva: f64) -> Result<Device, DeviceError> {
        let name = |id: Option<String>, tag: &str| id.unwrap_or_else(|| format!("{tag}{index}"));
        let dev = match self {
            FleetRecord::Bess { id, bus, s_max_mva, capacity_mwh, soc_init, soc_min, soc_max, n_poly } => {
                Device::Bess(BessDevice {
                    id: name(id, "bess"),
                    bus,
                    s_max: s_max_mva / base_mva,
                    capacity_c: capacity_mwh / base_mva,
                    soc_init,
                    soc_min,
                    soc_max,
                    n_poly,
                })
            }
            FleetRecord::Pv { id, bus, p_capacity_mw, pf_min } => {
                Device::Pv(PvDevice { id: name(id, "pv"), bus, p_capacity: p_capacity_mw / base_mva, pf_min })
            }
            FleetRecord::ControllableLoad {
                id,
                bus,
                kind,
                p_rated_mw,
                power_factor,
                temp_init,
                temp_min,
                temp_max,
                base_consumption_mw,
            } => Device::Load(ControllableLoad {
                id: name(id, if kind == LoadKind::HeatPump { "hp" } else { "load" }),
                bus,
                p_rated: p_rated_mw / base_mva,
                power_factor,
                temp_init,
                temp_min,
                temp_max,
                kind,
                base_consumption: base_consumption_mw / base_mva,
            }),
        };
        dev.validate()?;
        Ok(dev)
    }

    pub fn from_device(dev: &Device, base_mva: f64) -> Self {
        match dev.clone() {
            Device::Bess(d) => FleetRecord::Bess {
                id: Some(d.id),
                bus: d.bus,
                s_max_mva: d.s_max * base_mva,
                capacity_mwh: d.capacity_c * base_mva,
                soc_init: d.soc_init,
                soc_min: d.soc_min,
                soc_max: d.soc_max,
                n_poly: d.n_poly,
            },
            Device::Pv(d) => {
                FleetRecord::Pv { id: Some(d.id), bus: d.bus, p_capacity_mw: d.p_capacity * base_mva, pf_min: d.pf_min }
            }
            Device::Load(d) => FleetRecord::ControllableLoad {
                id: Some(d.id),
                bus: d.bus,
                kind: d.kind,
                p_rated_mw: d.p_rated * base_mva,
                power_factor: d.power_factor,
                temp_init: d.temp_init,
                temp_min: d.temp_min,
                temp_max: d.temp_max,
                base_consumption_mw: d.base_consumption * base_mva,
            },
        }
    }
}

/// Parses a fleet document (a JSON array of records) and converts to p.u.
pub fn load_fleet(source: &str, base_mva: f64) -> Result<Vec<Device>, DeviceError> {
    let records: Vec<FleetRecord> = serde_json::from_str(source).map_err(|e| DeviceError::Schema(e.to_string()))?;
    let devices =
        records.into_iter().enumerate().map(|(i, r)| r.into_device(i, base_mva)).collect::<Result<Vec<_>, _>>()?;
    let mut ids: Vec<&str> = devices.iter().map(|d| d.id()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(invalid(w[0], "duplicate device id"));
    }
    Ok(devices)
}

pub fn fleet_to_json(devices: &[Device], base_mva: f64) -> String {
    let records: Vec<FleetRecord> = devices.iter().map(|d| FleetRecord::from_device(d, base_mva)).collect();
    serde_json::to_string_pretty(&records).expect("fleet serializes")
}
