//! Node-wise identification of installed PV and heat-pump capacity from
//! metered net active power and weather.
//!
//! PV shows up as a negative linear dependence of daytime net consumption
//! on irradiance; heat pumps as a rising night-time consumption with falling
//! temperature. A quadratic fitted to temperature-binned night averages is
//! evaluated at the full-power and zero-power temperatures to size the
//! heat-pump fleet of a node.

use std::collections::BTreeMap;

use chrono::{NaiveDateTime, TimeDelta};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

use crate::baseline::WeatherSeries;

pub const STEP_MINUTES: i64 = 15;
pub const DAYLIGHT_IRRADIANCE: f64 = 20.0;
pub const NIGHT_IRRADIANCE: f64 = 1.0;
pub const MIN_SAMPLES: usize = 100;
pub const MIN_TEMPERATURE_RANGE: f64 = 10.0;
pub const SIGNIFICANCE_P: f64 = 0.01;
pub const SIGNIFICANCE_R2: f64 = 0.1;
pub const HP_FULL_POWER_TEMP: f64 = -8.0;
pub const HP_ZERO_POWER_TEMP: f64 = 15.0;

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
pub const TIMESTAMP_OUTPUT_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error, PartialEq)]
pub enum IdentError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("unparseable timestamp \"{0}\"")]
    Timestamp(String),
    #[error("timestamp {0} is off the {STEP_MINUTES}-minute grid")]
    OffGrid(String),
    #[error("duplicate {what} entry at {timestamp}")]
    Duplicate { what: String, timestamp: String },
    #[error("no weather records")]
    EmptyWeather,
    #[error("unknown node \"{0}\"")]
    UnknownNode(String),
    #[error("insufficient samples: {got} usable, need {needed}")]
    InsufficientSamples { got: usize, needed: usize },
    #[error("zero variance of irradiance over daylight samples")]
    ZeroVariance,
    #[error("temperature range of {range:.2} °C is below {MIN_TEMPERATURE_RANGE} °C")]
    TemperatureRange { range: f64 },
    #[error("total PV capacity must be non-negative")]
    NegativeTotal,
    #[error("total PV capacity {0} MW cannot be allocated: no node has a significant negative slope")]
    NoSignificantSlopes(f64),
}

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime, IdentError> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| IdentError::Timestamp(s.to_string()))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_OUTPUT_FORMAT).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub timestamp: String,
    pub node_id: String,
    pub p_net_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: String,
    pub temp_c: f64,
    pub irr_wm2: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(source: &str) -> Result<Vec<T>, IdentError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| IdentError::Csv(e.to_string()))
}

fn write_csv<T: Serialize>(records: &[T], header: &str) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("records serialize");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv");
    format!("{header}\n{body}")
}

/// Parses `timestamp,node_id,p_net_mw` rows.
pub fn read_measurements_csv(source: &str) -> Result<Vec<MeasurementRecord>, IdentError> {
    read_csv(source)
}

/// Parses `timestamp,temp_c,irr_wm2` rows.
pub fn read_weather_csv(source: &str) -> Result<Vec<WeatherRecord>, IdentError> {
    read_csv(source)
}

pub fn measurements_to_csv(records: &[MeasurementRecord]) -> String {
    write_csv(records, "timestamp,node_id,p_net_mw")
}

pub fn weather_to_csv(records: &[WeatherRecord]) -> String {
    write_csv(records, "timestamp,temp_c,irr_wm2")
}

/// Metered data on a uniform 15-minute grid. Missing entries stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub timestamps: Vec<NaiveDateTime>,
    /// Net active power per node, MW, consumption positive.
    pub nodes: BTreeMap<String, Vec<Option<f64>>>,
    pub temp_c: Vec<Option<f64>>,
    pub irr_wm2: Vec<Option<f64>>,
}

impl MeasurementSeries {
    /// Places the records on the grid spanned by the weather timestamps.
    pub fn from_records(measurements: &[MeasurementRecord], weather: &[WeatherRecord]) -> Result<Self, IdentError> {
        let step = TimeDelta::minutes(STEP_MINUTES);
        let weather_ts: Vec<NaiveDateTime> =
            weather.iter().map(|w| parse_timestamp(&w.timestamp)).collect::<Result<_, _>>()?;
        let (Some(&start), Some(&end)) = (weather_ts.iter().min(), weather_ts.iter().max()) else {
            return Err(IdentError::EmptyWeather);
        };
        let index = |t: NaiveDateTime| -> Result<usize, IdentError> {
            let offset = t - start;
            if offset < TimeDelta::zero() || offset.num_seconds() % step.num_seconds() != 0 || t > end {
                return Err(IdentError::OffGrid(format_timestamp(t)));
            }
            Ok((offset.num_seconds() / step.num_seconds()) as usize)
        };
        let n = index(end)? + 1;
        let timestamps: Vec<NaiveDateTime> = (0..n).map(|k| start + step * k as i32).collect();
        let mut temp_c = vec![None; n];
        let mut irr_wm2 = vec![None; n];
        for (w, &t) in weather.iter().zip(&weather_ts) {
            let k = index(t)?;
            if temp_c[k].is_some() {
                return Err(IdentError::Duplicate { what: "weather".into(), timestamp: format_timestamp(t) });
            }
            temp_c[k] = w.temp_c.is_finite().then_some(w.temp_c);
            irr_wm2[k] = (w.irr_wm2.is_finite() && w.irr_wm2 >= 0.0).then_some(w.irr_wm2);
        }
        let mut nodes: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for m in measurements {
            let t = parse_timestamp(&m.timestamp)?;
            let k = index(t)?;
            let slot = &mut nodes.entry(m.node_id.clone()).or_insert_with(|| vec![None; n])[k];
            if slot.is_some() {
                return Err(IdentError::Duplicate {
                    what: format!("node {}", m.node_id),
                    timestamp: format_timestamp(t),
                });
            }
            *slot = m.p_net_mw.is_finite().then_some(m.p_net_mw);
        }
        Ok(MeasurementSeries { timestamps, nodes, temp_c, irr_wm2 })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    /// Gap-free weather over `[start, start + len)`, if available.
    pub fn weather_window(&self, start: usize, len: usize) -> Option<WeatherSeries> {
        let r = start..start.checked_add(len)?;
        if r.end > self.len() {
            return None;
        }
        let temp: Option<Vec<f64>> = self.temp_c[r.clone()].iter().copied().collect();
        let irr: Option<Vec<f64>> = self.irr_wm2[r.clone()].iter().copied().collect();
        Some(WeatherSeries { timestamps: self.timestamps[r].to_vec(), temp_c: temp?, irr_wm2: irr? })
    }

    /// Gap-free node measurements over `[start, start + len)`, if available.
    pub fn node_window(&self, start: usize, len: usize) -> Option<BTreeMap<String, Vec<f64>>> {
        let end = start.checked_add(len)?;
        if end > self.len() {
            return None;
        }
        self.nodes
            .iter()
            .map(|(id, v)| v[start..end].iter().copied().collect::<Option<Vec<f64>>>().map(|v| (id.clone(), v)))
            .collect()
    }

    fn node(&self, node: &str) -> Result<&[Option<f64>], IdentError> {
        self.nodes.get(node).map(|v| v.as_slice()).ok_or_else(|| IdentError::UnknownNode(node.to_string()))
    }
}

/// Goodness-of-fit summary of a least-squares regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_samples: usize,
    pub r_squared: f64,
    pub f_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

impl FitDiagnostics {
    fn from_sums(n: usize, n_params: usize, ss_res: f64, ss_tot: f64) -> Self {
        let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 0.0 };
        let df1 = (n_params - 1) as f64;
        let df2 = n.saturating_sub(n_params) as f64;
        let (f_statistic, p_value) = if ss_tot <= 0.0 || df2 <= 0.0 {
            (0.0, 1.0)
        } else if ss_res <= ss_tot * 1e-15 {
            (f64::INFINITY, 0.0)
        } else {
            let f = ((ss_tot - ss_res) / df1) / (ss_res / df2);
            let p = FisherSnedecor::new(df1, df2).map(|d| d.sf(f.max(0.0))).unwrap_or(1.0);
            (f, p)
        };
        FitDiagnostics {
            n_samples: n,
            r_squared,
            f_statistic,
            p_value,
            significant: p_value < SIGNIFICANCE_P && r_squared > SIGNIFICANCE_R2,
        }
    }

    // serde_json cannot encode infinity; such fits are exact.
    fn finite(mut self) -> Self {
        if !self.f_statistic.is_finite() {
            self.f_statistic = f64::MAX;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvFit {
    /// Reported slope, MW per W/m²; zero when insignificant.
    pub slope: f64,
    pub raw_slope: f64,
    pub intercept: f64,
    pub diagnostics: FitDiagnostics,
}

/// OLS of daytime net consumption on irradiance.
pub fn fit_pv_slope(series: &MeasurementSeries, node: &str) -> Result<PvFit, IdentError> {
    let values = series.node(node)?;
    let (x, y): (Vec<f64>, Vec<f64>) = values
        .iter()
        .zip(&series.irr_wm2)
        .filter_map(|(p, g)| match (p, g) {
            (Some(p), Some(g)) if *g > DAYLIGHT_IRRADIANCE => Some((*g, *p)),
            _ => None,
        })
        .unzip();
    let n = x.len();
    if n < MIN_SAMPLES {
        return Err(IdentError::InsufficientSamples { got: n, needed: MIN_SAMPLES });
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mean_x).powi(2)).sum();
    if sxx <= f64::EPSILON * mean_x.abs().max(1.0) * n as f64 {
        return Err(IdentError::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mean_x) * (b - mean_y)).sum();
    let raw_slope = sxy / sxx;
    let intercept = mean_y - raw_slope * mean_x;
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - raw_slope * a).powi(2)).sum();
    let diagnostics = FitDiagnostics::from_sums(n, 2, ss_res, ss_tot).finite();
    Ok(PvFit { slope: if diagnostics.significant { raw_slope } else { 0.0 }, raw_slope, intercept, diagnostics })
}

/// Splits a known total PV capacity across nodes in proportion to the
/// magnitude of their significant negative slopes.
pub fn allocate_pv_capacity(
    slopes: &BTreeMap<String, f64>,
    total_capacity: f64,
) -> Result<BTreeMap<String, f64>, IdentError> {
    if !(total_capacity >= 0.0) {
        return Err(IdentError::NegativeTotal);
    }
    let mut out: BTreeMap<String, f64> = slopes.keys().map(|k| (k.clone(), 0.0)).collect();
    if total_capacity == 0.0 {
        return Ok(out);
    }
    let eligible: Vec<(&String, f64)> =
        slopes.iter().filter(|(_, &s)| s < 0.0 && s.is_finite()).map(|(k, &s)| (k, -s)).collect();
    if eligible.is_empty() {
        return Err(IdentError::NoSignificantSlopes(total_capacity));
    }
    let sum: f64 = eligible.iter().map(|(_, s)| s).sum();
    let mut assigned = 0.0;
    for (j, (k, s)) in eligible.iter().enumerate() {
        let share = if j + 1 == eligible.len() { total_capacity - assigned } else { total_capacity * s / sum };
        assigned += share;
        out.insert((*k).clone(), share);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpFit {
    /// `p(T) = a + b·T + c·T²`, MW.
    pub coeffs: [f64; 3],
    pub diagnostics: FitDiagnostics,
    /// Temperature bins used: (mean temperature, mean net power, samples).
    pub bins: Vec<(f64, f64, usize)>,
}

impl HpFit {
    pub fn eval(&self, temp_c: f64) -> f64 {
        poly_eval(&self.coeffs, temp_c)
    }
}

fn poly_eval(c: &[f64; 3], t: f64) -> f64 {
    c[0] + c[1] * t + c[2] * t * t
}

/// Quadratic least squares on 1 °C-binned night-time averages.
pub fn fit_hp_polynomial(series: &MeasurementSeries, node: &str) -> Result<HpFit, IdentError> {
    let values = series.node(node)?;
    let samples: Vec<(f64, f64)> = values
        .iter()
        .zip(series.temp_c.iter().zip(&series.irr_wm2))
        .filter_map(|(p, (t, g))| match (p, t, g) {
            (Some(p), Some(t), Some(g)) if *g <= NIGHT_IRRADIANCE => Some((*t, *p)),
            _ => None,
        })
        .collect();
    if samples.len() < MIN_SAMPLES {
        return Err(IdentError::InsufficientSamples { got: samples.len(), needed: MIN_SAMPLES });
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)));
    if hi - lo < MIN_TEMPERATURE_RANGE {
        return Err(IdentError::TemperatureRange { range: hi - lo });
    }
    let mut acc: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for &(t, p) in &samples {
        let e = acc.entry(t.floor() as i64).or_insert((0.0, 0.0, 0));
        e.0 += t;
        e.1 += p;
        e.2 += 1;
    }
    let bins: Vec<(f64, f64, usize)> = acc.values().map(|&(st, sp, k)| (st / k as f64, sp / k as f64, k)).collect();
    let m = bins.len();
    let design = DMatrix::from_fn(m, 3, |i, j| bins[i].0.powi(j as i32));
    let rhs = DVector::from_iterator(m, bins.iter().map(|b| b.1));
    let svd = design.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).expect("SVD with both factors");
    let coeffs = [sol[0], sol[1], sol[2]];
    let mean = rhs.mean();
    let ss_tot: f64 = rhs.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = (&design * &sol - &rhs).iter().map(|r| r * r).sum();
    let scale = rhs.iter().map(|v| v * v).sum::<f64>();
    // treat residuals at rounding level as exact
    let ss_res = if ss_res <= 1e-24 * scale.max(1.0) { 0.0 } else { ss_res };
    Ok(HpFit { coeffs, diagnostics: FitDiagnostics::from_sums(m, 3, ss_res, ss_tot).finite(), bins })
}

/// Heat-pump capacity implied by the fit: the net-power difference between
/// full heating at −8 °C and no heating at 15 °C.
pub fn hp_capacity_from_fit(coeffs: &[f64; 3]) -> f64 {
    hp_capacity_between(coeffs, HP_FULL_POWER_TEMP, HP_ZERO_POWER_TEMP)
}

pub fn hp_capacity_between(coeffs: &[f64; 3], t_full: f64, t_zero: f64) -> f64 {
    (poly_eval(coeffs, t_full) - poly_eval(coeffs, t_zero)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCapacityEstimate {
    pub node_id: String,
    pub pv_capacity_mw: f64,
    pub hp_capacity_mw: f64,
    pub pv_slope: f64,
    pub pv_fit: Option<FitDiagnostics>,
    pub hp_coeffs: Option<[f64; 3]>,
    pub hp_fit: Option<FitDiagnostics>,
    /// Fit failures of this node; other nodes are unaffected.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesDocument {
    pub total_pv_capacity_mw: f64,
    pub hp_full_power_temp_c: f64,
    pub hp_zero_power_temp_c: f64,
    pub nodes: Vec<NodeCapacityEstimate>,
}

impl EstimatesDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimates serialize")
    }
}

/// Runs both fits for every node and allocates the PV total.
/// Insignificant heat-pump fits size the node at zero.
pub fn identify(
    series: &MeasurementSeries,
    total_pv_capacity_mw: f64,
    t_full: f64,
    t_zero: f64,
) -> Result<EstimatesDocument, IdentError> {
    let ids: Vec<&String> = series.nodes.keys().collect();
    let fits: Vec<(Result<PvFit, IdentError>, Result<HpFit, IdentError>)> =
        ids.par_iter().map(|id| (fit_pv_slope(series, id), fit_hp_polynomial(series, id))).collect();
    let slopes: BTreeMap<String, f64> = ids
        .iter()
        .zip(&fits)
        .map(|(id, (pv, _))| ((*id).clone(), pv.as_ref().map(|f| f.slope).unwrap_or(0.0)))
        .collect();
    let allocation = allocate_pv_capacity(&slopes, total_pv_capacity_mw)?;
    let nodes = ids
        .iter()
        .zip(fits)
        .map(|(id, (pv, hp))| {
            let mut errors = Vec::new();
            let pv_fit = pv.map_err(|e| errors.push(format!("pv fit: {e}"))).ok();
            let hp_fit = hp.map_err(|e| errors.push(format!("heat-pump fit: {e}"))).ok();
            let hp_capacity_mw = hp_fit
                .as_ref()
                .filter(|f| f.diagnostics.significant)
                .map(|f| hp_capacity_between(&f.coeffs, t_full, t_zero))
                .unwrap_or(0.0);
            NodeCapacityEstimate {
                node_id: (*id).clone(),
                pv_capacity_mw: allocation[*id],
                hp_capacity_mw,
                pv_slope: pv_fit.map(|f| f.slope).unwrap_or(0.0),
                pv_fit: pv_fit.map(|f| f.diagnostics),
                hp_coeffs: hp_fit.as_ref().map(|f| f.coeffs),
                hp_fit: hp_fit.map(|f| f.diagnostics),
                errors,
            }
        })
        .collect();
    Ok(EstimatesDocument { total_pv_capacity_mw, hp_full_power_temp_c: t_full, hp_zero_power_temp_c: t_zero, nodes })
}
