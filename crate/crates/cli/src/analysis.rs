//! The batch analyses behind the CLI verbs. Each returns the documents it
//! produced as (file name, contents) pairs in a fixed order; writing them is
//! left to a single caller after all solves have joined.

use std::fmt::Write;

use chrono::{NaiveDate, NaiveTime};
use flexregion::ffor::{assemble_multi, extreme_deviation, sweep_multi};
use flexregion::identification::{format_timestamp, identify};
use flexregion::{Device, Direction, Polytope, ScenarioFrame};
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::inputs::{load_series, Scenario, STEP_HOURS};
use crate::svg::{line_plot, polytope_plot, Series};

/// Documents produced by one analysis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    /// One-line human summary per notable result.
    pub notes: Vec<String>,
}

impl Outputs {
    fn push(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// Serializes a polytope after re-checking origin membership and convexity.
pub fn polytope_document(poly: &Polytope) -> Result<String, CliError> {
    poly.check_invariants()
        .map_err(|e| CliError::Solver(format!("polytope at step {} (d = {}): {e}", poly.timestep, poly.duration_d)))?;
    Ok(poly.to_json() + "\n")
}

fn dump_program(frame: &ScenarioFrame, d: usize) -> Result<String, CliError> {
    Ok(assemble_multi(frame, 0, d, Direction::max_p())?.lp.to_lp_format())
}

/// Extreme sustained active-power deviations (max ΔP ≥ 0, min ΔP ≤ 0).
fn active_extremes(frame: &ScenarioFrame, d: usize) -> Result<(f64, f64), CliError> {
    let up = extreme_deviation(frame, 0, d, Direction::max_p())?;
    let down = extreme_deviation(frame, 0, d, Direction::min_p())?;
    Ok((up.0.max(0.0), down.0.min(0.0)))
}

fn base_frame(cfg: &ScenarioConfig, scenario: &Scenario, horizon: usize) -> Result<(ScenarioFrame, String), CliError> {
    let (weather, measured) = scenario.window_or_err(cfg.t0, horizon)?;
    let (frame, audit) = scenario.frame(cfg, &scenario.fleet, &scenario.fleet, &weather, &measured)?;
    Ok((frame, audit.to_csv()))
}

fn polygon_entry(label: String, poly: &Polytope) -> (String, Vec<(f64, f64)>) {
    (label, poly.vertices.clone())
}

/// FFOR of the single timestep `t0`.
pub fn run_single(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<(Outputs, Option<String>), CliError> {
    let (frame, audit) = base_frame(cfg, scenario, 1)?;
    let mut poly = sweep_multi(&frame, 0, 1, cfg.tol_rel_area)
        .map_err(|e| CliError::from(e).context(format!("step {}", cfg.t0)))?;
    poly.timestep = cfg.t0;
    let mut out = Outputs::default();
    out.push(format!("polytope_t{}.json", cfg.t0), polytope_document(&poly)?);
    out.push(
        format!("polytope_t{}.svg", cfg.t0),
        polytope_plot(&format!("FFOR at step {}", cfg.t0), &[polygon_entry("d = 1".into(), &poly)]),
    );
    out.push("baseline_audit.csv", audit);
    out.notes.push(format!(
        "step {}: area {:.6}, ΔP in [{:.6}, {:.6}], {} directions",
        cfg.t0,
        poly.area,
        poly.min_dp(),
        poly.max_dp(),
        poly.directions_solved
    ));
    Ok((out, Some(dump_program(&frame, 1)?)))
}

/// One polytope per sustained duration, all starting at `t0`.
pub fn run_durations(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<(Outputs, Option<String>), CliError> {
    let mut durations = cfg.durations.clone();
    durations.sort_unstable();
    durations.dedup();
    let horizon = *durations.last().ok_or_else(|| CliError::input("empty duration list"))?;
    let (frame, audit) = base_frame(cfg, scenario, horizon)?;
    let mut polys = Vec::with_capacity(durations.len());
    for &d in &durations {
        let mut poly = sweep_multi(&frame, 0, d, cfg.tol_rel_area)
            .map_err(|e| CliError::from(e).context(format!("duration {d}")))?;
        poly.timestep = cfg.t0;
        polys.push(poly);
    }
    let mut out = Outputs::default();
    let mut table = String::from("duration_steps,duration_hours,max_dp,min_dp,area,directions_solved,converged\n");
    for p in &polys {
        out.push(format!("polytope_d{}.json", p.duration_d), polytope_document(p)?);
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            p.duration_d,
            p.duration_d as f64 * frame.dt,
            p.max_dp(),
            p.min_dp(),
            p.area,
            p.directions_solved,
            p.converged
        )
        .unwrap();
        out.notes.push(format!("d = {}: ΔP in [{:.6}, {:.6}]", p.duration_d, p.min_dp(), p.max_dp()));
    }
    out.push("durations.csv", table);
    let entries: Vec<_> =
        polys.iter().map(|p| polygon_entry(format!("{} h", p.duration_d as f64 * frame.dt), p)).collect();
    out.push("durations.svg", polytope_plot(&format!("FFOR from step {} by sustained duration", cfg.t0), &entries));
    out.push("baseline_audit.csv", audit);
    Ok((out, Some(dump_program(&frame, horizon)?)))
}

#[derive(Debug, Clone, PartialEq)]
struct SeasonalRecord {
    date: NaiveDate,
    hour: u32,
    max_dp: f64,
    min_dp: f64,
}

/// Maximum sustained ±ΔP starting at fixed hours of every day in range.
pub fn run_seasonal(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<Outputs, CliError> {
    let ts = &scenario.series.timestamps;
    let (first, last) = match cfg.date_range {
        Some([a, b]) => (a, b),
        None => (ts[0].date(), ts[ts.len() - 1].date()),
    };
    let mut hours = cfg.start_hours.clone();
    hours.sort_unstable();
    hours.dedup();
    let starts: Vec<(NaiveDate, u32)> =
        first.iter_days().take_while(|d| *d <= last).flat_map(|d| hours.iter().map(move |&h| (d, h))).collect();
    let d = cfg.duration;
    let results: Vec<Result<Result<SeasonalRecord, String>, CliError>> = starts
        .par_iter()
        .map(|&(date, hour)| {
            let at = date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("validated hour"));
            let Some(k) = scenario.series.index_of(at) else {
                return Ok(Err("no data at start time".to_string()));
            };
            let (weather, measured) = match scenario.window(k, d) {
                Ok(w) => w,
                Err(g) => return Ok(Err(g.reason().to_string())),
            };
            let ctx = format!("start {}", format_timestamp(at));
            let (frame, _) = scenario
                .frame(cfg, &scenario.fleet, &scenario.fleet, &weather, &measured)
                .map_err(|e| e.context(&ctx))?;
            let (max_dp, min_dp) = active_extremes(&frame, d).map_err(|e| e.context(&ctx))?;
            Ok(Ok(SeasonalRecord { date, hour, max_dp, min_dp }))
        })
        .collect();
    let mut table = String::from("date,hour,max_positive_dp,max_negative_dp\n");
    let mut skipped = String::from("date,hour,reason\n");
    let mut records = Vec::new();
    for (&(date, hour), r) in starts.iter().zip(results) {
        match r? {
            Ok(rec) => {
                writeln!(table, "{},{},{},{}", rec.date, rec.hour, rec.max_dp, rec.min_dp).unwrap();
                records.push(rec);
            }
            Err(reason) => writeln!(skipped, "{date},{hour},{reason}").unwrap(),
        }
    }
    let mut out = Outputs::default();
    let n_skipped = starts.len() - records.len();
    out.notes.push(format!("{} start times evaluated, {} skipped", records.len(), n_skipped));
    let day = |r: &SeasonalRecord| (r.date - first).num_days() as f64 + r.hour as f64 / 24.0;
    let series = if records.is_empty() {
        Vec::new()
    } else {
        hours
            .iter()
            .flat_map(|&h| {
                let rows: Vec<&SeasonalRecord> = records.iter().filter(|r| r.hour == h).collect();
                [
                    Series {
                        label: format!("max +ΔP, {h:02}:00"),
                        points: rows.iter().map(|r| (day(r), r.max_dp)).collect(),
                    },
                    Series {
                        label: format!("max −ΔP, {h:02}:00"),
                        points: rows.iter().map(|r| (day(r), r.min_dp)).collect(),
                    },
                ]
            })
            .filter(|s| !s.points.is_empty())
            .collect()
    };
    out.push("seasonal.csv", table);
    out.push("seasonal_skipped.csv", skipped);
    out.push(
        "seasonal.svg",
        line_plot(
            &format!("Flexibility sustained for {} h", d as f64 * STEP_HOURS),
            &format!("days since {first}"),
            "ΔP [p.u.]",
            &series,
        ),
    );
    Ok(out)
}

/// Fleet with every heat pump's rating multiplied by `m`.
pub fn scale_heat_pumps(fleet: &[Device], m: f64) -> Vec<Device> {
    fleet
        .iter()
        .map(|d| match d {
            Device::Load(l) if d.is_heat_pump() => {
                let mut l = l.clone();
                l.p_rated *= m;
                l.base_consumption *= m;
                Device::Load(l)
            }
            other => other.clone(),
        })
        .collect()
}

/// Maximum sustained ±ΔP as heat-pump capacities are scaled up.
pub fn run_penetration(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<(Outputs, Option<String>), CliError> {
    let d = cfg.duration;
    let (weather, measured) = scenario.window_or_err(cfg.t0, d)?;
    type Extremes = (f64, f64, Option<String>);
    let results: Vec<Result<Extremes, CliError>> = cfg
        .multipliers
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let ctx = format!("multiplier {m}");
            let fleet = scale_heat_pumps(&scenario.fleet, m);
            let (frame, _) =
                scenario.frame(cfg, &fleet, &scenario.fleet, &weather, &measured).map_err(|e| e.context(&ctx))?;
            let (up, down) = active_extremes(&frame, d).map_err(|e| e.context(&ctx))?;
            let lp = if k == 0 { Some(dump_program(&frame, d)?) } else { None };
            Ok((up, down, lp))
        })
        .collect();
    let mut table = String::from("multiplier,max_positive_dp,max_negative_dp\n");
    let (mut ups, mut downs) = (Vec::new(), Vec::new());
    let mut dump = None;
    for (&m, r) in cfg.multipliers.iter().zip(results) {
        let (up, down, lp) = r?;
        dump = dump.or(lp);
        writeln!(table, "{m},{up},{down}").unwrap();
        ups.push((m, up));
        downs.push((m, down));
    }
    let mut out = Outputs::default();
    out.notes.push(format!("{} multipliers evaluated", ups.len()));
    let series = if ups.is_empty() {
        Vec::new()
    } else {
        vec![Series { label: "max +ΔP".into(), points: ups }, Series { label: "max −ΔP".into(), points: downs }]
    };
    out.push("penetration.csv", table);
    out.push(
        "penetration.svg",
        line_plot(
            &format!("Flexibility sustained for {} h by heat-pump multiplier", d as f64 * STEP_HOURS),
            "heat-pump capacity multiplier",
            "ΔP [p.u.]",
            &series,
        ),
    );
    Ok((out, dump))
}

/// PV and heat-pump capacity estimates from metering and weather data.
pub fn run_identify(cfg: &ScenarioConfig) -> Result<Outputs, CliError> {
    let series = load_series(cfg)?;
    let total = cfg.total_pv_capacity_mw.ok_or_else(|| CliError::input("identify needs total_pv_capacity_mw"))?;
    let doc =
        identify(&series, total, cfg.heating.t_full, cfg.heating.t_zero).map_err(|e| CliError::input(e.to_string()))?;
    let mut out = Outputs::default();
    for n in &doc.nodes {
        if !n.errors.is_empty() {
            out.notes.push(format!("node {}: {}", n.node_id, n.errors.join("; ")));
        }
    }
    out.notes.push(format!("{} nodes identified", doc.nodes.len()));
    out.push("estimates.json", doc.to_json() + "\n");
    Ok(out)
}
