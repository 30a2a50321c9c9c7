//! Feasible flexibility operating region (FFOR) at the point of common coupling.
//!
//! Each vertex comes from one LP that pushes the PCC exchange deviation as
//! far as possible along a direction, subject to device regions, the
//! linearized network and its limits. The sweep starts from eight equally
//! spaced directions and keeps bisecting angular gaps whose exclusion wedge
//! (the triangle between two neighbouring vertices and the intersection of
//! their supporting lines) is non-empty. It stops once a refinement round
//! grows the area by less than the requested relative tolerance and the
//! remaining wedges, which bound the area still missing, are below it too.

mod assemble;
mod frame;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::DeviceError;
use crate::geometry::{self, Point};
use crate::lp::{self, LpError, LpStatus};

pub(crate) use assemble::{add_network_block, BusInjections};
pub use assemble::{assemble_multi, assemble_single, DirectionProgram};
pub use frame::{DeviceSeries, FrameError, ScenarioFrame, PCC_BASELINE_TOL};

pub const DEFAULT_TOL_REL_AREA: f64 = 1e-3;
pub const INITIAL_DIRECTIONS: usize = 8;
/// Upper bound on LPs per sweep; a sweep that hits it reports `converged = false`.
pub const MAX_DIRECTIONS: usize = 512;

const WEDGE_EPS: f64 = 1e-12;
const MIN_ANGLE_GAP: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum FforError {
    #[error("window starting at {t0} of {duration} steps does not fit horizon {horizon}")]
    Window { t0: usize, duration: usize, horizon: usize },
    #[error("direction (0, 0) is undefined")]
    ZeroDirection,
    #[error("relative area tolerance must be positive")]
    Tolerance,
    #[error("LP infeasible for direction ({alpha:.4}, {beta:.4}) at step {t0}: the baseline is inconsistent with device or grid limits")]
    Infeasible { alpha: f64, beta: f64, t0: usize },
    #[error("LP unbounded for direction ({alpha:.4}, {beta:.4}) at step {t0}: a device or line bound is missing")]
    Unbounded { alpha: f64, beta: f64, t0: usize },
    #[error("solver failure for direction ({alpha:.4}, {beta:.4}) at step {t0}: {message}")]
    Solver { alpha: f64, beta: f64, t0: usize, message: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Objective weights on (ΔP, ΔQ), normalized to unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub alpha: f64,
    pub beta: f64,
}

impl Direction {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, FforError> {
        let norm = alpha.hypot(beta);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FforError::ZeroDirection);
        }
        Ok(Direction { alpha: alpha / norm, beta: beta / norm })
    }

    /// The direction whose minimizer lies at polar angle `psi` of the region.
    pub fn outward(psi: f64) -> Self {
        Direction { alpha: -psi.cos(), beta: -psi.sin() }
    }

    /// Minimizes ΔP, i.e. the largest negative flexibility.
    pub fn min_p() -> Self {
        Direction { alpha: 1.0, beta: 0.0 }
    }

    /// Maximizes ΔP, i.e. the largest positive flexibility.
    pub fn max_p() -> Self {
        Direction { alpha: -1.0, beta: 0.0 }
    }
}

/// The swept region in the (ΔP, ΔQ) plane, with the metadata of its computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub timestep: usize,
    #[serde(rename = "duration_steps")]
    pub duration_d: usize,
    pub dt_hours: f64,
    pub vertices: Vec<Point>,
    pub area: f64,
    pub directions_solved: usize,
    pub converged: bool,
    /// Baseline (P, Q) export at the PCC at `timestep`; adding it recovers the absolute region.
    pub pcc_baseline: Point,
}

impl Polytope {
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        geometry::contains(&self.vertices, p, tol)
    }

    pub fn is_subset_of(&self, other: &Polytope, tol: f64) -> bool {
        self.vertices.iter().all(|&v| other.contains(v, tol))
    }

    pub fn is_convex(&self) -> bool {
        geometry::is_convex_ccw(&self.vertices)
    }

    pub fn max_dp(&self) -> f64 {
        self.vertices.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_dp(&self) -> f64 {
        self.vertices.iter().map(|v| v.0).fold(f64::INFINITY, f64::min)
    }

    /// Checks origin membership (1e-7) and convexity.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.contains((0.0, 0.0), 1e-7) {
            return Err(format!(
                "origin lies {:e} p.u. outside the polytope",
                geometry::outside_distance(&self.vertices, (0.0, 0.0))
            ));
        }
        if !self.is_convex() {
            return Err("polytope is not convex".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polytope serializes")
    }
}

pub fn polygon_area(poly: &Polytope) -> f64 {
    geometry::shoelace_area(&poly.vertices)
}

/// Solves one direction LP and returns the (ΔP, ΔQ) of its optimum.
pub fn solve_direction(program: &DirectionProgram, dir: Direction, t0: usize) -> Result<Point, FforError> {
    let sol = lp::solve(&program.lp)?;
    let (alpha, beta) = (dir.alpha, dir.beta);
    match sol.status {
        LpStatus::Optimal => Ok((sol.value(program.dp), sol.value(program.dq))),
        LpStatus::Infeasible => Err(FforError::Infeasible { alpha, beta, t0 }),
        LpStatus::Unbounded => Err(FforError::Unbounded { alpha, beta, t0 }),
        LpStatus::NumericalFailure => {
            Err(FforError::Solver { alpha, beta, t0, message: sol.message.unwrap_or_default() })
        }
    }
}

/// Extreme sustained deviation along one direction.
pub fn extreme_deviation(frame: &ScenarioFrame, t0: usize, d: usize, dir: Direction) -> Result<Point, FforError> {
    let program = assemble_multi(frame, t0, d, dir)?;
    solve_direction(&program, dir, t0)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    psi: f64,
    vertex: Point,
}

fn wedge_area(a: &Sample, b: &Sample, gap: f64) -> f64 {
    if gap >= PI - 1e-9 {
        return f64::INFINITY;
    }
    let (ua, ub) = ((a.psi.cos(), a.psi.sin()), (b.psi.cos(), b.psi.sin()));
    let ha = ua.0 * a.vertex.0 + ua.1 * a.vertex.1;
    let hb = ub.0 * b.vertex.0 + ub.1 * b.vertex.1;
    let det = ua.0 * ub.1 - ua.1 * ub.0;
    let x = ((ha * ub.1 - hb * ua.1) / det, (ua.0 * hb - ub.0 * ha) / det);
    let (va, vb) = (a.vertex, b.vertex);
    0.5 * ((va.0 - x.0) * (vb.1 - x.1) - (va.1 - x.1) * (vb.0 - x.0)).abs()
}

/// Area-tracking history of a sweep, one entry per completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub round_areas: Vec<f64>,
}

fn sweep_with<F>(
    build: F,
    t0: usize,
    d: usize,
    frame: &ScenarioFrame,
    tol_rel_area: f64,
) -> Result<(Polytope, SweepTrace), FforError>
where
    F: Fn(Direction) -> Result<DirectionProgram, FforError> + Sync,
{
    if !(tol_rel_area > 0.0) {
        return Err(FforError::Tolerance);
    }
    let solve = |psi: f64| -> Result<Sample, FforError> {
        let dir = Direction::outward(psi);
        let program = build(dir)?;
        Ok(Sample { psi, vertex: solve_direction(&program, dir, t0)? })
    };

    let initial: Vec<f64> = (0..INITIAL_DIRECTIONS).map(|k| 2.0 * PI * k as f64 / INITIAL_DIRECTIONS as f64).collect();
    let mut samples: Vec<Sample> = initial.par_iter().map(|&psi| solve(psi)).collect::<Result<_, _>>()?;
    let hull_area = |s: &[Sample]| {
        let pts: Vec<Point> = s.iter().map(|x| x.vertex).collect();
        geometry::shoelace_area(&geometry::convex_hull(&pts))
    };
    let mut area = hull_area(&samples);
    let mut trace = SweepTrace { round_areas: vec![area] };
    let mut converged = false;
    let mut last_gain = f64::INFINITY;

    loop {
        let m = samples.len();
        let mut gaps: Vec<(f64, f64)> = (0..m)
            .filter_map(|j| {
                let (a, b) = (&samples[j], &samples[(j + 1) % m]);
                let mut gap = b.psi - a.psi;
                if j + 1 == m {
                    gap += 2.0 * PI;
                }
                if gap < MIN_ANGLE_GAP {
                    return None;
                }
                let w = wedge_area(a, b, gap);
                (w > WEDGE_EPS).then_some((w, a.psi + 0.5 * gap))
            })
            .collect();
        // The wedges bound the area still missing, so a stalled round only
        // counts as convergence once they are small as well.
        let missing: f64 = gaps.iter().map(|g| g.0).sum();
        let small = |x: f64| if area > 0.0 { x / area < tol_rel_area } else { x <= 0.0 };
        if gaps.is_empty() || (small(last_gain) && small(missing)) || (area == 0.0 && last_gain == 0.0) {
            converged = true;
            break;
        }
        let budget = MAX_DIRECTIONS.saturating_sub(samples.len());
        if budget == 0 {
            break;
        }
        gaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
        gaps.truncate(budget);
        let fresh: Vec<Sample> =
            gaps.par_iter().map(|&(_, psi)| solve(psi.rem_euclid(2.0 * PI))).collect::<Result<_, _>>()?;
        samples.extend(fresh);
        samples.sort_by(|a, b| a.psi.total_cmp(&b.psi));
        let new_area = hull_area(&samples);
        trace.round_areas.push(new_area);
        last_gain = (new_area - area).max(0.0);
        area = new_area;
    }

    let pts: Vec<Point> = samples.iter().map(|s| s.vertex).collect();
    let vertices = geometry::convex_hull(&pts);
    let area = geometry::shoelace_area(&vertices);
    let poly = Polytope {
        timestep: t0,
        duration_d: d,
        dt_hours: frame.dt,
        vertices,
        area,
        directions_solved: samples.len(),
        converged,
        pcc_baseline: frame.pcc_baseline[t0],
    };
    Ok((poly, trace))
}

/// Single-timestep FFOR at step `t`.
pub fn sweep(frame: &ScenarioFrame, t: usize, tol_rel_area: f64) -> Result<Polytope, FforError> {
    sweep_traced(frame, t, tol_rel_area).map(|(p, _)| p)
}

pub fn sweep_traced(frame: &ScenarioFrame, t: usize, tol_rel_area: f64) -> Result<(Polytope, SweepTrace), FforError> {
    if t >= frame.horizon {
        return Err(FforError::Window { t0: t, duration: 1, horizon: frame.horizon });
    }
    sweep_with(|dir| assemble_single(frame, t, dir), t, 1, frame, tol_rel_area)
}

/// FFOR of deviations sustainable for `d` steps starting at `t0`.
pub fn sweep_multi(frame: &ScenarioFrame, t0: usize, d: usize, tol_rel_area: f64) -> Result<Polytope, FforError> {
    sweep_multi_traced(frame, t0, d, tol_rel_area).map(|(p, _)| p)
}

pub fn sweep_multi_traced(
    frame: &ScenarioFrame,
    t0: usize,
    d: usize,
    tol_rel_area: f64,
) -> Result<(Polytope, SweepTrace), FforError> {
    if d == 0 || t0 + d > frame.horizon {
        return Err(FforError::Window { t0, duration: d, horizon: frame.horizon });
    }
    sweep_with(|dir| assemble_multi(frame, t0, d, dir), t0, d, frame, tol_rel_area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::Device;
    use crate::synthetic::{self, heat_pump, toy2f, toy2f_with_line_limit, zero_residual_frame};

    fn extreme(frame: &ScenarioFrame, d: usize, dir: Direction) -> Point {
        extreme_deviation(frame, 0, d, dir).unwrap()
    }

    #[test]
    fn direction_normalizes() {
        let d = Direction::new(3.0, 4.0).unwrap();
        assert!((d.alpha - 0.6).abs() < 1e-15 && (d.beta - 0.8).abs() < 1e-15);
        assert_eq!(Direction::new(0.0, 0.0), Err(FforError::ZeroDirection));
        let o = Direction::outward(0.0);
        assert_eq!((o.alpha, o.beta), (-1.0, 0.0));
    }

    #[test]
    fn toy2f_single_extremes() {
        let f = toy2f();
        let (dp, _) =
            solve_direction(&assemble_single(&f, 0, Direction::max_p()).unwrap(), Direction::max_p(), 0).unwrap();
        assert!((dp - 1.0).abs() < 1e-7);
        let up = Direction::new(0.0, -1.0).unwrap();
        let (_, dq) = solve_direction(&assemble_single(&f, 0, up).unwrap(), up, 0).unwrap();
        assert!((dq - 1.0).abs() < 1e-7);
    }

    #[test]
    fn default_voltage_band_caps_reactive_support() {
        let mut net = synthetic::toy2();
        net.buses[1] = crate::grid::Bus::load("n1");
        let f = zero_residual_frame(
            net,
            vec![Device::Bess(synthetic::toy_bess("n1"))],
            vec![DeviceSeries::constant(0.0, 0.0, 1)],
            1,
        );
        let up = Direction::new(0.0, -1.0).unwrap();
        let (_, dq) = solve_direction(&assemble_single(&f, 0, up).unwrap(), up, 0).unwrap();
        assert!((dq - 0.5).abs() < 1e-7);
    }

    #[test]
    fn origin_objective_is_never_positive() {
        let f = synthetic::three_bus_two_device();
        for k in 0..16 {
            let dir = Direction::outward(k as f64 * PI / 8.0 + 0.1);
            let prog = assemble_single(&f, 0, dir).unwrap();
            let (p, q) = solve_direction(&prog, dir, 0).unwrap();
            assert!(dir.alpha * p + dir.beta * q <= 1e-9);
        }
    }

    #[test]
    fn toy2f_sweep_is_the_device_polygon() {
        let poly = sweep(&toy2f(), 0, DEFAULT_TOL_REL_AREA).unwrap();
        assert!((poly.area - 3.0).abs() / 3.0 < 0.01, "area {}", poly.area);
        assert!(poly.converged);
        poly.check_invariants().unwrap();
        assert_eq!(polygon_area(&poly), poly.area);
    }

    #[test]
    fn toy2f_line_limit_shrinks_region() {
        let poly = sweep(&toy2f_with_line_limit(0.5), 0, DEFAULT_TOL_REL_AREA).unwrap();
        assert!((poly.area - 0.75).abs() / 0.75 < 0.01, "area {}", poly.area);
        poly.check_invariants().unwrap();
    }

    #[test]
    fn no_devices_gives_origin() {
        let f = zero_residual_frame(synthetic::toy2(), vec![], vec![], 2);
        let poly = sweep(&f, 1, DEFAULT_TOL_REL_AREA).unwrap();
        assert_eq!(poly.vertices.len(), 1);
        assert!(poly.vertices[0].0.abs() < 1e-9 && poly.vertices[0].1.abs() < 1e-9);
        assert_eq!(poly.area, 0.0);
        assert!(poly.converged);
    }

    #[test]
    fn energy_budget_limits_sustained_deviation() {
        let f = toy2f();
        assert!((extreme(&f, 8, Direction::max_p()).0 - 0.2).abs() < 1e-6);
        assert!((extreme(&f, 4, Direction::max_p()).0 - 0.4).abs() < 1e-6);
        assert!((extreme(&f, 1, Direction::max_p()).0 - 1.0).abs() < 1e-6);
        assert!((extreme(&f, 8, Direction::min_p()).0 + 0.2).abs() < 1e-6);
    }

    #[test]
    fn durations_are_nested() {
        let f = toy2f();
        let polys: Vec<Polytope> =
            [1, 4, 8].iter().map(|&d| sweep_multi(&f, 0, d, DEFAULT_TOL_REL_AREA).unwrap()).collect();
        for w in polys.windows(2) {
            assert!(w[1].is_subset_of(&w[0], 1e-6));
            assert!(w[1].area < w[0].area);
        }
        for p in &polys {
            p.check_invariants().unwrap();
        }
        assert!((polys[2].max_dp() - 0.2).abs() < 1e-4);
    }

    #[test]
    fn unit_duration_matches_single_step() {
        let f = synthetic::three_bus_two_device();
        let a = sweep(&f, 0, DEFAULT_TOL_REL_AREA).unwrap();
        let b = sweep_multi(&f, 0, 1, DEFAULT_TOL_REL_AREA).unwrap();
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (x, y) in a.vertices.iter().zip(&b.vertices) {
            assert!((x.0 - y.0).abs() < 1e-7 && (x.1 - y.1).abs() < 1e-7);
        }
    }

    #[test]
    fn refinement_rounds_never_lose_area() {
        let (_, trace) = sweep_traced(&synthetic::three_bus_two_device(), 0, 1e-6).unwrap();
        assert!(trace.round_areas.len() > 1);
        for w in trace.round_areas.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn pv_only_cannot_increase_export() {
        let poly = sweep(&synthetic::pv_only(), 0, DEFAULT_TOL_REL_AREA).unwrap();
        assert!(poly.max_dp() <= 1e-7);
        assert!((poly.min_dp() + 0.8).abs() < 1e-7);
        poly.check_invariants().unwrap();
    }

    #[test]
    fn idle_heat_pumps_add_nothing() {
        let base = toy2f();
        let mut fleet = base.fleet.clone();
        fleet.push(Device::Load(heat_pump("hp", "n1", 0.7)));
        let mut series = base.device_series.clone();
        series.push(DeviceSeries::constant(0.0, 0.0, base.horizon));
        let with_hp = zero_residual_frame(base.net.clone(), fleet, series, base.horizon);
        for d in [1, 4] {
            let a = sweep_multi(&base, 0, d, DEFAULT_TOL_REL_AREA).unwrap();
            let b = sweep_multi(&with_hp, 0, d, DEFAULT_TOL_REL_AREA).unwrap();
            assert!(a.is_subset_of(&b, 1e-7) && b.is_subset_of(&a, 1e-7));
            assert!((a.area - b.area).abs() < 1e-7);
        }
    }

    #[test]
    fn windows_outside_horizon_are_rejected() {
        let f = toy2f();
        assert!(matches!(sweep(&f, 8, 1e-3), Err(FforError::Window { .. })));
        assert!(matches!(sweep_multi(&f, 4, 5, 1e-3), Err(FforError::Window { .. })));
        assert!(matches!(sweep_multi(&f, 0, 0, 1e-3), Err(FforError::Window { .. })));
        assert_eq!(sweep(&f, 0, 0.0), Err(FforError::Tolerance));
    }

    #[test]
    fn inconsistent_baseline_is_infeasible() {
        let net = synthetic::toy2_with_line_limit(0.5);
        let f = ScenarioFrame::new(
            net,
            vec![Device::Bess(synthetic::toy_bess("n1"))],
            vec![DeviceSeries::constant(0.0, 0.0, 1)],
            vec![vec![(0.0, 0.0)], vec![(-2.0, 0.0)]],
            0.25,
            1,
        )
        .unwrap();
        assert!(matches!(sweep(&f, 0, 1e-3), Err(FforError::Infeasible { .. })));
    }

    #[test]
    fn polytope_document_field_names() {
        let poly = sweep(&toy2f(), 0, 1e-2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&poly.to_json()).unwrap();
        for key in ["timestep", "duration_steps", "dt_hours", "vertices", "area", "directions_solved", "converged"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: Polytope = serde_json::from_value(v).unwrap();
        assert_eq!(back, poly);
    }
}
