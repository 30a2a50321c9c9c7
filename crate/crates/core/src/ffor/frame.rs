use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{Device, DeviceError, DEFAULT_N_POLY};
use crate::grid::Network;
use crate::powerflow::{LinearModel, PowerFlowError};

/// Residual allowed between the stored PCC baseline and the linear model.
pub const PCC_BASELINE_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("device {device} is attached to unknown bus \"{bus}\"")]
    UnknownBus { device: String, bus: String },
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch { what: String, expected: usize, got: usize },
    #[error("timestep duration must be positive")]
    NonPositiveDt,
    #[error("line polygon needs at least 4 vertices")]
    LinePolygon,
    #[error("device {device} at step {t}: {reason}")]
    InconsistentBaseline { device: String, t: usize, reason: String },
    #[error("PCC baseline at step {t} deviates from the linear model by {residual:e} p.u.")]
    PccBaseline { t: usize, residual: f64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Per-device baseline injection and, for heat pumps, heating demand (°C/h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSeries {
    pub baseline: Vec<(f64, f64)>,
    pub q_heat: Vec<f64>,
}

impl DeviceSeries {
    pub fn constant(p: f64, q: f64, horizon: usize) -> Self {
        DeviceSeries { baseline: vec![(p, q); horizon], q_heat: vec![0.0; horizon] }
    }
}

/// Everything one flexibility computation needs: network, devices and their
/// baselines over a horizon, and the resulting PCC exchange.
#[derive(Debug, Clone)]
pub struct ScenarioFrame {
    pub net: Network,
    pub fleet: Vec<Device>,
    pub device_series: Vec<DeviceSeries>,
    /// Nonflexible injection per bus per step.
    pub bus_baseline: Vec<Vec<(f64, f64)>>,
    /// Baseline export to the upstream grid per step.
    pub pcc_baseline: Vec<(f64, f64)>,
    pub dt: f64,
    pub horizon: usize,
    pub n_poly_lines: usize,
    pub(crate) model: LinearModel,
}

impl ScenarioFrame {
    /// Builds a frame and derives the PCC baseline through the linear model.
    pub fn new(
        net: Network,
        fleet: Vec<Device>,
        device_series: Vec<DeviceSeries>,
        bus_baseline: Vec<Vec<(f64, f64)>>,
        dt: f64,
        horizon: usize,
    ) -> Result<Self, FrameError> {
        let model = LinearModel::new(&net);
        let mut frame = ScenarioFrame {
            net,
            fleet,
            device_series,
            bus_baseline,
            pcc_baseline: Vec::new(),
            dt,
            horizon,
            n_poly_lines: DEFAULT_N_POLY,
            model,
        };
        frame.check_shapes()?;
        frame.pcc_baseline = (0..horizon).map(|t| frame.model_pcc_exchange(t)).collect::<Result<_, _>>()?;
        frame.validate()?;
        Ok(frame)
    }

    pub fn with_line_polygon(mut self, n_poly: usize) -> Self {
        self.n_poly_lines = n_poly;
        self
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn device_bus_indices(&self) -> Vec<usize> {
        let map = self.net.bus_index_map();
        self.fleet.iter().map(|d| map[d.bus()]).collect()
    }

    /// Total baseline injection (nonflexible plus devices) per bus at step `t`.
    pub fn baseline_injections(&self, t: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.net.n_buses();
        let mut p: Vec<f64> = (0..n).map(|i| self.bus_baseline[i][t].0).collect();
        let mut q: Vec<f64> = (0..n).map(|i| self.bus_baseline[i][t].1).collect();
        for (k, bus) in self.device_bus_indices().into_iter().enumerate() {
            let (dp, dq) = self.device_series[k].baseline[t];
            p[bus] += dp;
            q[bus] += dq;
        }
        (p, q)
    }

    /// Export at the PCC implied by the baseline through the linear model.
    pub fn model_pcc_exchange(&self, t: usize) -> Result<(f64, f64), FrameError> {
        let (p, q) = self.baseline_injections(t);
        let sol = self.model.solve_state(&p, &q)?;
        let s = self.net.slack_index();
        Ok((p[s] - sol.slack_p, q[s] - sol.slack_q))
    }

    /// Largest violation of line ratings (inscribed polygon) or voltage bounds
    /// under the baseline at step `t`; zero or negative when feasible.
    pub fn baseline_limit_violation(&self, t: usize) -> Result<f64, FrameError> {
        let (p, q) = self.baseline_injections(t);
        let sol = self.model.solve_state(&p, &q)?;
        let n = self.net.n_buses();
        let mut worst = f64::NEG_INFINITY;
        for (i, bus) in self.net.buses.iter().enumerate() {
            let du = sol.state[n + i];
            worst = worst.max(du - (bus.u_max - 1.0)).max((bus.u_min - 1.0) - du);
        }
        for (line, flow) in self.net.lines.iter().zip(&self.model.branches.flows) {
            let (fp, fq) = flow.eval(&sol.state);
            for row in super::assemble::line_polygon_rows(line.s_max, self.n_poly_lines) {
                worst = worst.max(row.a_p * fp + row.a_q * fq - row.rhs);
            }
        }
        Ok(worst)
    }

    fn check_shapes(&self) -> Result<(), FrameError> {
        let len = |what: String, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(FrameError::LengthMismatch { what, expected, got })
            }
        };
        let map = self.net.bus_index_map();
        for d in &self.fleet {
            if !map.contains_key(d.bus()) {
                return Err(FrameError::UnknownBus { device: d.id().to_string(), bus: d.bus().to_string() });
            }
        }
        len("device series".into(), self.fleet.len(), self.device_series.len())?;
        for (d, s) in self.fleet.iter().zip(&self.device_series) {
            len(format!("baseline of {}", d.id()), self.horizon, s.baseline.len())?;
            len(format!("heating demand of {}", d.id()), self.horizon, s.q_heat.len())?;
        }
        len("bus baseline".into(), self.net.n_buses(), self.bus_baseline.len())?;
        for (b, s) in self.net.buses.iter().zip(&self.bus_baseline) {
            len(format!("baseline of bus {}", b.id), self.horizon, s.len())?;
        }
        Ok(())
    }

    /// Checks every frame invariant, including PCC-baseline consistency.
    pub fn validate(&self) -> Result<(), FrameError> {
        if !(self.dt > 0.0) {
            return Err(FrameError::NonPositiveDt);
        }
        if self.n_poly_lines < 4 {
            return Err(FrameError::LinePolygon);
        }
        self.check_shapes()?;
        if self.pcc_baseline.len() != self.horizon {
            return Err(FrameError::LengthMismatch {
                what: "PCC baseline".into(),
                expected: self.horizon,
                got: self.pcc_baseline.len(),
            });
        }
        for (d, s) in self.fleet.iter().zip(&self.device_series) {
            d.validate()?;
            for t in 0..self.horizon {
                let (p, q) = s.baseline[t];
                let bad = |reason: &str| FrameError::InconsistentBaseline {
                    device: d.id().to_string(),
                    t,
                    reason: reason.to_string(),
                };
                match d {
                    Device::Pv(pv) => {
                        if !(p >= 0.0 && p <= pv.p_capacity + 1e-12) {
                            return Err(bad("PV baseline outside [0, capacity]"));
                        }
                    }
                    Device::Load(l) => {
                        if !(-p >= -1e-12 && -p <= l.p_rated + 1e-12) {
                            return Err(bad("load baseline outside [0, p_rated] consumption"));
                        }
                        if (q - p * l.q_per_p()).abs() > 1e-9 {
                            return Err(bad("load baseline off its power-factor line"));
                        }
                        if !(s.q_heat[t] >= 0.0) {
                            return Err(bad("negative heating demand"));
                        }
                    }
                    Device::Bess(b) => {
                        if p.hypot(q) > b.s_max + 1e-12 {
                            return Err(bad("BESS baseline beyond rating"));
                        }
                    }
                }
            }
        }
        for t in 0..self.horizon {
            let (p, q) = self.model_pcc_exchange(t)?;
            let (bp, bq) = self.pcc_baseline[t];
            let residual = (p - bp).abs().max((q - bq).abs());
            if !(residual <= PCC_BASELINE_TOL) {
                return Err(FrameError::PccBaseline { t, residual });
            }
        }
        Ok(())
    }

    /// A copy in which every heat pump is held at its baseline: its injection
    /// moves into the nonflexible bus baseline and it leaves the fleet.
    pub fn with_fixed_heat_pumps(&self) -> Result<ScenarioFrame, FrameError> {
        let buses = self.device_bus_indices();
        let mut bus_baseline = self.bus_baseline.clone();
        let mut fleet = Vec::new();
        let mut series = Vec::new();
        for (k, d) in self.fleet.iter().enumerate() {
            if d.is_heat_pump() {
                for (slot, &(p, q)) in bus_baseline[buses[k]].iter_mut().zip(&self.device_series[k].baseline) {
                    slot.0 += p;
                    slot.1 += q;
                }
            } else {
                fleet.push(d.clone());
                series.push(self.device_series[k].clone());
            }
        }
        Ok(ScenarioFrame::new(self.net.clone(), fleet, series, bus_baseline, self.dt, self.horizon)?
            .with_line_polygon(self.n_poly_lines))
    }
}
