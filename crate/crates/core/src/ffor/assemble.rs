//! Construction of the per-direction linear programs.

use crate::devices::{bess_region, load_region, pv_region, regular_polygon, Device, LoadKind, RegionRow};
use crate::lp::{LinearProgram, Relation, VarId};

use super::{Direction, FforError, ScenarioFrame};

/// Edge rows of the inscribed regular polygon approximating `|S| ≤ s_max`.
pub(crate) fn line_polygon_rows(s_max: f64, n_poly: usize) -> Vec<RegionRow> {
    regular_polygon(s_max, n_poly).halfspaces()
}

/// PCC deviation variables of one timestep of the network block.
#[derive(Debug, Clone)]
pub(crate) struct StepVars {
    pub dp: VarId,
    pub dq: VarId,
}

/// Injection at each bus as a constant plus linear terms.
pub(crate) struct BusInjections {
    pub p_terms: Vec<Vec<(VarId, f64)>>,
    pub q_terms: Vec<Vec<(VarId, f64)>>,
    pub p_const: Vec<f64>,
    pub q_const: Vec<f64>,
}

impl BusInjections {
    pub fn zeros(n: usize) -> Self {
        BusInjections {
            p_terms: vec![Vec::new(); n],
            q_terms: vec![Vec::new(); n],
            p_const: vec![0.0; n],
            q_const: vec![0.0; n],
        }
    }
}

/// Adds state variables, nodal balance, line and voltage limits for step `t`.
/// `dp`/`dq` measure the export deviation from `pcc_base`.
pub(crate) fn add_network_block(
    lp: &mut LinearProgram,
    frame: &ScenarioFrame,
    t: usize,
    inj: &BusInjections,
    pcc_base: (f64, f64),
) -> StepVars {
    let net = &frame.net;
    let model = frame.model();
    let n = net.n_buses();
    let s = net.slack_index();
    let theta: Vec<VarId> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let bound = if i == s { 0.0 } else { f64::INFINITY };
            lp.add_var(format!("theta[{}][{t}]", b.id), -bound, bound)
        })
        .collect();
    let du: Vec<VarId> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = if i == s { (0.0, 0.0) } else { (b.u_min - 1.0, b.u_max - 1.0) };
            lp.add_var(format!("du[{}][{t}]", b.id), lo, hi)
        })
        .collect();
    let dp = lp.add_var(format!("dp[{t}]"), f64::NEG_INFINITY, f64::INFINITY);
    let dq = lp.add_var(format!("dq[{t}]"), f64::NEG_INFINITY, f64::INFINITY);
    let state = |k: usize| if k < n { theta[k] } else { du[k - n] };

    let jac = &model.jacobian;
    for i in 0..n {
        for (is_q, (jt, ju, ref_i, terms, konst, pcc, dvar)) in [
            (&jac.p_theta, &jac.p_u, model.reference.p_ref[i], &inj.p_terms[i], inj.p_const[i], pcc_base.0, dp),
            (&jac.q_theta, &jac.q_u, model.reference.q_ref[i], &inj.q_terms[i], inj.q_const[i], pcc_base.1, dq),
        ]
        .into_iter()
        .enumerate()
        {
            let mut row: Vec<(VarId, f64)> = Vec::new();
            for k in 0..n {
                row.push((theta[k], jt[(i, k)]));
                row.push((du[k], ju[(i, k)]));
            }
            row.extend(terms.iter().map(|&(v, c)| (v, -c)));
            let mut rhs = konst - ref_i;
            if i == s {
                row.push((dvar, 1.0));
                rhs -= pcc;
            }
            let tag = if is_q == 0 { "pbal" } else { "qbal" };
            lp.add_constraint(format!("{tag}[{}][{t}]", net.buses[i].id), row, Relation::Eq, rhs);
        }
    }

    for (l, (line, flow)) in net.lines.iter().zip(&model.branches.flows).enumerate() {
        for (j, r) in line_polygon_rows(line.s_max, frame.n_poly_lines).iter().enumerate() {
            let mut row: Vec<(VarId, f64)> = Vec::new();
            row.extend(flow.p_terms.iter().map(|&(k, c)| (state(k), r.a_p * c)));
            row.extend(flow.q_terms.iter().map(|&(k, c)| (state(k), r.a_q * c)));
            let rhs = r.rhs - r.a_p * flow.p_const - r.a_q * flow.q_const;
            lp.add_constraint(format!("line[{l}][{j}][{t}]"), row, Relation::Le, rhs);
        }
    }
    StepVars { dp, dq }
}

fn add_region(lp: &mut LinearProgram, name: &str, p: VarId, q: VarId, rows: &[RegionRow]) {
    for (j, r) in rows.iter().enumerate() {
        let rel = if r.equality { Relation::Eq } else { Relation::Le };
        lp.add_constraint(format!("{name}[{j}]"), [(p, r.a_p), (q, r.a_q)], rel, r.rhs);
    }
}

/// Whether a heat pump can deviate at step `t`: it must be running and
/// have a heating demand to serve.
pub(crate) fn heat_pump_active(frame: &ScenarioFrame, k: usize, t: usize) -> bool {
    let s = &frame.device_series[k];
    -s.baseline[t].0 > 0.0 && s.q_heat[t] > 0.0
}

/// One step of the single-timestep problem. Returns network and device variables.
pub(crate) fn add_step(
    lp: &mut LinearProgram,
    frame: &ScenarioFrame,
    t: usize,
) -> Result<(StepVars, Vec<(VarId, VarId)>), FforError> {
    let n = frame.net.n_buses();
    let buses = frame.device_bus_indices();
    let mut inj = BusInjections::zeros(n);
    for i in 0..n {
        inj.p_const[i] = frame.bus_baseline[i][t].0;
        inj.q_const[i] = frame.bus_baseline[i][t].1;
    }
    let mut dev_vars = Vec::with_capacity(frame.fleet.len());
    for (k, dev) in frame.fleet.iter().enumerate() {
        let id = dev.id();
        let p = lp.add_var(format!("p[{id}][{t}]"), f64::NEG_INFINITY, f64::INFINITY);
        let q = lp.add_var(format!("q[{id}][{t}]"), f64::NEG_INFINITY, f64::INFINITY);
        let base = frame.device_series[k].baseline[t];
        let name = format!("for[{id}][{t}]");
        match dev {
            Device::Bess(b) => add_region(lp, &name, p, q, &bess_region(b).halfspaces()),
            Device::Pv(pv) => {
                let avail = base.0.clamp(0.0, pv.p_capacity);
                add_region(lp, &name, p, q, &pv_region(pv, avail)?.halfspaces());
            }
            Device::Load(l) => {
                if l.kind == LoadKind::HeatPump && !heat_pump_active(frame, k, t) {
                    lp.add_constraint(format!("{name}[pin_p]"), [(p, 1.0)], Relation::Eq, base.0);
                    lp.add_constraint(format!("{name}[pin_q]"), [(q, 1.0)], Relation::Eq, base.1);
                } else {
                    add_region(lp, &name, p, q, &load_region(l).halfspaces());
                }
            }
        }
        inj.p_terms[buses[k]].push((p, 1.0));
        inj.q_terms[buses[k]].push((q, 1.0));
        dev_vars.push((p, q));
    }
    let vars = add_network_block(lp, frame, t, &inj, frame.pcc_baseline[t]);
    Ok((vars, dev_vars))
}

/// A program together with the PCC deviation variables its objective uses.
#[derive(Debug, Clone)]
pub struct DirectionProgram {
    pub lp: LinearProgram,
    pub dp: VarId,
    pub dq: VarId,
}

/// Single-timestep problem: minimize `α ΔP + β ΔQ` at step `t`.
pub fn assemble_single(frame: &ScenarioFrame, t: usize, dir: Direction) -> Result<DirectionProgram, FforError> {
    if t >= frame.horizon {
        return Err(FforError::Window { t0: t, duration: 1, horizon: frame.horizon });
    }
    let mut lp = LinearProgram::new();
    let (vars, _) = add_step(&mut lp, frame, t)?;
    lp.set_objective([(vars.dp, dir.alpha), (vars.dq, dir.beta)]);
    Ok(DirectionProgram { lp, dp: vars.dp, dq: vars.dq })
}

/// Multi-timestep problem: the PCC deviation is held constant over
/// `[t0, t0 + d)` subject to battery and room-temperature recursions.
pub fn assemble_multi(
    frame: &ScenarioFrame,
    t0: usize,
    d: usize,
    dir: Direction,
) -> Result<DirectionProgram, FforError> {
    if d == 0 || t0 + d > frame.horizon {
        return Err(FforError::Window { t0, duration: d, horizon: frame.horizon });
    }
    let mut lp = LinearProgram::new();
    let mut steps = Vec::with_capacity(d);
    for t in t0..t0 + d {
        steps.push(add_step(&mut lp, frame, t)?);
    }
    for w in steps.windows(2) {
        let (a, b) = (&w[0].0, &w[1].0);
        lp.add_constraint(format!("hold_p[{}]", a.dp.index()), [(a.dp, 1.0), (b.dp, -1.0)], Relation::Eq, 0.0);
        lp.add_constraint(format!("hold_q[{}]", a.dq.index()), [(a.dq, 1.0), (b.dq, -1.0)], Relation::Eq, 0.0);
    }

    let dt = frame.dt;
    for (k, dev) in frame.fleet.iter().enumerate() {
        let id = dev.id();
        match dev {
            Device::Bess(b) => {
                let mut prev: Option<VarId> = None;
                for (j, (_, devs)) in steps.iter().enumerate() {
                    let t = t0 + j;
                    let soc = lp.add_var(format!("soc[{id}][{}]", t + 1), b.soc_min, b.soc_max);
                    // soc[t+1] = soc[t] − dt·P[t]/C
                    let mut row = vec![(soc, 1.0), (devs[k].0, dt / b.capacity_c)];
                    let rhs = match prev {
                        Some(v) => {
                            row.push((v, -1.0));
                            0.0
                        }
                        None => b.soc_init,
                    };
                    lp.add_constraint(format!("soc_rec[{id}][{t}]"), row, Relation::Eq, rhs);
                    prev = Some(soc);
                }
            }
            Device::Load(l) if l.kind == LoadKind::HeatPump => {
                let mut prev: Option<VarId> = None;
                for (j, (_, devs)) in steps.iter().enumerate() {
                    let t = t0 + j;
                    let temp = lp.add_var(format!("temp[{id}][{}]", t + 1), l.temp_min, l.temp_max);
                    let mut row = vec![(temp, 1.0)];
                    let mut rhs = match prev {
                        Some(v) => {
                            row.push((v, -1.0));
                            0.0
                        }
                        None => l.temp_init,
                    };
                    if heat_pump_active(frame, k, t) {
                        // T[t+1] = T[t] + (c − c_base)/c_base · q_heat · dt with c = −P
                        let series = &frame.device_series[k];
                        let p_base = series.baseline[t].0;
                        let gain = series.q_heat[t] * dt / -p_base;
                        row.push((devs[k].0, gain));
                        rhs += gain * p_base;
                    }
                    lp.add_constraint(format!("temp_rec[{id}][{t}]"), row, Relation::Eq, rhs);
                    prev = Some(temp);
                }
            }
            _ => {}
        }
    }

    let first = &steps[0].0;
    lp.set_objective([(first.dp, dir.alpha), (first.dq, dir.beta)]);
    Ok(DirectionProgram { lp, dp: first.dp, dq: first.dq })
}
