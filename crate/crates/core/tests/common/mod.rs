//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use flexregion::devices::{bess_region, load_region, pv_region, Device, LoadKind, PolygonRegion};
use flexregion::ffor::ScenarioFrame;
use flexregion::geometry::{convex_hull, Point};
use flexregion::grid::{Bus, Line, Network};
use rand::Rng;

/// Full AC nodal injections for voltage angles `theta` and magnitudes `vm`.
pub fn ac_injections(net: &Network, theta: &[f64], vm: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = net.n_buses();
    let mut g = vec![vec![0.0; n]; n];
    let mut b = vec![vec![0.0; n]; n];
    for (line, (i, k)) in net.lines.iter().zip(net.line_endpoints()) {
        for (a, c) in [(i, k), (k, i)] {
            g[a][a] += line.g;
            b[a][a] += line.b + 0.5 * line.b_sh;
            g[a][c] -= line.g;
            b[a][c] -= line.b;
        }
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            let t = theta[i] - theta[k];
            let vv = vm[i] * vm[k];
            p[i] += vv * (g[i][k] * t.cos() + b[i][k] * t.sin());
            q[i] += vv * (g[i][k] * t.sin() - b[i][k] * t.cos());
        }
    }
    (p, q)
}

/// AC sending-end flow of the π-model line `i → k`.
pub fn ac_branch_flow(line: &Line, vi: f64, vk: f64, ti: f64, tk: f64) -> (f64, f64) {
    let t = ti - tk;
    let p = vi * vi * line.g - vi * vk * (line.g * t.cos() + line.b * t.sin());
    let q = -vi * vi * (line.b + 0.5 * line.b_sh) - vi * vk * (line.g * t.sin() - line.b * t.cos());
    (p, q)
}

/// Connected random network with `n` buses: a random tree plus a few chords.
pub fn random_network(rng: &mut impl Rng, n: usize) -> Network {
    let mut buses = vec![Bus::slack("b0")];
    buses.extend((1..n).map(|i| Bus::load(format!("b{i}"))));
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|j| (rng.gen_range(0..j), j)).collect();
    for _ in 0..rng.gen_range(0..3) {
        let (a, c) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let key = (a.min(c), a.max(c));
        if a != c && !pairs.iter().any(|&(x, y)| (x.min(y), x.max(y)) == key) {
            pairs.push((a, c));
        }
    }
    let lines = pairs
        .into_iter()
        .map(|(a, c)| {
            Line::new(
                format!("b{a}"),
                format!("b{c}"),
                rng.gen_range(0.0..2.0),
                rng.gen_range(-20.0..-1.0),
                rng.gen_range(0.0..0.05),
                10.0,
            )
        })
        .collect();
    Network::new(1.0, 20.0, buses, lines).expect("random network is valid")
}

fn region_at(frame: &ScenarioFrame, k: usize, t: usize) -> PolygonRegion {
    let base = frame.device_series[k].baseline[t];
    match &frame.fleet[k] {
        Device::Bess(b) => bess_region(b),
        Device::Pv(pv) => pv_region(pv, base.0).expect("availability within capacity"),
        Device::Load(l) => {
            let s = &frame.device_series[k];
            if l.kind == LoadKind::HeatPump && !(-base.0 > 0.0 && s.q_heat[t] > 0.0) {
                PolygonRegion { vertices: vec![base] }
            } else {
                load_region(l)
            }
        }
    }
}

/// Grid points at spacing `res` inside the region, plus its vertices and
/// boundary points at the same spacing.
pub fn sample_region(region: &PolygonRegion, res: f64) -> Vec<Point> {
    let v = &region.vertices;
    let mut pts: Vec<Point> = v.clone();
    for j in 0..v.len() {
        let (a, b) = (v[j], v[(j + 1) % v.len()]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (len / res).ceil() as usize;
        for s in 1..steps {
            let f = s as f64 / steps as f64;
            pts.push((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
        }
    }
    if v.len() >= 3 {
        let rows = region.halfspaces();
        let (lo_p, hi_p) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
        let (lo_q, hi_q) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
        let mut i = (lo_p / res).floor() as i64;
        while i as f64 * res <= hi_p {
            let mut j = (lo_q / res).floor() as i64;
            while j as f64 * res <= hi_q {
                let p = (i as f64 * res, j as f64 * res);
                if rows.iter().all(|r| r.a_p * p.0 + r.a_q * p.1 <= r.rhs + 1e-12) {
                    pts.push(p);
                }
                j += 1;
            }
            i += 1;
        }
    }
    pts
}

/// Result of brute-force sampling: the hull of all feasible deviations.
pub struct Sampled {
    pub hull: Vec<Point>,
    pub feasible: usize,
}

struct HullAccumulator {
    points: Vec<Point>,
    feasible: usize,
}

impl HullAccumulator {
    fn push(&mut self, p: Point) {
        self.points.push(p);
        self.feasible += 1;
        if self.points.len() >= 1 << 16 {
            self.points = convex_hull(&self.points);
        }
    }
}

/// PCC deviations of every feasible combination of sampled device setpoints
/// at step `t`, checked against line polygons and voltage bounds through
/// direct linear power-flow solves. Supports up to two devices. Only the
/// convex hull is kept: a convex set contains every sample iff it contains
/// the hull vertices.
pub fn brute_force_deviations(frame: &ScenarioFrame, t: usize, res: f64) -> Sampled {
    assert!(frame.fleet.len() <= 2, "brute force is meant for tiny frames");
    let net = &frame.net;
    let n = net.n_buses();
    let s = net.slack_index();
    let model = frame.model();
    let (p0, q0) = frame.baseline_injections(t);
    // response of (export P, export Q, every limit row) to injections
    let rows = |p: &[f64], q: &[f64]| -> Vec<f64> {
        let sol = model.solve_state(p, q).expect("solvable network");
        let mut out = vec![p[s] - sol.slack_p, q[s] - sol.slack_q];
        for (i, bus) in net.buses.iter().enumerate() {
            let du = sol.state[n + i];
            out.push(du - (bus.u_max - 1.0));
            out.push((bus.u_min - 1.0) - du);
        }
        for (line, flow) in net.lines.iter().zip(&model.branches.flows) {
            let (fp, fq) = flow.eval(&sol.state);
            for r in flexregion::devices::regular_polygon(line.s_max, frame.n_poly_lines).halfspaces() {
                out.push(r.a_p * fp + r.a_q * fq - r.rhs);
            }
        }
        out
    };
    let base = rows(&p0, &q0);
    let buses = frame.device_bus_indices();
    let mut contributions: Vec<Vec<Vec<f64>>> = Vec::new();
    for k in 0..frame.fleet.len() {
        let unit = |dp: f64, dq: f64| {
            let (mut p, mut q) = (p0.clone(), q0.clone());
            p[buses[k]] += dp;
            q[buses[k]] += dq;
            let r = rows(&p, &q);
            r.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<f64>>()
        };
        let (ep, eq) = (unit(1.0, 0.0), unit(0.0, 1.0));
        let b0 = frame.device_series[k].baseline[t];
        contributions.push(
            sample_region(&region_at(frame, k, t), res)
                .into_iter()
                .map(|(p, q)| ep.iter().zip(&eq).map(|(a, c)| a * (p - b0.0) + c * (q - b0.1)).collect())
                .collect(),
        );
    }
    let export0 = frame.pcc_baseline[t];
    let offset = (base[0] - export0.0, base[1] - export0.1);
    let feasible = |v: &[f64]| v[2..].iter().all(|&x| x <= 1e-9);
    let mut out = HullAccumulator { points: Vec::new(), feasible: 0 };
    match contributions.len() {
        0 => {
            if feasible(&base) {
                out.push(offset);
            }
        }
        1 => {
            for c in &contributions[0] {
                let v: Vec<f64> = base.iter().zip(c).map(|(a, b)| a + b).collect();
                if feasible(&v) {
                    out.push((v[0] - export0.0, v[1] - export0.1));
                }
            }
        }
        _ => {
            let mut v = vec![0.0; base.len()];
            for a in &contributions[0] {
                for b in &contributions[1] {
                    let mut ok = true;
                    for r in (2..base.len()).chain(0..2) {
                        v[r] = base[r] + a[r] + b[r];
                        if r >= 2 && v[r] > 1e-9 {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        out.push((v[0] - export0.0, v[1] - export0.1));
                    }
                }
            }
        }
    }
    Sampled { hull: convex_hull(&out.points), feasible: out.feasible }
}
