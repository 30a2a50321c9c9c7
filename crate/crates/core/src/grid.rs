//! Network topology, electrical parameters and operating limits.
//!
//! All electrical quantities are per-unit on `base_mva`. A network is
//! validated once on construction and treated as immutable afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_U_MIN: f64 = 0.95;
pub const DEFAULT_U_MAX: f64 = 1.05;

fn default_u_min() -> f64 {
    DEFAULT_U_MIN
}

fn default_u_max() -> f64 {
    DEFAULT_U_MAX
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// The point of common coupling. Voltage fixed at 1 p.u., angle 0.
    Slack,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub kind: BusKind,
    #[serde(default = "default_u_min")]
    pub u_min: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
}

impl Bus {
    pub fn load(id: impl Into<String>) -> Self {
        Bus { id: id.into(), kind: BusKind::Load, u_min: DEFAULT_U_MIN, u_max: DEFAULT_U_MAX }
    }

    pub fn slack(id: impl Into<String>) -> Self {
        Bus { kind: BusKind::Slack, ..Bus::load(id) }
    }
}

/// A π-model line. `b_sh` is the total shunt susceptance; each terminal
/// carries half of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    #[serde(rename = "from")]
    pub from_bus: String,
    #[serde(rename = "to")]
    pub to_bus: String,
    pub g: f64,
    pub b: f64,
    #[serde(default)]
    pub b_sh: f64,
    pub s_max: f64,
}

impl Line {
    pub fn new(from: impl Into<String>, to: impl Into<String>, g: f64, b: f64, b_sh: f64, s_max: f64) -> Self {
        Line { from_bus: from.into(), to_bus: to.into(), g, b, b_sh, s_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub base_mva: f64,
    pub nominal_kv: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

/// A single broken network invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveBase,
    DuplicateBus(String),
    NoSlack,
    MultipleSlack(Vec<String>),
    UMinNonPositive(String),
    UMinAtLeastOne(String),
    UMaxAtMostOne(String),
    UnknownBus { line: usize, bus: String },
    SelfLoop { line: usize, bus: String },
    NonPositiveRating { line: usize },
    NonFiniteParameter { line: usize },
    ParallelLine { line: usize, from: String, to: String },
    Disconnected(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveBase => write!(f, "base_mva must be positive"),
            Violation::DuplicateBus(id) => write!(f, "duplicate bus id \"{id}\""),
            Violation::NoSlack => write!(f, "no slack bus"),
            Violation::MultipleSlack(ids) => write!(f, "multiple slack buses: {}", ids.join(", ")),
            Violation::UMinNonPositive(id) => write!(f, "bus \"{id}\": u_min ≤ 0"),
            Violation::UMinAtLeastOne(id) => write!(f, "bus \"{id}\": u_min ≥ 1"),
            Violation::UMaxAtMostOne(id) => write!(f, "bus \"{id}\": u_max ≤ 1"),
            Violation::UnknownBus { line, bus } => {
                write!(f, "line {line} references unknown bus \"{bus}\"")
            }
            Violation::SelfLoop { line, bus } => write!(f, "line {line} connects bus \"{bus}\" to itself"),
            Violation::NonPositiveRating { line } => write!(f, "line {line}: s_max must be positive"),
            Violation::NonFiniteParameter { line } => write!(f, "line {line}: non-finite parameter"),
            Violation::ParallelLine { line, from, to } => {
                write!(f, "line {line}: parallel line between \"{from}\" and \"{to}\"")
            }
            Violation::Disconnected(ids) => write!(f, "disconnected buses: {}", ids.join(", ")),
        }
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid document does not match schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid network: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown bus \"{0}\"")]
    UnknownBus(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Parses and validates a grid document.
pub fn load_network(source: &str) -> Result<Network, GridError> {
    let net: Network = serde_json::from_str(source)?;
    Network::new(net.base_mva, net.nominal_kv, net.buses, net.lines)
}

/// Returns one entry per broken invariant; empty iff the network is valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(net.base_mva > 0.0) {
        out.push(Violation::NonPositiveBase);
    }

    let mut seen = BTreeSet::new();
    for bus in &net.buses {
        if !seen.insert(bus.id.as_str()) {
            out.push(Violation::DuplicateBus(bus.id.clone()));
        }
    }

    let slacks: Vec<String> = net.buses.iter().filter(|b| b.kind == BusKind::Slack).map(|b| b.id.clone()).collect();
    match slacks.len() {
        0 => out.push(Violation::NoSlack),
        1 => {}
        _ => out.push(Violation::MultipleSlack(slacks)),
    }

    for bus in &net.buses {
        if !(bus.u_min > 0.0) {
            out.push(Violation::UMinNonPositive(bus.id.clone()));
        } else if !(bus.u_min < 1.0) {
            out.push(Violation::UMinAtLeastOne(bus.id.clone()));
        }
        if !(bus.u_max > 1.0) {
            out.push(Violation::UMaxAtMostOne(bus.id.clone()));
        }
    }

    let mut pairs = BTreeSet::new();
    let mut endpoints_ok = true;
    for (i, line) in net.lines.iter().enumerate() {
        for end in [&line.from_bus, &line.to_bus] {
            if !seen.contains(end.as_str()) {
                endpoints_ok = false;
                out.push(Violation::UnknownBus { line: i, bus: end.clone() });
            }
        }
        if line.from_bus == line.to_bus {
            out.push(Violation::SelfLoop { line: i, bus: line.from_bus.clone() });
        }
        if ![line.g, line.b, line.b_sh, line.s_max].iter().all(|x| x.is_finite()) {
            out.push(Violation::NonFiniteParameter { line: i });
        }
        if !(line.s_max > 0.0) {
            out.push(Violation::NonPositiveRating { line: i });
        }
        let key = if line.from_bus <= line.to_bus {
            (line.from_bus.as_str(), line.to_bus.as_str())
        } else {
            (line.to_bus.as_str(), line.from_bus.as_str())
        };
        if line.from_bus != line.to_bus && !pairs.insert(key) {
            out.push(Violation::ParallelLine { line: i, from: line.from_bus.clone(), to: line.to_bus.clone() });
        }
    }

    if endpoints_ok && !net.buses.is_empty() {
        let unreachable = unreachable_buses(net);
        if !unreachable.is_empty() {
            out.push(Violation::Disconnected(unreachable));
        }
    }
    out
}

fn unreachable_buses(net: &Network) -> Vec<String> {
    let index: HashMap<&str, usize> = net.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let mut adj = vec![Vec::new(); net.buses.len()];
    for line in &net.lines {
        let (a, b) = (index[line.from_bus.as_str()], index[line.to_bus.as_str()]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let root = net.buses.iter().position(|b| b.kind == BusKind::Slack).unwrap_or(0);
    let mut visited = vec![false; net.buses.len()];
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    net.buses.iter().zip(&visited).filter(|(_, &v)| !v).map(|(b, _)| b.id.clone()).collect()
}

impl Network {
    /// Builds a network and rejects it if any invariant is broken.
    pub fn new(base_mva: f64, nominal_kv: f64, buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self, GridError> {
        let net = Network { base_mva, nominal_kv, buses, lines };
        let violations = validate_network(&net);
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(GridError::Invalid(violations))
        }
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Index of the slack bus. Panics on an unvalidated network without one.
    pub fn slack_index(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Slack).expect("validated network has a slack bus")
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_index_map(&self) -> BTreeMap<String, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect()
    }

    /// (from, to) bus indices of each line.
    pub fn line_endpoints(&self) -> Vec<(usize, usize)> {
        let index = self.bus_index_map();
        self.lines.iter().map(|l| (index[&l.from_bus], index[&l.to_bus])).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// Buses sorted by id and lines by endpoint pair, for order-independent comparison.
    pub fn canonicalized(&self) -> Network {
        let mut net = self.clone();
        net.buses.sort_by(|a, b| a.id.cmp(&b.id));
        net.lines.sort_by(|a, b| (&a.from_bus, &a.to_bus).cmp(&(&b.from_bus, &b.to_bus)));
        net
    }
}
