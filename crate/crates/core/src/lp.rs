//! Linear programs in constraint form and the bundled solver.
//!
//! Every program minimizes. The solver is the `microlp` revised simplex; its
//! answer is re-checked against the original rows before being reported as
//! optimal.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Absolute primal feasibility tolerance, p.u. scale.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint \"{constraint}\" references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable \"{0}\" has lower bound above upper bound")]
    EmptyBounds(String),
}

fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
    for (v, c) in terms {
        *merged.entry(v).or_insert(0.0) += c;
    }
    merged.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable { name: name.into(), lower, upper });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row; repeated variables are summed and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint { name: name.into(), terms: merge_terms(terms), relation, rhs });
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>) {
        self.objective = merge_terms(terms);
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::NonFinite(format!("bounds of \"{}\"", v.name)));
            }
            if v.lower > v.upper {
                return Err(LpError::EmptyBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            for &(v, coeff) in &c.terms {
                if v.0 >= n {
                    return Err(LpError::UnknownVariable { constraint: c.name.clone(), var: v.0 });
                }
                if !coeff.is_finite() {
                    return Err(LpError::NonFinite(format!("constraint \"{}\"", c.name)));
                }
            }
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of \"{}\"", c.name)));
            }
        }
        for &(v, coeff) in &self.objective {
            if v.0 >= n {
                return Err(LpError::UnknownVariable { constraint: "objective".into(), var: v.0 });
            }
            if !coeff.is_finite() {
                return Err(LpError::NonFinite("objective".into()));
            }
        }
        Ok(())
    }

    /// Largest absolute violation of any bound or row by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
            let excess = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(excess);
        }
        worst
    }

    pub fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Renders the program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let var = |v: VarId| format!("x{}", v.0);
        let expr = |terms: &[(VarId, f64)]| -> String {
            if terms.is_empty() {
                return "0 x0".to_string();
            }
            let mut s = String::new();
            for (k, &(v, c)) in terms.iter().enumerate() {
                let sign = if c < 0.0 {
                    "-"
                } else if k > 0 {
                    "+"
                } else {
                    ""
                };
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{sign}{} {}", c.abs(), var(v));
            }
            s
        };
        let mut out = String::new();
        out.push_str("\\ variables:");
        for (i, v) in self.variables.iter().enumerate() {
            let _ = write!(out, "\n\\   x{i} = {}", v.name);
        }
        let _ = write!(out, "\nMinimize\n obj: {}\nSubject To\n", expr(&self.objective));
        for (i, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " c{i}: {} {rel} {}", expr(&c.terms), c.rhs);
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            let bound = |x: f64| {
                if x == f64::INFINITY {
                    "+inf".to_string()
                } else if x == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    x.to_string()
                }
            };
            if v.lower == v.upper {
                let _ = writeln!(out, " x{i} = {}", bound(v.lower));
            } else {
                let _ = writeln!(out, " {} <= x{i} <= {}", bound(v.lower), bound(v.upper));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The solver broke down or returned a point outside tolerance.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub message: Option<String>,
}

impl LpSolution {
    fn without_point(status: LpStatus, message: Option<String>) -> Self {
        LpSolution { status, values: Vec::new(), objective_value: f64::NAN, message }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

pub trait LpSolver: Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError>;
}

/// Revised simplex backed by `microlp`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexSolver;

impl LpSolver for SimplexSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        lp.validate()?;
        let mut problem = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
        let mut obj = vec![0.0; lp.variables.len()];
        for &(v, c) in &lp.objective {
            obj[v.0] += c;
        }
        let vars: Vec<microlp::Variable> =
            lp.variables.iter().zip(&obj).map(|(v, &c)| problem.add_var(c, (v.lower, v.upper))).collect();
        for c in &lp.constraints {
            if c.terms.is_empty() {
                let ok = match c.relation {
                    Relation::Le => 0.0 <= c.rhs + FEASIBILITY_TOL,
                    Relation::Ge => 0.0 >= c.rhs - FEASIBILITY_TOL,
                    Relation::Eq => c.rhs.abs() <= FEASIBILITY_TOL,
                };
                if !ok {
                    return Ok(LpSolution::without_point(
                        LpStatus::Infeasible,
                        Some(format!("empty row \"{}\" unsatisfiable", c.name)),
                    ));
                }
                continue;
            }
            let mut expr = microlp::LinearExpr::empty();
            for &(v, a) in &c.terms {
                expr.add(vars[v.0], a);
            }
            let op = match c.relation {
                Relation::Le => microlp::ComparisonOp::Le,
                Relation::Ge => microlp::ComparisonOp::Ge,
                Relation::Eq => microlp::ComparisonOp::Eq,
            };
            problem.add_constraint(expr, op, c.rhs);
        }

        let outcome = match problem.solve() {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => return Ok(LpSolution::without_point(LpStatus::Infeasible, None)),
            Err(microlp::Error::Unbounded) => return Ok(LpSolution::without_point(LpStatus::Unbounded, None)),
            Err(e) => return Ok(LpSolution::without_point(LpStatus::NumericalFailure, Some(format!("{e:?}")))),
        };
        let Some(solution) = outcome.solution() else {
            return Ok(LpSolution::without_point(LpStatus::NumericalFailure, Some("solve interrupted".into())));
        };
        let values: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
        let violation = lp.max_violation(&values);
        if violation > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::NumericalFailure,
                objective_value: lp.objective_at(&values),
                values,
                message: Some(format!("returned point violates constraints by {violation:e}")),
            });
        }
        Ok(LpSolution { status: LpStatus::Optimal, objective_value: lp.objective_at(&values), values, message: None })
    }
}

/// Solves with the bundled backend.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    SimplexSolver.solve(lp)
}
