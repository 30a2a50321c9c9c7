//! First-order expansion of the AC power-flow equations around the flat start
//! (all voltages 1 p.u., all angles 0).
//!
//! The stacked state is `[θ; ΔU]`: entry `i` is the angle of bus `i` and entry
//! `n + i` its voltage-magnitude deviation. The slack rows and columns stay in
//! the matrices; the slack state is pinned to zero by the caller.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::Network;

#[derive(Debug, Error, PartialEq)]
pub enum PowerFlowError {
    #[error("slack bus state must be zero (θ = {theta}, ΔU = {du})")]
    NonZeroSlackState { theta: f64, du: f64 },
    #[error("state vectors have length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reduced power-flow Jacobian is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub p_theta: DMatrix<f64>,
    pub p_u: DMatrix<f64>,
    pub q_theta: DMatrix<f64>,
    pub q_u: DMatrix<f64>,
    pub slack: usize,
}

impl JacobianBlocks {
    pub fn n_buses(&self) -> usize {
        self.p_theta.nrows()
    }

    /// The full `2n × 2n` matrix `[[Jpθ, JpU], [Jqθ, JqU]]`.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_buses();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.p_theta);
        m.view_mut((0, n), (n, n)).copy_from(&self.p_u);
        m.view_mut((n, 0), (n, n)).copy_from(&self.q_theta);
        m.view_mut((n, n), (n, n)).copy_from(&self.q_u);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceInjection {
    pub p_ref: DVector<f64>,
    pub q_ref: DVector<f64>,
}

/// Linearized sending-end flow of one line, as sparse rows over the stacked state.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow {
    pub from: usize,
    pub to: usize,
    pub p_terms: Vec<(usize, f64)>,
    pub p_const: f64,
    pub q_terms: Vec<(usize, f64)>,
    pub q_const: f64,
}

impl BranchFlow {
    pub fn eval(&self, state: &[f64]) -> (f64, f64) {
        let dot = |terms: &[(usize, f64)]| terms.iter().map(|&(k, c)| c * state[k]).sum::<f64>();
        (self.p_const + dot(&self.p_terms), self.q_const + dot(&self.q_terms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlowMap {
    pub flows: Vec<BranchFlow>,
}

pub fn build_jacobian(net: &Network) -> JacobianBlocks {
    let n = net.n_buses();
    let mut p_theta = DMatrix::zeros(n, n);
    let mut p_u = DMatrix::zeros(n, n);
    let mut q_u = DMatrix::zeros(n, n);
    for (line, (i, k)) in net.lines.iter().zip(net.line_endpoints()) {
        let (g, b, half_sh) = (line.g, line.b, 0.5 * line.b_sh);
        for (a, c) in [(i, k), (k, i)] {
            p_theta[(a, a)] -= b;
            p_theta[(a, c)] += b;
            q_u[(a, a)] += -2.0 * half_sh - b;
            q_u[(a, c)] += b;
            p_u[(a, a)] += g;
            p_u[(a, c)] -= g;
        }
    }
    let q_theta = -&p_u;
    JacobianBlocks { p_theta, p_u, q_theta, q_u, slack: net.slack_index() }
}

pub fn reference_injections(net: &Network) -> ReferenceInjection {
    let n = net.n_buses();
    let mut q_ref = DVector::zeros(n);
    for (line, (i, k)) in net.lines.iter().zip(net.line_endpoints()) {
        q_ref[i] -= 0.5 * line.b_sh;
        q_ref[k] -= 0.5 * line.b_sh;
    }
    ReferenceInjection { p_ref: DVector::zeros(n), q_ref }
}

pub fn branch_flow_map(net: &Network) -> BranchFlowMap {
    let n = net.n_buses();
    let flows = net
        .lines
        .iter()
        .zip(net.line_endpoints())
        .map(|(line, (i, k))| {
            let (g, b, half_sh) = (line.g, line.b, 0.5 * line.b_sh);
            // P_ik = g(ΔU_i − ΔU_k) − b(θ_i − θ_k)
            let p_terms = vec![(i, -b), (k, b), (n + i, g), (n + k, -g)];
            // Q_ik = −b(ΔU_i − ΔU_k) − g(θ_i − θ_k) − (b_sh/2)(1 + 2ΔU_i)
            let q_terms = vec![(i, -g), (k, g), (n + i, -b - 2.0 * half_sh), (n + k, b)];
            BranchFlow { from: i, to: k, p_terms, p_const: 0.0, q_terms, q_const: -half_sh }
        })
        .collect();
    BranchFlowMap { flows }
}

/// Evaluates `[P; Q] = [P_ref; Q_ref] + J [θ; ΔU]`.
pub fn injections_from_state(
    jac: &JacobianBlocks,
    reference: &ReferenceInjection,
    theta: &[f64],
    du: &[f64],
) -> Result<(DVector<f64>, DVector<f64>), PowerFlowError> {
    let n = jac.n_buses();
    for len in [theta.len(), du.len()] {
        if len != n {
            return Err(PowerFlowError::DimensionMismatch { expected: n, got: len });
        }
    }
    let s = jac.slack;
    if theta[s] != 0.0 || du[s] != 0.0 {
        return Err(PowerFlowError::NonZeroSlackState { theta: theta[s], du: du[s] });
    }
    let th = DVector::from_column_slice(theta);
    let u = DVector::from_column_slice(du);
    let p = &reference.p_ref + &jac.p_theta * &th + &jac.p_u * &u;
    let q = &reference.q_ref + &jac.q_theta * &th + &jac.q_u * &u;
    Ok((p, q))
}

/// The three linear maps of one network bundled together, plus a solver for
/// the state that produces given non-slack injections.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub jacobian: JacobianBlocks,
    pub reference: ReferenceInjection,
    pub branches: BranchFlowMap,
}

/// A solved linear power-flow operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    /// Stacked `[θ; ΔU]`.
    pub state: Vec<f64>,
    /// Injection the linear model demands at the slack bus.
    pub slack_p: f64,
    pub slack_q: f64,
}

impl LinearModel {
    pub fn new(net: &Network) -> Self {
        LinearModel {
            jacobian: build_jacobian(net),
            reference: reference_injections(net),
            branches: branch_flow_map(net),
        }
    }

    pub fn n_buses(&self) -> usize {
        self.jacobian.n_buses()
    }

    /// Solves for the state given injections at every bus; the slack entries
    /// of `p` and `q` are ignored.
    pub fn solve_state(&self, p: &[f64], q: &[f64]) -> Result<LinearState, PowerFlowError> {
        let n = self.n_buses();
        for len in [p.len(), q.len()] {
            if len != n {
                return Err(PowerFlowError::DimensionMismatch { expected: n, got: len });
            }
        }
        let s = self.jacobian.slack;
        let full = self.jacobian.full();
        let keep: Vec<usize> = (0..2 * n).filter(|&k| k != s && k != n + s).collect();
        let m = keep.len();
        let mut a = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (r, &row) in keep.iter().enumerate() {
            for (c, &col) in keep.iter().enumerate() {
                a[(r, c)] = full[(row, col)];
            }
            rhs[r] =
                if row < n { p[row] - self.reference.p_ref[row] } else { q[row - n] - self.reference.q_ref[row - n] };
        }
        let x = a.lu().solve(&rhs).ok_or(PowerFlowError::Singular)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PowerFlowError::Singular);
        }
        let mut state = vec![0.0; 2 * n];
        for (r, &k) in keep.iter().enumerate() {
            state[k] = x[r];
        }
        let (ps, qs) = injections_from_state(&self.jacobian, &self.reference, &state[..n], &state[n..])?;
        Ok(LinearState { state, slack_p: ps[s], slack_q: qs[s] })
    }
}
