use flexregion::baseline::BaselineError;
use flexregion::FforError;
use thiserror::Error;

/// Failure of a CLI run, split by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, unreadable or invalid input files.
    #[error("input error: {0}")]
    Input(String),
    /// A flexibility or baseline program could not be solved.
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
        }
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{ctx}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{ctx}: {m}")),
        }
    }
}

impl From<FforError> for CliError {
    fn from(e: FforError) -> Self {
        match e {
            FforError::Infeasible { .. }
            | FforError::Unbounded { .. }
            | FforError::Solver { .. }
            | FforError::Lp(_) => CliError::Solver(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Infeasible { .. } | BaselineError::Solver { .. } | BaselineError::Lp(_) => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_failures_map_to_exit_code_two() {
        let e: CliError = FforError::Infeasible { alpha: 1.0, beta: 0.0, t0: 3 }.into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = BaselineError::Infeasible { t: 0 }.into();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn input_failures_map_to_exit_code_one() {
        let e: CliError = FforError::Window { t0: 0, duration: 9, horizon: 8 }.into();
        assert_eq!(e.exit_code(), 1);
        let e: CliError = BaselineError::UnknownBus("x".into()).into();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn context_keeps_the_kind() {
        let e = CliError::Solver("boom".into()).context("duration 4");
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_string(), "solver failure: duration 4: boom");
    }
}
