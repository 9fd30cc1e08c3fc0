use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("numeric-input error: {0}")]
    NumericInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid error: {0}")]
    GridMismatch(String),

    #[error("bracket error: f({lo}) = {f_lo}, f({hi}) = {f_hi} do not straddle zero")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("infeasible-band error: {0}")]
    InfeasibleBand(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("non-convergence error after {iterations} iterations (last changes {last_change0:.3e}, {last_change1:.3e})")]
    NonConvergence {
        iterations: usize,
        last_change0: f64,
        last_change1: f64,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("seed error: {0}")]
    Seed(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for input problems, 3 for numeric or convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericInput(_)
            | Error::Bracket { .. }
            | Error::Convergence(_)
            | Error::Solver(_)
            | Error::NonConvergence { .. }
            | Error::Calibration(_) => 3,
            _ => 2,
        }
    }
}
