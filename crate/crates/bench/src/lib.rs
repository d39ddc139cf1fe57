//! Experiment driver for uniform BLR compression: single runs, parameter
//! sweeps, and tagging aspect-ratio studies.

mod aspect;
mod problem;
mod run;
mod sweep;

pub use aspect::{aspect_rows, aspect_study, write_aspect_csv, AspectGrid, AspectRow, ASPECT_HEADER};
pub use problem::{build_problem, OperatorKind, Problem, ProblemSpec};
pub use run::{run_compress, RunConfig, RunOutput, DEFAULT_K, DEFAULT_P};
pub use sweep::{run_sweep, write_sweep_csv, SweepGrid, SweepRow, SWEEP_HEADER};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code when a tolerance is exceeded or the numerics break down.
pub const EXIT_NUMERICAL: i32 = 1;
/// Exit code for invalid configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn missing(field: &str, op: OperatorKind) -> Self {
        BenchError::Config(format!("missing required field `{field}` for operator `{op}`"))
    }
}

impl From<ublr::Error> for BenchError {
    fn from(e: ublr::Error) -> Self {
        use ublr::Error as E;
        match e {
            E::InvalidDimension(_)
            | E::NotAPower { .. }
            | E::PointOutOfRange { .. }
            | E::InvalidArgument(_)
            | E::RankTooLarge { .. } => BenchError::Config(e.to_string()),
            E::Io(io) => BenchError::Io(io),
            other => BenchError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
