use serde::{Deserialize, Serialize};
use ublr::reconstruction::{
    compress, error_stream, relative_error, CompressionConfig, CompressionReport, Method, TaggingConfig, UniformBlr,
    ERROR_ITERATIONS,
};

use crate::problem::{build_problem, ProblemSpec};
use crate::Result;

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_P: usize = 10;

/// One compression run: operator parameters plus compression settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    pub k: usize,
    pub p: usize,
    pub seed: u64,
    pub tagging: TaggingConfig,
    /// Rank used to suggest `b` when the problem leaves it unset.
    pub rank_for_b: Option<usize>,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, method: Method, seed: u64) -> Self {
        Self { problem, method, k: DEFAULT_K, p: DEFAULT_P, seed, tagging: TaggingConfig::default(), rank_for_b: None }
    }

    fn compression(&self) -> CompressionConfig {
        CompressionConfig { method: self.method, k: self.k, p: self.p, seed: self.seed, tagging: self.tagging }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: CompressionReport,
    pub rep: UniformBlr,
}

/// Builds the problem, compresses it, and fills in the relative error.
pub fn run_compress(cfg: &RunConfig) -> Result<RunOutput> {
    let problem = build_problem(&cfg.problem, cfg.k, cfg.rank_for_b.unwrap_or(cfg.k), cfg.seed)?;
    let out = compress(problem.operator.as_ref(), &problem.tessellation, &problem.coloring, &cfg.compression())?;
    let mut report = out.report;
    let err = relative_error(problem.operator.as_ref(), &out.rep, ERROR_ITERATIONS, &error_stream(cfg.seed))?;
    report.relative_error = Some(err);
    Ok(RunOutput { report, rep: out.rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::OperatorKind;

    #[test]
    fn synthetic_run_is_exact_and_counted() {
        let mut spec = ProblemSpec::new(OperatorKind::Synthetic);
        spec.n = Some(96);
        spec.b = Some(8);
        let mut cfg = RunConfig::new(spec, Method::A3, 4);
        (cfg.k, cfg.p) = (2, 3);
        let out = run_compress(&cfg).unwrap();
        assert!(out.report.relative_error.unwrap() <= 1e-9);
        assert_eq!(out.report.matvecs.phase_i, 2 * 8 * 5);
    }
}
