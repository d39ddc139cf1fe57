use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use ublr::reconstruction::{Method, TaggingConfig};
use ublr::tagging::TagDistribution;

use crate::problem::{OperatorKind, ProblemSpec};
use crate::run::{run_compress, RunConfig};
use crate::{BenchError, Result};

pub const SWEEP_HEADER: [&str; 19] = [
    "N",
    "b",
    "m",
    "k",
    "p",
    "d",
    "method",
    "distribution",
    "extra_cols",
    "seed",
    "matvecs_I",
    "matvecs_II",
    "matvecs_III",
    "matvecs_total",
    "time_I_s",
    "time_II_s",
    "time_III_s",
    "rel_error",
    "error",
];

/// Cartesian grid of runs. Any empty axis makes the grid empty. Tagging axes
/// only expand tagged methods. `ns = None` is only valid for slab operators,
/// whose size follows from `nx` and `ny`.
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub base: ProblemSpec,
    pub ns: Option<Vec<usize>>,
    pub ks: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub distributions: Vec<TagDistribution>,
    pub extra_cols: Vec<usize>,
    pub p: usize,
    pub optimize: bool,
    pub extra_samples: bool,
}

/// One CSV row; numeric fields are empty when the run failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub b: Option<usize>,
    pub m: Option<usize>,
    pub k: usize,
    pub p: usize,
    pub d: Option<usize>,
    pub method: Method,
    pub distribution: Option<TagDistribution>,
    pub extra_cols: Option<usize>,
    pub seed: u64,
    #[serde(rename = "matvecs_I")]
    pub matvecs_i: Option<u64>,
    #[serde(rename = "matvecs_II")]
    pub matvecs_ii: Option<u64>,
    #[serde(rename = "matvecs_III")]
    pub matvecs_iii: Option<u64>,
    pub matvecs_total: Option<u64>,
    #[serde(rename = "time_I_s")]
    pub time_i_s: Option<f64>,
    #[serde(rename = "time_II_s")]
    pub time_ii_s: Option<f64>,
    #[serde(rename = "time_III_s")]
    pub time_iii_s: Option<f64>,
    pub rel_error: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    /// The row with wall-clock columns cleared.
    pub fn without_timings(&self) -> Self {
        Self { time_i_s: None, time_ii_s: None, time_iii_s: None, ..self.clone() }
    }
}

impl SweepGrid {
    /// Expands the grid in a fixed order: N, k, method, seed, distribution,
    /// extra columns.
    pub fn configs(&self) -> Result<Vec<RunConfig>> {
        let sizes: Vec<Option<usize>> = match (&self.ns, self.base.op) {
            (Some(ns), _) => ns.iter().map(|&n| Some(n)).collect(),
            (None, OperatorKind::SlabSchur) => vec![None],
            (None, op) => return Err(BenchError::missing("n", op)),
        };
        let rank_for_b = self.ks.iter().copied().max();
        let mut out = Vec::new();
        for &n in &sizes {
            for &k in &self.ks {
                for &method in &self.methods {
                    for &seed in &self.seeds {
                        let tagging: Vec<TaggingConfig> = if method.uses_tagging() {
                            self.distributions
                                .iter()
                                .flat_map(|&distribution| {
                                    self.extra_cols.iter().map(move |&extra_cols| TaggingConfig {
                                        distribution,
                                        extra_cols,
                                        optimize: self.optimize,
                                        extra_samples: self.extra_samples,
                                    })
                                })
                                .collect()
                        } else {
                            vec![TaggingConfig::default()]
                        };
                        for tagging in tagging {
                            let mut problem = self.base.clone();
                            if n.is_some() {
                                problem.n = n;
                            }
                            out.push(RunConfig { problem, method, k, p: self.p, seed, tagging, rank_for_b });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn sweep_row(cfg: &RunConfig) -> SweepRow {
    let tagged = cfg.method.uses_tagging();
    let mut row = SweepRow {
        n: cfg.problem.size(),
        b: cfg.problem.b,
        m: None,
        k: cfg.k,
        p: cfg.p,
        d: cfg.problem.d,
        method: cfg.method,
        distribution: tagged.then_some(cfg.tagging.distribution),
        extra_cols: tagged.then_some(cfg.tagging.extra_cols),
        seed: cfg.seed,
        matvecs_i: None,
        matvecs_ii: None,
        matvecs_iii: None,
        matvecs_total: None,
        time_i_s: None,
        time_ii_s: None,
        time_iii_s: None,
        rel_error: None,
        error: None,
    };
    match run_compress(cfg) {
        Ok(out) => {
            let r = out.report;
            row.n = Some(r.config.n);
            row.b = Some(r.config.b);
            row.m = Some(r.config.m);
            row.d = Some(r.config.d);
            row.matvecs_i = Some(r.matvecs.phase_i);
            row.matvecs_ii = Some(r.matvecs.phase_ii);
            row.matvecs_iii = Some(r.matvecs.phase_iii);
            row.matvecs_total = Some(r.matvecs.total);
            row.time_i_s = Some(r.times.phase_i_s);
            row.time_ii_s = Some(r.times.phase_ii_s);
            row.time_iii_s = Some(r.times.phase_iii_s);
            match r.relative_error {
                Some(e) if e.is_finite() => row.rel_error = Some(e),
                _ => row.error = Some("non-finite relative error".into()),
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every configuration of the grid. `jobs > 1` runs configurations in
/// parallel; row order and contents do not depend on `jobs`.
pub fn run_sweep(grid: &SweepGrid, jobs: usize) -> Result<Vec<SweepRow>> {
    let configs = grid.configs()?;
    if jobs <= 1 {
        return Ok(configs.iter().map(sweep_row).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {jobs} jobs: {e}")))?;
    Ok(pool.install(|| configs.par_iter().map(sweep_row).collect()))
}

pub fn write_sweep_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(SWEEP_HEADER)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SweepGrid {
        let mut base = ProblemSpec::new(OperatorKind::Synthetic);
        base.b = Some(8);
        SweepGrid {
            base,
            ns: Some(vec![96]),
            ks: vec![2],
            methods: vec![Method::A1, Method::A2],
            seeds: vec![1],
            distributions: vec![TagDistribution::Gaussian, TagDistribution::Haar],
            extra_cols: vec![0],
            p: 3,
            optimize: false,
            extra_samples: false,
        }
    }

    #[test]
    fn tagging_axes_expand_tagged_methods_only() {
        assert_eq!(grid().configs().unwrap().len(), 3);
    }

    #[test]
    fn empty_grid_gives_header_only() {
        let mut g = grid();
        g.methods.clear();
        let rows = run_sweep(&g, 1).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SWEEP_HEADER.join(",") + "\n");
        g = grid();
        g.ns = None;
        assert!(matches!(g.configs(), Err(BenchError::Config(_))));
    }

    #[test]
    fn failures_become_rows() {
        let mut g = grid();
        g.ks = vec![2, 40];
        let rows = run_sweep(&g, 2).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[..3].iter().all(|r| r.error.is_none() && r.rel_error.unwrap() < 1e-9));
        assert!(rows[3..].iter().all(|r| r.error.is_some() && r.rel_error.is_none()));
    }
}
