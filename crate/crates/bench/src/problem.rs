use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use ublr::operators::{laplace2d_operator, slab_points, synthetic_ublr, LinearOperator, SlabSchur, SyntheticSpec};
use ublr::tessellation::{build_tessellation, color_boxes, suggest_block_count, BoxColoring, PointCloud, Tessellation};
use ublr::RandomStream;

use crate::{BenchError, Result};

const STREAM_GEOMETRY: u64 = 0x6e0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// Exact-rank uniform BLR operator with random factors.
    Synthetic,
    /// Dense 2-D Laplace kernel on uniform random points.
    Laplace2d,
    /// Frontal Schur complement of a thin 3-D Helmholtz slab.
    SlabSchur,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Synthetic => "synthetic",
            OperatorKind::Laplace2d => "laplace2d",
            OperatorKind::SlabSchur => "slab-schur",
        })
    }
}

/// Operator key and its parameter group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub op: OperatorKind,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub b: Option<usize>,
    /// Far-field rank of a synthetic operator; defaults to the compression rank.
    pub rank: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub kappa: Option<f64>,
}

impl ProblemSpec {
    pub fn new(op: OperatorKind) -> Self {
        Self { op, n: None, d: None, b: None, rank: None, nx: None, ny: None, nz: None, kappa: None }
    }

    /// Problem size, when it can be read off the parameters.
    pub fn size(&self) -> Option<usize> {
        match self.op {
            OperatorKind::SlabSchur => Some(self.nx? * self.ny?),
            _ => self.n,
        }
    }
}

pub struct Problem {
    pub tessellation: Tessellation,
    pub coloring: BoxColoring,
    pub operator: Box<dyn LinearOperator>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.tessellation.n())
            .field("b", &self.tessellation.num_blocks())
            .field("d", &self.tessellation.dim())
            .finish()
    }
}

/// Seed for the operator itself, kept apart from the compression streams.
fn problem_seed(seed: u64) -> u64 {
    RandomStream::new(seed).child(STREAM_GEOMETRY).rng().random()
}

fn per_axis_of(b: usize, d: usize) -> Result<usize> {
    let root = (b as f64).powf(1.0 / d as f64).round() as usize;
    (root.max(1)..=root + 1)
        .find(|q| q.pow(d as u32) == b)
        .or_else(|| (1..root.max(1)).rev().find(|q| q.pow(d as u32) == b))
        .ok_or_else(|| BenchError::Config(format!("`b` = {b} is not a {d}-th power")))
}

/// Builds the operator, tessellation, and coloring. When `b` is unset the
/// block count comes from `suggest_block_count(N, rank_for_b, d)`; a
/// synthetic operator without an explicit rank gets rank `k`.
pub fn build_problem(spec: &ProblemSpec, k: usize, rank_for_b: usize, seed: u64) -> Result<Problem> {
    let pseed = problem_seed(seed);
    match spec.op {
        OperatorKind::Synthetic => {
            let n = spec.n.ok_or_else(|| BenchError::missing("n", spec.op))?;
            let d = spec.d.unwrap_or(1);
            if !(1..=3).contains(&d) {
                return Err(BenchError::Config(format!("`d` must be 1, 2, or 3, got {d}")));
            }
            let b = spec.b.unwrap_or_else(|| suggest_block_count(n, rank_for_b, d));
            if b == 0 || n % b != 0 {
                return Err(BenchError::Config(format!(
                    "synthetic operators need `n` divisible by `b` (n = {n}, b = {b})"
                )));
            }
            let per_axis = per_axis_of(b, d)?;
            let syn =
                synthetic_ublr(&SyntheticSpec { dim: d, per_axis, m: n / b, k: spec.rank.unwrap_or(k), seed: pseed })?;
            Ok(Problem { tessellation: syn.tessellation, coloring: syn.coloring, operator: Box::new(syn.operator) })
        }
        OperatorKind::Laplace2d => {
            let n = spec.n.ok_or_else(|| BenchError::missing("n", spec.op))?;
            if let Some(d) = spec.d.filter(|&d| d != 2) {
                return Err(BenchError::Config(format!("laplace2d requires `d` = 2, got {d}")));
            }
            let points = PointCloud::uniform(n, 2, &RandomStream::new(pseed))?;
            let b = spec.b.unwrap_or_else(|| suggest_block_count(n, rank_for_b, 2));
            per_axis_of(b, 2)?;
            let tessellation = build_tessellation(&points, b)?;
            let operator = laplace2d_operator(&points)?;
            let coloring = color_boxes(&tessellation);
            Ok(Problem { tessellation, coloring, operator: Box::new(operator) })
        }
        OperatorKind::SlabSchur => {
            let nx = spec.nx.ok_or_else(|| BenchError::missing("nx", spec.op))?;
            let ny = spec.ny.ok_or_else(|| BenchError::missing("ny", spec.op))?;
            let nz = spec.nz.ok_or_else(|| BenchError::missing("nz", spec.op))?;
            if let Some(d) = spec.d.filter(|&d| d != 2) {
                return Err(BenchError::Config(format!("slab-schur fronts are 2-D, got `d` = {d}")));
            }
            if let Some(n) = spec.n.filter(|&n| n != nx * ny) {
                return Err(BenchError::Config(format!("`n` = {n} disagrees with nx*ny = {}", nx * ny)));
            }
            let kappa = spec.kappa.unwrap_or_else(SlabSchur::default_kappa);
            let operator = SlabSchur::new(nx, ny, nz, kappa)?;
            let points = slab_points(nx, ny)?;
            let b = spec.b.unwrap_or_else(|| suggest_block_count(nx * ny, rank_for_b, 2));
            per_axis_of(b, 2)?;
            let tessellation = build_tessellation(&points, b)?;
            let coloring = color_boxes(&tessellation);
            Ok(Problem { tessellation, coloring, operator: Box::new(operator) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_fields_are_named() {
        let err = build_problem(&ProblemSpec::new(OperatorKind::Laplace2d), 30, 30, 1).unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
        let mut spec = ProblemSpec::new(OperatorKind::SlabSchur);
        spec.nx = Some(4);
        let err = build_problem(&spec, 30, 30, 1).unwrap_err();
        assert!(err.to_string().contains("`ny`"), "{err}");
        assert_eq!(err.exit_code(), crate::EXIT_CONFIG);
    }

    #[test]
    fn powers() {
        assert_eq!(per_axis_of(81, 2).unwrap(), 9);
        assert_eq!(per_axis_of(27, 3).unwrap(), 3);
        assert_eq!(per_axis_of(8, 1).unwrap(), 8);
        assert!(per_axis_of(8, 2).is_err());
    }

    #[test]
    fn synthetic_sizes() {
        let mut spec = ProblemSpec::new(OperatorKind::Synthetic);
        spec.n = Some(96);
        spec.b = Some(8);
        let p = build_problem(&spec, 2, 2, 3).unwrap();
        assert_eq!(p.tessellation.num_blocks(), 8);
        assert_eq!(p.operator.nrows(), 96);
        spec.n = Some(97);
        assert!(matches!(build_problem(&spec, 2, 2, 3), Err(BenchError::Config(_))));
    }

    #[test]
    fn slab_front_size() {
        let mut spec = ProblemSpec::new(OperatorKind::SlabSchur);
        (spec.nx, spec.ny, spec.nz) = (Some(8), Some(8), Some(3));
        spec.b = Some(16);
        let p = build_problem(&spec, 4, 4, 1).unwrap();
        assert_eq!(p.operator.nrows(), 64);
        assert_eq!(p.tessellation.num_blocks(), 16);
    }
}
