use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use ublr::linalg::{nullsp, Vector};
use ublr::tagging::{
    aspect_ratio, make_tagging_matrix, null_basis, optimize_null_vector, projected_tags, TagDistribution, TaggingMatrix,
};
use ublr::tessellation::{build_tessellation, PointCloud, Tessellation};
use ublr::{Error, RandomStream};

use crate::{BenchError, Result};

pub const ASPECT_HEADER: [&str; 11] = [
    "kind",
    "b",
    "d",
    "distribution",
    "extra_cols",
    "seed",
    "block_id",
    "nullity",
    "rho_base",
    "rho_optimized",
    "error",
];

/// Same stream the compression driver uses for its first tagging draw.
const STREAM_TAGS: u64 = 1;

#[derive(Clone, Debug)]
pub struct AspectGrid {
    pub bs: Vec<usize>,
    pub d: usize,
    pub distributions: Vec<TagDistribution>,
    pub extra_cols: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// A per-block row (`kind = "block"`) or a per-group quartile row
/// (`summary_q1`, `summary_median`, `summary_q3`). Block ids are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AspectRow {
    pub kind: String,
    pub b: usize,
    pub d: usize,
    pub distribution: TagDistribution,
    pub extra_cols: usize,
    pub seed: Option<u64>,
    pub block_id: Option<usize>,
    pub nullity: Option<usize>,
    pub rho_base: Option<f64>,
    pub rho_optimized: Option<f64>,
    pub error: Option<String>,
}

/// Full `b`-box grid in `d` dimensions with one point per box.
fn box_grid(b: usize, d: usize) -> Result<Tessellation> {
    let per_axis = (b as f64).powf(1.0 / d as f64).round() as usize;
    if per_axis.pow(d as u32) != b {
        return Err(BenchError::Config(format!("`b` = {b} is not a {d}-th power")));
    }
    let coords = (0..b)
        .flat_map(|cell| (0..d).map(move |a| ((cell / per_axis.pow(a as u32)) % per_axis) as f64 + 0.5))
        .map(|c| c / per_axis as f64)
        .collect();
    Ok(build_tessellation(&PointCloud::new(d, coords)?, b)?)
}

fn finite(x: f64) -> (Option<f64>, Option<String>) {
    if x.is_finite() {
        (Some(x), None)
    } else {
        (None, Some("infinite aspect ratio".into()))
    }
}

/// Base and optimized aspect ratios of every block for one tagging matrix.
///
/// Blocks whose neighbor rows are rank deficient fall back to an arbitrary
/// null vector and carry a `degenerate tags` marker.
pub fn aspect_rows(t: &TaggingMatrix, tess: &Tessellation, seed: Option<u64>) -> Vec<AspectRow> {
    (0..tess.num_blocks())
        .into_par_iter()
        .map(|i| {
            let mut row = AspectRow {
                kind: "block".into(),
                b: tess.num_blocks(),
                d: tess.dim(),
                distribution: t.distribution(),
                extra_cols: t.extra_cols(),
                seed,
                block_id: Some(i + 1),
                nullity: None,
                rho_base: None,
                rho_optimized: None,
                error: None,
            };
            let rho = |z: &Vector| aspect_ratio(&projected_tags(t, z), tess, i).map_err(describe);
            let (base, opt) = match null_basis(t, tess, i) {
                Ok(basis) => {
                    row.nullity = Some(basis.ncols());
                    let x1 = basis.column(0).into_owned();
                    let opt = if t.extra_cols() >= 1 {
                        optimize_null_vector(t, tess, i).map_err(describe).and_then(|nv| rho(&nv.z))
                    } else {
                        rho(&x1)
                    };
                    (rho(&x1), opt)
                }
                Err(Error::DegenerateTags { .. }) => {
                    row.error = Some("degenerate tags".into());
                    let rows = t.rows(tess.neighbors(i));
                    let r = nullsp(&rows, 1).map_err(describe).and_then(|z| rho(&z.column(0).into_owned()));
                    (r.clone(), r)
                }
                Err(e) => (Err(describe(e)), Err(String::new())),
            };
            match (base, opt) {
                (Ok(b), Ok(o)) => {
                    let (rb, eb) = finite(b);
                    let (ro, eo) = finite(o);
                    row.rho_base = rb;
                    row.rho_optimized = ro;
                    row.error = row.error.take().or(eb).or(eo);
                }
                (Err(e), _) | (_, Err(e)) => row.error = Some(e),
            }
            row
        })
        .collect()
}

fn describe(e: Error) -> String {
    match e {
        Error::EmptyFarField(_) => "empty far field".into(),
        other => other.to_string(),
    }
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summary_rows(group: &[AspectRow]) -> Vec<AspectRow> {
    let first = &group[0];
    let sorted = |f: fn(&AspectRow) -> Option<f64>| {
        let mut v: Vec<f64> = group.iter().filter_map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let base = sorted(|r| r.rho_base);
    let opt = sorted(|r| r.rho_optimized);
    [("summary_q1", 0.25), ("summary_median", 0.5), ("summary_q3", 0.75)]
        .into_iter()
        .map(|(kind, q)| {
            let at = |v: &[f64]| (!v.is_empty()).then(|| quantile(v, q));
            AspectRow {
                kind: kind.into(),
                b: first.b,
                d: first.d,
                distribution: first.distribution,
                extra_cols: first.extra_cols,
                seed: None,
                block_id: None,
                nullity: None,
                rho_base: at(&base),
                rho_optimized: at(&opt),
                error: (base.is_empty() || opt.is_empty()).then(|| "no finite aspect ratios".into()),
            }
        })
        .collect()
}

/// Block rows for every `(b, distribution, extra_cols, seed)`, each group of
/// seeds followed by its quartile rows.
pub fn aspect_study(grid: &AspectGrid) -> Result<Vec<AspectRow>> {
    let mut out = Vec::new();
    for &b in &grid.bs {
        let tess = box_grid(b, grid.d)?;
        for &distribution in &grid.distributions {
            for &extra in &grid.extra_cols {
                let mut group = Vec::new();
                for &seed in &grid.seeds {
                    let stream = RandomStream::new(seed).child2(STREAM_TAGS, 0);
                    let t = make_tagging_matrix(b, grid.d, extra, distribution, &stream)?;
                    group.extend(aspect_rows(&t, &tess, Some(seed)));
                }
                if !group.is_empty() {
                    let summary = summary_rows(&group);
                    out.extend(group);
                    out.extend(summary);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_aspect_csv(rows: &[AspectRow], w: impl Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(ASPECT_HEADER)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
