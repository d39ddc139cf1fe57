//! Steps II and III: core and near-field recovery, the compressed format,
//! and the end-to-end compression driver.

mod container;
mod format;
mod report;
pub mod type_a;
pub mod type_b;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{self, BlockBases, TaggingOptions};
use crate::error::{Error, Result};
use crate::linalg::{gather_rows, gaussian, spectral_norm_estimate, tr_mul, Matrix, RandomStream};
use crate::operators::{CountingOperator, LinearOperator, Phase};
use crate::tagging::{self, BlockTags, TagDistribution, TaggingMatrix};
use crate::tessellation::{BoxColoring, Tessellation};

pub use container::{read_container, write_container};
pub use format::{DifferenceOperator, UniformBlr};
pub use report::{AspectSummary, CompressionReport, ConfigEcho, MatvecSummary, PhaseTimes};

/// Redraws of the tagging matrix allowed before proceeding with a warning.
pub const MAX_TAG_REDRAWS: usize = 5;

/// Power-method iterations used for error estimates.
pub const ERROR_ITERATIONS: usize = 20;

/// Basis scheme and reconstruction family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Block nullification, direct probing.
    A1,
    /// Tagging, direct probing.
    A2,
    /// Naive blocked range finder, direct probing.
    A3,
    /// Block nullification, sketch-only recovery.
    B1,
    /// Tagging with wide generators, sketch-only recovery.
    B2,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::A1, Method::A2, Method::A3, Method::B1, Method::B2];

    pub fn uses_tagging(self) -> bool {
        matches!(self, Method::A2 | Method::B2)
    }

    pub fn is_type_b(self) -> bool {
        matches!(self, Method::B1 | Method::B2)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Self::A1),
            "A2" => Ok(Self::A2),
            "A3" => Ok(Self::A3),
            "B1" => Ok(Self::B1),
            "B2" => Ok(Self::B2),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Tagging-matrix settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggingConfig {
    pub distribution: TagDistribution,
    pub extra_cols: usize,
    pub optimize: bool,
    pub extra_samples: bool,
}

impl Default for TaggingConfig {
    fn default() -> Self {
        Self { distribution: TagDistribution::Gaussian, extra_cols: 0, optimize: false, extra_samples: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressionConfig {
    pub method: Method,
    pub k: usize,
    pub p: usize,
    pub seed: u64,
    pub tagging: TaggingConfig,
}

impl CompressionConfig {
    pub fn new(method: Method, k: usize, p: usize, seed: u64) -> Self {
        Self { method, k, p, seed, tagging: TaggingConfig::default() }
    }
}

/// Output of [`compress`].
#[derive(Clone, Debug)]
pub struct Compressed {
    pub rep: UniformBlr,
    pub report: CompressionReport,
    /// Tagging matrix and per-block null vectors, for tagged methods.
    pub tags: Option<(TaggingMatrix, Vec<BlockTags>)>,
}

/// `U Ã V* X` (or its adjoint) for block-diagonal `U`, `V`.
pub(crate) fn lowrank_apply(
    tess: &Tessellation,
    u: &[Matrix],
    v: &[Matrix],
    core: &Matrix,
    x: &Matrix,
    adjoint: bool,
) -> Matrix {
    let (left, right) = if adjoint { (v, u) } else { (u, v) };
    let offsets = type_a::offsets(&right.iter().map(|q| q.ncols()).collect::<Vec<_>>());
    let kk = *offsets.last().unwrap_or(&0);
    let mut w = Matrix::zeros(kk, x.ncols());
    for (i, q) in right.iter().enumerate() {
        w.rows_mut(offsets[i], q.ncols()).copy_from(&tr_mul(q, &gather_rows(x, tess.block(i))));
    }
    let c = if adjoint { tr_mul(core, &w) } else { core * w };
    let parts: Vec<Matrix> =
        (0..tess.num_blocks()).into_par_iter().map(|i| &left[i] * c.rows(offsets[i], left[i].ncols())).collect();
    let mut out = Matrix::zeros(tess.n(), x.ncols());
    for (i, part) in parts.iter().enumerate() {
        for (r, &row) in tess.block(i).iter().enumerate() {
            for col in 0..x.ncols() {
                out[(row, col)] = part[(r, col)];
            }
        }
    }
    out
}

// Stream labels, fixed so runs are reproducible.
const STREAM_TAGS: u64 = 1;
const STREAM_SKETCH: u64 = 2;
const STREAM_AUGMENT: u64 = 3;

/// Draws a tagging matrix, redrawing while some block's aspect ratio is
/// unusable or the matrix is degenerate for the chosen method.
fn draw_tags(
    tess: &Tessellation,
    cfg: &CompressionConfig,
    root: &RandomStream,
    warnings: &mut Vec<String>,
) -> Result<(TaggingMatrix, Vec<BlockTags>, usize)> {
    let tc = cfg.tagging;
    let mut last_err = None;
    for attempt in 0..=MAX_TAG_REDRAWS {
        let stream = root.child2(STREAM_TAGS, attempt as u64);
        let t = tagging::make_tagging_matrix(tess.num_blocks(), tess.dim(), tc.extra_cols, tc.distribution, &stream)?;
        let tags = match tagging::block_tags(&t, tess, tc.optimize) {
            Ok(tags) => tags,
            Err(e @ Error::DegenerateTags { .. }) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        if cfg.method == Method::B2 {
            let pairs = (0..tess.num_blocks())
                .flat_map(|i| tess.neighbors(i).iter().map(move |&j| (i, j)))
                .try_for_each(|(i, j)| tagging::pair_null_vector(&t, tess, i, j).map(|_| ()));
            if let Err(e) = pairs {
                last_err = Some(e);
                continue;
            }
        }
        if tagging::needs_redraw(&tags) {
            if attempt == MAX_TAG_REDRAWS {
                warnings.push(format!(
                    "aspect ratio above {:.0e} after {MAX_TAG_REDRAWS} redraws",
                    tagging::ASPECT_REDRAW_THRESHOLD
                ));
                return Ok((t, tags, attempt));
            }
            continue;
        }
        return Ok((t, tags, attempt));
    }
    Err(last_err.expect("loop exits early unless every draw was degenerate"))
}

/// Compresses `op` into uniform BLR form with the selected method, counting
/// every product with `A` and `A*` by phase.
pub fn compress(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    coloring: &BoxColoring,
    cfg: &CompressionConfig,
) -> Result<Compressed> {
    if op.nrows() != tess.n() || op.ncols() != tess.n() {
        return Err(Error::Shape(format!(
            "operator is {}x{} but the tessellation covers {} indices",
            op.nrows(),
            op.ncols(),
            tess.n()
        )));
    }
    let counted = CountingOperator::new(op);
    let root = RandomStream::new(cfg.seed);
    let sketch_stream = root.child(STREAM_SKETCH);
    let (k, p) = (cfg.k, cfg.p);
    let r = k + p;
    let m = tess.max_block_size();
    let mut warnings = Vec::new();
    let mut times = [0.0f64; 3];

    let mut tags = None;
    let mut redraws = 0;
    if cfg.method.uses_tagging() {
        let (t, bt, n) = draw_tags(tess, cfg, &root, &mut warnings)?;
        redraws = n;
        tags = Some((t, bt));
    }

    counted.set_phase(Phase::I);
    let clock = Instant::now();
    enum Sketches {
        None,
        Plain(bases::SketchBundle),
        Tagged(bases::TaggedSketch),
    }
    let (basis, sketches, width): (BlockBases, Sketches, usize) = match cfg.method {
        Method::A1 | Method::B1 => {
            let (bb, sk) = bases::bases_block_nullification(&counted, tess, k, p, &sketch_stream)?;
            let w = sk.width();
            (bb, Sketches::Plain(sk), w)
        }
        Method::A2 | Method::B2 => {
            let (t, bt) = tags.as_ref().expect("tags drawn above");
            let group_width = if cfg.method == Method::B2 { m + p } else { r };
            let options = TaggingOptions { group_width, extra_samples: cfg.tagging.extra_samples };
            let (bb, sk) = bases::bases_tagging(&counted, tess, k, p, t, bt, options, &sketch_stream)?;
            let w = sk.bundle.width();
            (bb, Sketches::Tagged(sk), w)
        }
        Method::A3 => {
            let bb = bases::bases_naive(&counted, tess, k, p, &sketch_stream)?;
            (bb, Sketches::None, tess.num_blocks() * r)
        }
    };
    times[0] = clock.elapsed().as_secs_f64();

    let (core, near) = if !cfg.method.is_type_b() {
        counted.set_phase(Phase::II);
        let clock = Instant::now();
        let core = type_a::atilde_direct(&counted, tess, &basis);
        times[1] = clock.elapsed().as_secs_f64();
        counted.set_phase(Phase::III);
        let clock = Instant::now();
        let near = type_a::discrepancy_structured_ids(&counted, tess, &basis, &core, coloring)?;
        times[2] = clock.elapsed().as_secs_f64();
        (core, near)
    } else {
        counted.set_phase(Phase::III);
        let clock = Instant::now();
        let (disc, bundle) = match &sketches {
            Sketches::Plain(sk) => (type_b::discrepancy_bn(tess, sk, &basis)?, sk),
            Sketches::Tagged(sk) => {
                let (t, _) = tags.as_ref().expect("tags drawn above");
                (type_b::discrepancy_tagging(tess, sk, &basis, t)?, &sk.bundle)
            }
            Sketches::None => unreachable!("type B always keeps its sketches"),
        };
        warnings.extend(disc.warnings());
        times[2] = clock.elapsed().as_secs_f64();

        counted.set_phase(Phase::II);
        let clock = Instant::now();
        let kk: usize = basis.ranks().iter().sum();
        let extra = (kk + p).saturating_sub(bundle.width());
        let (core, cond) = if extra > 0 {
            let aug = gaussian(tess.n(), extra, &root.child(STREAM_AUGMENT));
            let y_aug = counted.apply(&aug);
            let omega = concat_columns(&bundle.omega, &aug);
            let y = concat_columns(&bundle.y, &y_aug);
            type_b::atilde_from_sketch(tess, &basis, &disc.near, &omega, &y)
        } else {
            type_b::atilde_from_sketch(tess, &basis, &disc.near, &bundle.omega, &bundle.y)
        };
        if cond > crate::linalg::CONDITION_WARNING {
            warnings.push(format!("V* Omega has condition number {cond:.3e}"));
        }
        times[1] = clock.elapsed().as_secs_f64();
        (core, disc.near)
    };

    let rep = UniformBlr::new(tess.clone(), coloring.clone(), k, basis.u, basis.v, core, near)?;
    let ledger = counted.ledger();
    let ell = tags.as_ref().map(|(t, _)| t.ell());
    let aspect = tags.as_ref().map(|(_, bt)| AspectSummary::from_tags(bt));
    let report = CompressionReport {
        method: cfg.method,
        config: ConfigEcho {
            n: tess.n(),
            b: tess.num_blocks(),
            m,
            k,
            p,
            d: tess.dim(),
            ell,
            seed: cfg.seed,
            sketch_width: width,
            distribution: cfg.method.uses_tagging().then_some(cfg.tagging.distribution),
            extra_cols: cfg.tagging.extra_cols,
            optimize: cfg.tagging.optimize,
            extra_samples: cfg.tagging.extra_samples,
        },
        matvecs: MatvecSummary::from_ledger(ledger),
        times: PhaseTimes::from_seconds(times),
        relative_error: None,
        aspect,
        storage: rep.storage(),
        tag_redraws: redraws,
        warnings,
    };
    Ok(Compressed { rep, report, tags })
}

fn concat_columns(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `‖A − Â‖ / ‖A‖`, both norms estimated by the power method with the same
/// starting vector.
pub fn relative_error(
    op: &dyn LinearOperator,
    rep: &dyn LinearOperator,
    iterations: usize,
    stream: &RandomStream,
) -> Result<f64> {
    let norm = spectral_norm_estimate(op, iterations, stream);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = DifferenceOperator { a: op, b: rep };
    Ok(spectral_norm_estimate(&diff, iterations, stream) / norm)
}

/// Seed-derived stream for error estimation, independent of compression.
pub fn error_stream(seed: u64) -> RandomStream {
    RandomStream::new(seed).child(0xe770)
}
