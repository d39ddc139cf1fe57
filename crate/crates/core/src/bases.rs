//! Step I: per-block orthonormal bases from sketches of `A` and `A*`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{col, gather_rows, gaussian, nullsp, Matrix, RandomStream, Vector};
use crate::operators::LinearOperator;
use crate::tagging::{BlockTags, TaggingMatrix};
use crate::tessellation::Tessellation;

/// Column and row bases for every block.
#[derive(Clone, Debug)]
pub struct BlockBases {
    pub u: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl BlockBases {
    pub fn ranks(&self) -> Vec<usize> {
        self.u.iter().map(|u| u.ncols()).collect()
    }
}

/// Test matrices and the sketches `Y = A Ω`, `Z = A* Ψ`.
#[derive(Clone, Debug)]
pub struct SketchBundle {
    pub omega: Matrix,
    pub psi: Matrix,
    pub y: Matrix,
    pub z: Matrix,
}

impl SketchBundle {
    pub fn width(&self) -> usize {
        self.omega.ncols()
    }
}

/// Tagged sketches: `Ω(I_i, group c) = t_{i,c} G_i` and likewise for `Ψ`
/// with `H_i`, every group `w` columns wide.
#[derive(Clone, Debug)]
pub struct TaggedSketch {
    pub bundle: SketchBundle,
    pub g: Vec<Matrix>,
    pub h: Vec<Matrix>,
    pub group_width: usize,
}

impl TaggedSketch {
    /// `Σ_c α_c S(I_i, group c)` for a sketch `S` of this layout.
    pub fn combine(&self, s: &Matrix, rows: &[usize], alpha: &Vector) -> Matrix {
        let w = self.group_width;
        let si = gather_rows(s, rows);
        let mut out = Matrix::zeros(rows.len(), w);
        for (c, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                out += si.columns(c * w, w) * a;
            }
        }
        out
    }
}

/// `k_i = min(k, m_i)`; fails when `k` reaches the largest block size.
pub fn block_ranks(tess: &Tessellation, k: usize) -> Result<Vec<usize>> {
    let m = tess.max_block_size();
    if k >= m {
        return Err(Error::RankTooLarge { k, m });
    }
    Ok(tess.block_sizes().into_iter().map(|mi| mi.min(k)).collect())
}

/// Sketch width of block nullification:
/// `max(r + max_i Σ_{j∈N_i} m_j, 3^d r)`.
pub fn nullification_width(tess: &Tessellation, r: usize) -> usize {
    let near = (0..tess.num_blocks())
        .map(|i| tess.neighbors(i).iter().map(|&j| tess.block_size(j)).sum::<usize>())
        .max()
        .unwrap_or(0);
    (r + near).max(3usize.pow(tess.dim() as u32) * r)
}

fn sketch(op: &dyn LinearOperator, omega: Matrix, psi: Matrix) -> SketchBundle {
    let y = op.apply(&omega);
    let z = op.apply_adjoint(&psi);
    SketchBundle { omega, psi, y, z }
}

/// Block nullification: one pair of wide Gaussian sketches; per block the
/// neighbor rows of the test matrix are annihilated by a null-space
/// projector `P^(i)` before extracting the column space.
pub fn bases_block_nullification(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    k: usize,
    p: usize,
    stream: &RandomStream,
) -> Result<(BlockBases, SketchBundle)> {
    let ranks = block_ranks(tess, k)?;
    let r = k + p;
    let s = nullification_width(tess, r);
    let n = tess.n();
    let bundle = sketch(op, gaussian(n, s, &stream.child(0)), gaussian(n, s, &stream.child(1)));
    let side = |test: &Matrix, sk: &Matrix| -> Result<Vec<Matrix>> {
        (0..tess.num_blocks())
            .into_par_iter()
            .map(|i| {
                let proj = nullification_projector(test, tess, i, r)?;
                col(&(gather_rows(sk, tess.block(i)) * proj), ranks[i])
            })
            .collect()
    };
    let u = side(&bundle.omega, &bundle.y)?;
    let v = side(&bundle.psi, &bundle.z)?;
    Ok((BlockBases { u, v }, bundle))
}

/// `P^(i) = nullsp(Ω(∪_{j∈N_i} I_j, :), r)`.
pub fn nullification_projector(omega: &Matrix, tess: &Tessellation, i: usize, r: usize) -> Result<Matrix> {
    nullsp(&gather_rows(omega, &tess.indices_of(tess.neighbors(i))), r)
}

/// Options for tagged sketching.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaggingOptions {
    /// Columns per tag group (`k + p` for type A, `m + p` for type B).
    pub group_width: usize,
    /// Use every null direction, concatenating their combined samples.
    pub extra_samples: bool,
}

/// Builds `Ω`, `Ψ` from per-block Gaussians scaled by tags and sketches them.
pub fn tagged_sketch(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    t: &TaggingMatrix,
    group_width: usize,
    stream: &RandomStream,
) -> Result<TaggedSketch> {
    if t.num_blocks() != tess.num_blocks() {
        return Err(Error::Shape(format!(
            "tagging matrix has {} rows for {} blocks",
            t.num_blocks(),
            tess.num_blocks()
        )));
    }
    let (n, ell, w) = (tess.n(), t.ell(), group_width);
    let draw = |label: u64| -> Vec<Matrix> {
        (0..tess.num_blocks()).map(|i| gaussian(tess.block_size(i), w, &stream.child2(label, i as u64))).collect()
    };
    let (g, h) = (draw(0), draw(1));
    let assemble = |gens: &[Matrix]| {
        let mut omega = Matrix::zeros(n, ell * w);
        for (i, gi) in gens.iter().enumerate() {
            for (r, &row) in tess.block(i).iter().enumerate() {
                for c in 0..ell {
                    let tag = t.tag(i, c);
                    for q in 0..w {
                        omega[(row, c * w + q)] = tag * gi[(r, q)];
                    }
                }
            }
        }
        omega
    };
    let bundle = sketch(op, assemble(&g), assemble(&h));
    Ok(TaggedSketch { bundle, g, h, group_width: w })
}

/// Tagging: each block combines the tag groups of a single pair of
/// sketches with its null vector, cancelling every near-field contribution.
pub fn bases_tagging(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    k: usize,
    p: usize,
    t: &TaggingMatrix,
    tags: &[BlockTags],
    options: TaggingOptions,
    stream: &RandomStream,
) -> Result<(BlockBases, TaggedSketch)> {
    let ranks = block_ranks(tess, k)?;
    let w = if options.group_width == 0 { k + p } else { options.group_width };
    let sk = tagged_sketch(op, tess, t, w, stream)?;
    let side = |s: &Matrix| -> Result<Vec<Matrix>> {
        (0..tess.num_blocks())
            .into_par_iter()
            .map(|i| {
                let rows = tess.block(i);
                let sample = if options.extra_samples {
                    let basis = &tags[i].basis;
                    let parts: Vec<Matrix> =
                        basis.column_iter().map(|x| sk.combine(s, rows, &x.into_owned())).collect();
                    Matrix::from_fn(rows.len(), w * parts.len(), |r, c| parts[c / w][(r, c % w)])
                } else {
                    sk.combine(s, rows, &tags[i].z)
                };
                col(&sample, ranks[i].min(sample.ncols())).and_then(|q| pad_basis(q, ranks[i]))
            })
            .collect()
    };
    let u = side(&sk.bundle.y)?;
    let v = side(&sk.bundle.z)?;
    Ok((BlockBases { u, v }, sk))
}

/// Completes `q` to `k` orthonormal columns when the sample was too narrow.
fn pad_basis(q: Matrix, k: usize) -> Result<Matrix> {
    if q.ncols() >= k {
        return Ok(q);
    }
    let extra = nullsp(&q.transpose(), k - q.ncols())?;
    Ok(Matrix::from_fn(q.nrows(), k, |r, c| if c < q.ncols() { q[(r, c)] } else { extra[(r, c - q.ncols())] }))
}

/// Naive blocked range finding: an independent Gaussian per block with its
/// near-field rows zeroed, all pushed through the operator in one batch.
pub fn bases_naive(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    k: usize,
    p: usize,
    stream: &RandomStream,
) -> Result<BlockBases> {
    let ranks = block_ranks(tess, k)?;
    let (n, b, r) = (tess.n(), tess.num_blocks(), k + p);
    let build = |label: u64| {
        let mut omega = Matrix::zeros(n, b * r);
        for i in 0..b {
            let mut g = gaussian(n, r, &stream.child2(label, i as u64));
            for idx in tess.indices_of(tess.neighbors(i)) {
                g.row_mut(idx).fill(0.0);
            }
            omega.columns_mut(i * r, r).copy_from(&g);
        }
        omega
    };
    let bundle = sketch(op, build(0), build(1));
    let side = |s: &Matrix| -> Result<Vec<Matrix>> {
        (0..b)
            .into_par_iter()
            .map(|i| {
                let rows = tess.block(i);
                col(&Matrix::from_fn(rows.len(), r, |q, c| s[(rows[q], i * r + c)]), ranks[i])
            })
            .collect()
    };
    Ok(BlockBases { u: side(&bundle.y)?, v: side(&bundle.z)? })
}
