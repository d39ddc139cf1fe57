use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{gather_rows, tr_mul, Matrix};
use crate::operators::LinearOperator;
use crate::tessellation::{BoxColoring, Tessellation};

/// Strongly admissible uniform BLR matrix `U Ã V* + B`.
///
/// `U` and `V` are block diagonal with orthonormal `m_i × k_i` blocks, `Ã` is
/// dense `K × K` with `K = Σ k_i`, and `B` stores one dense block per
/// near-field pair: `near[i][t]` is `B_{i,j}` for `j = tess.neighbors(i)[t]`.
#[derive(Clone, Debug)]
pub struct UniformBlr {
    tess: Tessellation,
    coloring: BoxColoring,
    k: usize,
    offsets: Vec<usize>,
    u: Vec<Matrix>,
    v: Vec<Matrix>,
    core: Matrix,
    near: Vec<Vec<Matrix>>,
}

impl UniformBlr {
    pub fn new(
        tess: Tessellation,
        coloring: BoxColoring,
        k: usize,
        u: Vec<Matrix>,
        v: Vec<Matrix>,
        core: Matrix,
        near: Vec<Vec<Matrix>>,
    ) -> Result<Self> {
        let b = tess.num_blocks();
        if u.len() != b || v.len() != b || near.len() != b {
            return Err(Error::Shape(format!("expected {b} blocks in every factor")));
        }
        let mut offsets = Vec::with_capacity(b + 1);
        offsets.push(0);
        for i in 0..b {
            let m = tess.block_size(i);
            if u[i].nrows() != m || v[i].nrows() != m || u[i].ncols() != v[i].ncols() {
                return Err(Error::Shape(format!("basis block {i} has inconsistent shape")));
            }
            offsets.push(offsets[i] + u[i].ncols());
        }
        let kk = offsets[b];
        if core.shape() != (kk, kk) {
            return Err(Error::Shape(format!("core is {:?}, expected {kk}x{kk}", core.shape())));
        }
        for i in 0..b {
            let nb = tess.neighbors(i);
            if near[i].len() != nb.len() {
                return Err(Error::Shape(format!("block row {i} has {} near blocks", near[i].len())));
            }
            for (t, &j) in nb.iter().enumerate() {
                if near[i][t].shape() != (tess.block_size(i), tess.block_size(j)) {
                    return Err(Error::Shape(format!("near block ({i}, {j}) has the wrong shape")));
                }
            }
        }
        Ok(Self { tess, coloring, k, offsets, u, v, core, near })
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tess
    }

    pub fn coloring(&self) -> &BoxColoring {
        &self.coloring
    }

    /// Nominal rank requested at compression time.
    pub fn rank(&self) -> usize {
        self.k
    }

    /// Per-block ranks `k_i = min(k, m_i)`.
    pub fn block_ranks(&self) -> Vec<usize> {
        self.u.iter().map(|u| u.ncols()).collect()
    }

    /// `K = Σ k_i`.
    pub fn core_dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn core_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn u(&self, i: usize) -> &Matrix {
        &self.u[i]
    }

    pub fn v(&self, i: usize) -> &Matrix {
        &self.v[i]
    }

    pub fn core(&self) -> &Matrix {
        &self.core
    }

    /// `Ã_{i,j}`.
    pub fn core_block(&self, i: usize, j: usize) -> Matrix {
        let (ri, rj) = (self.core_range(i), self.core_range(j));
        self.core.view((ri.start, rj.start), (ri.len(), rj.len())).into_owned()
    }

    /// `B_{i,j}` for `j ∈ N_i`; `None` on the far field.
    pub fn near_block(&self, i: usize, j: usize) -> Option<&Matrix> {
        let t = self.tess.neighbors(i).binary_search(&j).ok()?;
        Some(&self.near[i][t])
    }

    pub fn near_blocks(&self) -> &[Vec<Matrix>] {
        &self.near
    }

    /// Number of stored reals: `2 Σ m_i k_i + K² + Σ_{j∈N_i} m_i m_j`.
    pub fn storage(&self) -> usize {
        let bases: usize =
            self.u.iter().map(|u| u.len()).sum::<usize>() + self.v.iter().map(|v| v.len()).sum::<usize>();
        let near: usize = self.near.iter().flatten().map(|b| b.len()).sum();
        bases + self.core.len() + near
    }

    /// `Vᵀ X` (or `Uᵀ X`), stacked over blocks.
    fn project(&self, basis: &[Matrix], x: &Matrix) -> Matrix {
        let mut w = Matrix::zeros(self.core_dim(), x.ncols());
        for (i, q) in basis.iter().enumerate() {
            let xi = gather_rows(x, self.tess.block(i));
            w.view_mut((self.offsets[i], 0), (q.ncols(), x.ncols())).copy_from(&tr_mul(q, &xi));
        }
        w
    }

    fn assemble(&self, x: &Matrix, adjoint: bool) -> Matrix {
        let n = self.tess.n();
        assert_eq!(x.nrows(), n, "uBLR apply: row mismatch");
        let (left, right) = if adjoint { (&self.v, &self.u) } else { (&self.u, &self.v) };
        let w = self.project(right, x);
        let c = if adjoint { tr_mul(&self.core, &w) } else { &self.core * w };
        let gathered: Vec<Matrix> = (0..self.tess.num_blocks()).map(|j| gather_rows(x, self.tess.block(j))).collect();
        let rows: Vec<Matrix> = (0..self.tess.num_blocks())
            .into_par_iter()
            .map(|i| {
                let ci = c.rows(self.offsets[i], left[i].ncols());
                let mut yi = &left[i] * ci;
                for &j in self.tess.neighbors(i) {
                    if adjoint {
                        let bji = self.near_block(j, i).expect("symmetric neighbors");
                        yi += tr_mul(bji, &gathered[j]);
                    } else {
                        yi += self.near_block(i, j).expect("neighbor") * &gathered[j];
                    }
                }
                yi
            })
            .collect();
        let mut out = Matrix::zeros(n, x.ncols());
        for (i, yi) in rows.iter().enumerate() {
            for (r, &row) in self.tess.block(i).iter().enumerate() {
                for c in 0..x.ncols() {
                    out[(row, c)] = yi[(r, c)];
                }
            }
        }
        out
    }

    /// Dense `N × N` matrix represented by `self`.
    pub fn to_dense(&self) -> Matrix {
        self.apply(&Matrix::identity(self.tess.n(), self.tess.n()))
    }
}

impl LinearOperator for UniformBlr {
    fn nrows(&self) -> usize {
        self.tess.n()
    }

    fn ncols(&self) -> usize {
        self.tess.n()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        self.assemble(x, false)
    }

    fn apply_adjoint(&self, y: &Matrix) -> Matrix {
        self.assemble(y, true)
    }
}

/// `A − Â` as a black box, for error estimation.
pub struct DifferenceOperator<'a> {
    pub a: &'a dyn LinearOperator,
    pub b: &'a dyn LinearOperator,
}

impl LinearOperator for DifferenceOperator<'_> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        self.a.apply(x) - self.b.apply(x)
    }

    fn apply_adjoint(&self, y: &Matrix) -> Matrix {
        self.a.apply_adjoint(y) - self.b.apply_adjoint(y)
    }
}
