//! Dense kernels shared by every compression algorithm.
//!
//! All matrices are column-major `nalgebra::DMatrix<f64>`.

mod qr;
mod rng;
mod svd;

pub use qr::HouseholderQr;
pub use rng::RandomStream;
pub use svd::Svd;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operators::LinearOperator;

pub type Matrix = DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Relative singular-value cutoff used by [`pinv`] when callers have no
/// better choice.
pub const DEFAULT_PINV_RTOL: f64 = 1e-12;

/// Condition number above which pseudoinverse-based recoveries are flagged.
pub const CONDITION_WARNING: f64 = 1e8;

const NULLSPACE_RTOL: f64 = 1e-12;

/// Orthonormal basis for the dominant `k`-dimensional column space of `b`.
///
/// A Householder QR is truncated through an SVD of its (small) triangular
/// factor, so every column of `b` contributes rather than only the first `k`.
/// When `rank(b) ≤ k` the span equals the column space of `b`.
pub fn col(b: &Matrix, k: usize) -> Result<Matrix> {
    let (m, n) = b.shape();
    if k > m.min(n) {
        return Err(Error::InvalidArgument(format!("col: rank {k} exceeds matrix dimensions {m}x{n}")));
    }
    if k == 0 {
        return Ok(Matrix::zeros(m, 0));
    }
    let qr = HouseholderQr::new(b.clone());
    let p = m.min(n);
    let ur = Svd::new(&qr.r()).u;
    let mut w = Matrix::zeros(m, k);
    w.view_mut((0, 0), (p, k)).copy_from(&ur.columns(0, k));
    qr.apply_q(&mut w);
    Ok(w)
}

/// `k` orthonormal vectors in the null space of `b`: the last `k` columns of
/// the full Q factor of `bᵀ`.
pub fn nullsp(b: &Matrix, k: usize) -> Result<Matrix> {
    let n = b.ncols();
    if k > n {
        return Err(Error::InvalidArgument(format!("nullsp: {k} vectors requested from a space of dimension {n}")));
    }
    let z = HouseholderQr::new(b.transpose()).q_columns(n - k, k);
    let residual = if b.nrows() == 0 { 0.0 } else { (b * &z).norm() };
    if residual > NULLSPACE_RTOL * b.norm().max(1.0) {
        return Err(Error::InsufficientNullity { requested: k, residual });
    }
    Ok(z)
}

/// Moore–Penrose pseudoinverse by SVD; singular values below
/// `rel_tol · σ_max` are dropped.
pub fn pinv(b: &Matrix, rel_tol: f64) -> Matrix {
    let (m, n) = b.shape();
    if m == 0 || n == 0 {
        return Matrix::zeros(n, m);
    }
    let svd = Svd::new(b);
    let r = svd.rank(rel_tol);
    let mut vs = svd.v.columns(0, r).into_owned();
    for (c, s) in svd.s.iter().take(r).enumerate() {
        vs.column_mut(c).unscale_mut(*s);
    }
    vs * svd.u.columns(0, r).transpose()
}

/// Computes `x · w†` for a wide matrix `w` (rows ≤ cols) through a QR
/// factorization of `wᵀ`. Falls back to the SVD pseudoinverse when `w` is
/// tall or numerically rank deficient. Returns the product together with the
/// estimated condition number of `w` (ratio of extreme |R| diagonal entries).
pub fn right_pinv_apply(x: &Matrix, w: &Matrix) -> (Matrix, f64) {
    assert_eq!(x.ncols(), w.ncols(), "right_pinv_apply: column mismatch");
    let (p, q) = w.shape();
    if p == 0 {
        return (Matrix::zeros(x.nrows(), 0), 1.0);
    }
    if p <= q {
        let qr = HouseholderQr::new(w.transpose());
        let diag = qr.r_diagonal();
        let dmax = diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let dmin = diag.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
        if cond < 1e12 {
            // x w† = x Q R⁻ᵀ, i.e. solve R yᵀ = (Qᵀ xᵀ)[..p].
            let mut xt = x.transpose();
            qr.apply_qt(&mut xt);
            let rhs = xt.rows(0, p).into_owned();
            let r = qr.r().columns(0, p).into_owned();
            let yt = r.solve_upper_triangular(&rhs).expect("nonzero diagonal checked above");
            return (yt.transpose(), cond);
        }
    }
    let svd = Svd::new(w);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let smin = svd.s.last().copied().unwrap_or(0.0);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (x * pinv(w, DEFAULT_PINV_RTOL), cond)
}

/// `rows × cols` matrix of i.i.d. standard normal entries, filled in
/// column-major order.
pub fn gaussian(rows: usize, cols: usize, stream: &RandomStream) -> Matrix {
    let mut rng = stream.rng();
    Matrix::from_iterator(rows, cols, (&mut rng).sample_iter::<f64, _>(StandardNormal).take(rows * cols))
}

/// Randomized power-method lower estimate of `‖op‖₂`, iterating on `op* op`.
///
/// The returned value is the largest `‖op x‖` seen over the iterates, which
/// makes it nondecreasing in `iterations` for a fixed stream.
pub fn spectral_norm_estimate(op: &dyn LinearOperator, iterations: usize, stream: &RandomStream) -> f64 {
    let n = op.ncols();
    if n == 0 || op.nrows() == 0 {
        return 0.0;
    }
    let mut x = gaussian(n, 1, stream);
    let nx = x.norm();
    if nx == 0.0 {
        return 0.0;
    }
    x /= nx;
    let mut estimate: f64 = 0.0;
    for _ in 0..iterations.max(1) {
        let y = op.apply(&x);
        estimate = estimate.max(y.norm());
        let z = op.apply_adjoint(&y);
        let nz = z.norm();
        if nz == 0.0 {
            return estimate;
        }
        x = z / nz;
    }
    estimate.max(op.apply(&x).norm())
}

/// Rows `idx` of `x`, in order.
pub fn gather_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

/// `target[idx[r], :] += src[r, :]`.
pub fn scatter_add_rows(target: &mut Matrix, idx: &[usize], src: &Matrix) {
    debug_assert_eq!(idx.len(), src.nrows());
    for c in 0..src.ncols() {
        for (r, &row) in idx.iter().enumerate() {
            target[(row, c)] += src[(r, c)];
        }
    }
}

/// `aᵀ b`. Wide right-hand sides go through the blocked product; nalgebra's
/// `tr_mul` is unblocked and only competitive for a few columns.
pub fn tr_mul(a: &Matrix, b: &Matrix) -> Matrix {
    if b.ncols() <= 4 {
        a.tr_mul(b)
    } else {
        (b.transpose() * a).transpose()
    }
}

/// `(I - u uᵀ) x` for `u` with orthonormal columns.
pub fn project_out(u: &Matrix, x: &Matrix) -> Matrix {
    if u.ncols() == 0 {
        return x.clone();
    }
    x - u * tr_mul(u, x)
}

/// Spectral norm of a small dense matrix.
pub fn norm2(b: &Matrix) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    Svd::new(b).s[0]
}
