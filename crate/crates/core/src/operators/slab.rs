use rayon::prelude::*;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tessellation::PointCloud;

/// Symmetric banded `L D Lᵀ` factorization without pivoting.
///
/// Column `j` of the lower band is stored contiguously: entry `(j + o, j)`
/// lives at `band[j * (bw + 1) + o]` for `o ≤ bw`.
#[derive(Clone, Debug)]
struct BandedLdl {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedLdl {
    fn factor(n: usize, bw: usize, mut band: Vec<f64>) -> Result<Self> {
        let stride = bw + 1;
        let scale = (0..n).map(|j| band[j * stride].abs()).fold(1.0, f64::max);
        let mut w = vec![0.0; stride];
        for j in 0..n {
            let (head, tail) = band.split_at_mut((j + 1) * stride);
            let col = &mut head[j * stride..];
            let d = col[0];
            if d.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Singular(format!("pivot {j} is {d:.3e}")));
            }
            let len = stride.min(n - j);
            w[..len].copy_from_slice(&col[..len]);
            col[1..len].iter_mut().for_each(|v| *v /= d);
            for c_off in 1..len {
                let f = w[c_off];
                if f == 0.0 {
                    continue;
                }
                let target = &mut tail[(c_off - 1) * stride..c_off * stride];
                for o in c_off..len {
                    target[o - c_off] -= col[o] * f;
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let stride = self.bw + 1;
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                let len = stride.min(self.n - j);
                let col = &self.band[j * stride..j * stride + len];
                for o in 1..len {
                    x[j + o] -= col[o] * xj;
                }
            }
        }
        for j in 0..self.n {
            x[j] /= self.band[j * stride];
        }
        for j in (0..self.n).rev() {
            let len = stride.min(self.n - j);
            let col = &self.band[j * stride..j * stride + len];
            let mut acc = x[j];
            for o in 1..len {
                acc -= col[o] * x[j + o];
            }
            x[j] = acc;
        }
    }
}

/// Schur complement `T_ff = A_ff − A_fi A_ii⁻¹ A_if` of a 7-point shifted
/// Laplacian `−Δ − κ²` on an `nx × ny × nz` slab with unit spacing and zero
/// Dirichlet data outside. The frontal nodes are the `z = 0` face; the
/// remaining layers are eliminated through a banded factorization computed
/// once at construction.
#[derive(Clone, Debug)]
pub struct SlabSchur {
    nx: usize,
    ny: usize,
    nz: usize,
    kappa: f64,
    interior: Option<BandedLdl>,
}

impl SlabSchur {
    pub fn new(nx: usize, ny: usize, nz: usize, kappa: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidArgument(format!("slab dimensions {nx}x{ny}x{nz} must be positive")));
        }
        let layers = nz - 1;
        let interior = if layers == 0 {
            None
        } else {
            let n = nx * ny * layers;
            let bw = ny * layers;
            let stride = bw + 1;
            let mut band = vec![0.0; n * stride];
            for x in 0..nx {
                for y in 0..ny {
                    for z in 0..layers {
                        let idx = (x * ny + y) * layers + z;
                        band[idx * stride] = 6.0 - kappa * kappa;
                        if z + 1 < layers {
                            band[idx * stride + 1] = -1.0;
                        }
                        if y + 1 < ny {
                            band[idx * stride + layers] = -1.0;
                        }
                        if x + 1 < nx {
                            band[idx * stride + bw] = -1.0;
                        }
                    }
                }
            }
            Some(BandedLdl::factor(n, bw, band)?)
        };
        Ok(Self { nx, ny, nz, kappa, interior })
    }

    /// Wavenumber resolving one wavelength with 100 grid points.
    pub fn default_kappa() -> f64 {
        2.0 * std::f64::consts::PI / 100.0
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Frontal index of face node `(x, y)`.
    pub fn face_index(&self, x: usize, y: usize) -> usize {
        x * self.ny + y
    }

    fn apply_column(&self, x: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let diag = 6.0 - self.kappa * self.kappa;
        for ix in 0..nx {
            for iy in 0..ny {
                let f = ix * ny + iy;
                let mut v = diag * x[f];
                if ix > 0 {
                    v -= x[f - ny];
                }
                if ix + 1 < nx {
                    v -= x[f + ny];
                }
                if iy > 0 {
                    v -= x[f - 1];
                }
                if iy + 1 < ny {
                    v -= x[f + 1];
                }
                out[f] = v;
            }
        }
        if let Some(ldl) = &self.interior {
            let layers = self.nz - 1;
            let mut rhs = vec![0.0; ldl.n];
            for (f, &xf) in x.iter().enumerate() {
                rhs[f * layers] = xf;
            }
            ldl.solve_in_place(&mut rhs);
            for (f, o) in out.iter_mut().enumerate() {
                *o -= rhs[f * layers];
            }
        }
    }
}

/// Face-node coordinates `((x + ½)/nx, (y + ½)/ny)` in frontal order.
pub fn slab_points(nx: usize, ny: usize) -> Result<PointCloud> {
    let mut coords = Vec::with_capacity(2 * nx * ny);
    for x in 0..nx {
        for y in 0..ny {
            coords.push((x as f64 + 0.5) / nx as f64);
            coords.push((y as f64 + 0.5) / ny as f64);
        }
    }
    PointCloud::new(2, coords)
}

impl LinearOperator for SlabSchur {
    fn nrows(&self) -> usize {
        self.nx * self.ny
    }

    fn ncols(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let n = self.nrows();
        assert_eq!(x.nrows(), n, "slab apply: row mismatch");
        let mut out = Matrix::zeros(n, x.ncols());
        if n == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(x.as_slice().par_chunks(n))
            .for_each(|(o, xc)| self.apply_column(xc, o));
        out
    }

    fn apply_adjoint(&self, y: &Matrix) -> Matrix {
        self.apply(y)
    }
}
