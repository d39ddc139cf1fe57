use super::{HouseholderQr, Matrix};

/// Thin singular value decomposition `A = U diag(s) Vᵀ` with `s` sorted
/// descending.
///
/// Computed by one-sided (Hestenes) Jacobi rotations, which stays accurate
/// on rank-deficient and triangular inputs. Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

const MAX_SWEEPS: usize = 80;

impl Svd {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        if m < n {
            let t = Self::new(&a.transpose());
            return Self { u: t.v, s: t.s, v: t.u };
        }
        if n == 0 {
            return Self { u: Matrix::zeros(m, 0), s: Vec::new(), v: Matrix::zeros(0, 0) };
        }
        // Tall inputs are first reduced to their square triangular factor.
        let (qr, mut w) = if m > n {
            let qr = HouseholderQr::new(a.clone());
            let r = qr.r();
            (Some(qr), r)
        } else {
            (None, a.clone())
        };
        let mut v = Matrix::identity(n, n);
        jacobi_sweeps(&mut w, &mut v);

        let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
        let smax = norms[order[0]];
        let cutoff = smax * f64::EPSILON * n as f64;
        let mut u_small = Matrix::zeros(n, n);
        let mut v_sorted = Matrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        let mut rank = 0;
        for (c, &src) in order.iter().enumerate() {
            v_sorted.set_column(c, &v.column(src));
            if norms[src] > cutoff && norms[src] > 0.0 {
                u_small.set_column(c, &(w.column(src) / norms[src]));
                rank += 1;
            }
            s.push(norms[src]);
        }
        if rank < n {
            // Complete the left factor with an orthonormal basis of the
            // complement of the nonzero singular directions.
            let qr = HouseholderQr::new(u_small.columns(0, rank).into_owned());
            let q = qr.q_columns(0, n);
            for c in rank..n {
                u_small.set_column(c, &q.column(c));
            }
        }
        let u = match qr {
            Some(qr) => {
                let mut full = Matrix::zeros(m, n);
                full.rows_mut(0, n).copy_from(&u_small);
                qr.apply_q(&mut full);
                full
            }
            None => u_small,
        };
        Self { u, s, v: v_sorted }
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count()
    }
}

fn jacobi_sweeps(w: &mut Matrix, v: &mut Matrix) {
    let n = w.ncols();
    let m = w.nrows();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (cp, cq) = (w.column(p), w.column(q));
                let alpha = cp.norm_squared();
                let beta = cq.norm_squared();
                let gamma = cp.dot(&cq);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(w, m, p, q, c, s);
                rotate(v, n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(a: &mut Matrix, rows: usize, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..rows {
        let (x, y) = (a[(r, p)], a[(r, q)]);
        a[(r, p)] = c * x - s * y;
        a[(r, q)] = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian, RandomStream};

    fn check(a: &Matrix) {
        let svd = Svd::new(a);
        let p = a.nrows().min(a.ncols());
        assert_eq!(svd.u.shape(), (a.nrows(), p));
        assert_eq!(svd.v.shape(), (a.ncols(), p));
        let recon = &svd.u * Matrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone())) * svd.v.transpose();
        assert!((recon - a).norm() <= 1e-12 * a.norm().max(1.0));
        assert!((svd.u.tr_mul(&svd.u) - Matrix::identity(p, p)).norm() < 1e-12);
        assert!((svd.v.tr_mul(&svd.v) - Matrix::identity(p, p)).norm() < 1e-12);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn random_shapes() {
        let s = RandomStream::new(1);
        for (i, &(m, n)) in [(5, 5), (9, 4), (4, 9), (1, 6), (6, 1)].iter().enumerate() {
            check(&gaussian(m, n, &s.child(i as u64)));
        }
    }

    #[test]
    fn rank_deficient_triangular() {
        let s = RandomStream::new(2);
        let y = gaussian(12, 2, &s.child(0)) * gaussian(2, 7, &s.child(1));
        let r = HouseholderQr::new(y).r();
        check(&r);
        check(&Matrix::zeros(3, 4));
        assert_eq!(Svd::new(&r).rank(1e-12), 2);
    }
}
