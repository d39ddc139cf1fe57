use super::Matrix;

/// Unpivoted Householder QR in compact form.
///
/// The reflectors are stored below the diagonal of `factors` with an implicit
/// unit leading entry; `R` occupies the upper triangle. The full orthogonal
/// factor is never formed unless asked for: [`HouseholderQr::q_columns`]
/// applies the reflectors to a slice of the identity.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    factors: Matrix,
    tau: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(mut a: Matrix) -> Self {
        let (m, n) = a.shape();
        let p = m.min(n);
        let mut tau = vec![0.0; p];
        let data = a.as_mut_slice();
        for j in 0..p {
            let col = &mut data[j * m..(j + 1) * m];
            let alpha = col[j];
            let xnorm = col[j + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                continue;
            }
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let beta = if alpha == 0.0 { -xnorm } else { beta };
            tau[j] = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            col[j + 1..].iter_mut().for_each(|v| *v *= scale);
            col[j] = beta;
            for c in j + 1..n {
                let (left, right) = data.split_at_mut(c * m);
                let v = &left[j * m..(j + 1) * m];
                let target = &mut right[..m];
                reflect(v, tau[j], j, target);
            }
        }
        Self { factors: a, tau }
    }

    pub fn nrows(&self) -> usize {
        self.factors.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.factors.ncols()
    }

    /// Overwrites `e` with `Q e` where `Q` is the full `nrows × nrows` factor.
    pub fn apply_q(&self, e: &mut Matrix) {
        let m = self.nrows();
        assert_eq!(e.nrows(), m, "apply_q: row mismatch");
        let fac = self.factors.as_slice();
        let cols = e.ncols();
        let data = e.as_mut_slice();
        for j in (0..self.tau.len()).rev() {
            if self.tau[j] == 0.0 {
                continue;
            }
            let v = &fac[j * m..(j + 1) * m];
            for c in 0..cols {
                reflect(v, self.tau[j], j, &mut data[c * m..(c + 1) * m]);
            }
        }
    }

    /// Overwrites `e` with `Qᵀ e`.
    pub fn apply_qt(&self, e: &mut Matrix) {
        let m = self.nrows();
        assert_eq!(e.nrows(), m, "apply_qt: row mismatch");
        let fac = self.factors.as_slice();
        let cols = e.ncols();
        let data = e.as_mut_slice();
        for j in 0..self.tau.len() {
            if self.tau[j] == 0.0 {
                continue;
            }
            let v = &fac[j * m..(j + 1) * m];
            for c in 0..cols {
                reflect(v, self.tau[j], j, &mut data[c * m..(c + 1) * m]);
            }
        }
    }

    /// Columns `start..start + count` of the full orthogonal factor.
    pub fn q_columns(&self, start: usize, count: usize) -> Matrix {
        let m = self.nrows();
        assert!(start + count <= m, "q_columns: range out of bounds");
        let mut e = Matrix::zeros(m, count);
        for c in 0..count {
            e[(start + c, c)] = 1.0;
        }
        self.apply_q(&mut e);
        e
    }

    /// The `min(m, n) × n` upper-triangular factor.
    pub fn r(&self) -> Matrix {
        let (m, n) = self.factors.shape();
        let p = m.min(n);
        Matrix::from_fn(p, n, |i, j| if i <= j { self.factors[(i, j)] } else { 0.0 })
    }

    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|i| self.factors[(i, i)]).collect()
    }
}

// x <- (I - tau v vᵀ) x on rows j.., where v[j] is implicitly 1.
#[inline]
fn reflect(v: &[f64], tau: f64, j: usize, x: &mut [f64]) {
    let mut w = x[j];
    for (vi, xi) in v[j + 1..].iter().zip(&x[j + 1..]) {
        w += vi * xi;
    }
    w *= tau;
    if w == 0.0 {
        return;
    }
    x[j] -= w;
    for (vi, xi) in v[j + 1..].iter().zip(x[j + 1..].iter_mut()) {
        *xi -= w * vi;
    }
}
