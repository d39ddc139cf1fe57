use rand::Rng;

use super::DenseOperator;
use crate::error::{Error, Result};
use crate::linalg::{col, gaussian, Matrix, RandomStream};
use crate::reconstruction::UniformBlr;
use crate::tessellation::{build_tessellation, color_boxes, BoxColoring, PointCloud, Tessellation};

/// Parameters of an exact-rank uniform BLR test operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub dim: usize,
    /// Boxes per axis; `b = per_axis^dim`.
    pub per_axis: usize,
    /// Points per box.
    pub m: usize,
    /// Far-field rank.
    pub k: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn num_blocks(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn n(&self) -> usize {
        self.num_blocks() * self.m
    }
}

/// Dense operator together with the exact factors it was assembled from.
#[derive(Clone, Debug)]
pub struct SyntheticUblr {
    pub points: PointCloud,
    pub tessellation: Tessellation,
    pub coloring: BoxColoring,
    pub operator: DenseOperator,
    pub truth: UniformBlr,
}

/// Draws random orthonormal `U_i`, `V_i`, a Gaussian core, and Gaussian
/// near-field blocks scaled to the far-field magnitude, then assembles
/// `A = U Ã V* + B` densely. Every box holds exactly `m` points.
pub fn synthetic_ublr(spec: &SyntheticSpec) -> Result<SyntheticUblr> {
    let SyntheticSpec { dim, per_axis, m, k, seed } = *spec;
    if per_axis == 0 || m == 0 {
        return Err(Error::InvalidArgument("synthetic operator needs nonempty boxes".into()));
    }
    if k > m {
        return Err(Error::RankTooLarge { k, m });
    }
    let root = RandomStream::new(seed);
    let b = spec.num_blocks();
    let mut rng = root.child(0).rng();
    let mut coords = Vec::with_capacity(b * m * dim);
    for cell in 0..b {
        let c = [cell % per_axis, (cell / per_axis) % per_axis, cell / (per_axis * per_axis)];
        for _ in 0..m {
            for &ca in c.iter().take(dim) {
                let frac: f64 = rng.random_range(0.05..0.95);
                coords.push((ca as f64 + frac) / per_axis as f64);
            }
        }
    }
    let points = PointCloud::new(dim, coords)?;
    let tessellation = build_tessellation(&points, b)?;
    let coloring = color_boxes(&tessellation);

    let orth = |label: u64, i: usize| -> Result<Matrix> { col(&gaussian(m, k, &root.child2(label, i as u64)), k) };
    let u = (0..b).map(|i| orth(1, i)).collect::<Result<Vec<_>>>()?;
    let v = (0..b).map(|i| orth(2, i)).collect::<Result<Vec<_>>>()?;
    let core = gaussian(b * k, b * k, &root.child(3));
    let scale = k.max(1) as f64 / m as f64;
    let near = (0..b)
        .map(|i| {
            tessellation
                .neighbors(i)
                .iter()
                .map(|&j| gaussian(m, m, &root.child(4).child2(i as u64, j as u64)) * scale)
                .collect()
        })
        .collect();
    let truth = UniformBlr::new(tessellation.clone(), coloring.clone(), k, u, v, core, near)?;
    let operator = DenseOperator::new(truth.to_dense());
    Ok(SyntheticUblr { points, tessellation, coloring, operator, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gather_rows;
    use crate::operators::LinearOperator;

    fn block(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
    }

    fn numerical_rank(a: &Matrix) -> usize {
        let s = a.clone().svd(false, false).singular_values;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        s.iter().filter(|&&v| v > 1e-10 * smax).count()
    }

    #[test]
    fn far_field_blocks_have_exact_rank() {
        let syn = synthetic_ublr(&SyntheticSpec { dim: 1, per_axis: 8, m: 20, k: 3, seed: 4 }).unwrap();
        let a = syn.operator.matrix();
        let t = &syn.tessellation;
        assert_eq!(numerical_rank(&block(a, t.block(2), t.block(5))), 3);
        assert_eq!(numerical_rank(&block(a, t.block(2), t.block(3))), 20);
        assert!(t.blocks().iter().all(|blk| blk.len() == 20));
    }

    #[test]
    fn zero_rank_leaves_only_the_near_field() {
        let syn = synthetic_ublr(&SyntheticSpec { dim: 1, per_axis: 6, m: 5, k: 0, seed: 1 }).unwrap();
        let a = syn.operator.matrix();
        let t = &syn.tessellation;
        for i in 0..6 {
            for j in t.far_field(i) {
                assert_eq!(block(a, t.block(i), t.block(j)).amax(), 0.0);
            }
        }
    }

    #[test]
    fn apply_reproduces_dense_columns() {
        let syn = synthetic_ublr(&SyntheticSpec { dim: 2, per_axis: 3, m: 6, k: 2, seed: 9 }).unwrap();
        let n = syn.operator.nrows();
        let e = Matrix::identity(n, n);
        let via_factors = syn.truth.apply(&gather_rows(&e, &[0, 7, 31]).transpose());
        let dense = syn.operator.apply(&gather_rows(&e, &[0, 7, 31]).transpose());
        assert!((via_factors - dense).amax() <= 1e-14 * syn.operator.matrix().amax().max(1.0));
    }
}
