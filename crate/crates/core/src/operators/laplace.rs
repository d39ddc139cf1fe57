use rayon::prelude::*;

use super::DenseOperator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tessellation::PointCloud;

/// Dense free-space Laplace kernel `A_ij = log ‖x_i − x_j‖` with a zero
/// diagonal.
pub fn laplace2d_operator(points: &PointCloud) -> Result<DenseOperator> {
    if points.dim() != 2 {
        return Err(Error::InvalidDimension(points.dim()));
    }
    let n = points.len();
    let mut a = Matrix::zeros(n, n);
    let failures: Vec<(usize, usize)> = a
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .filter_map(|(j, col)| {
            let xj = points.point(j);
            for (i, entry) in col.iter_mut().enumerate() {
                if i == j {
                    continue;
                }
                let xi = points.point(i);
                let r = (xi[0] - xj[0]).hypot(xi[1] - xj[1]);
                if r == 0.0 {
                    return Some((i, j));
                }
                *entry = r.ln();
            }
            None
        })
        .collect();
    if let Some(&(i, j)) = failures.first() {
        return Err(Error::InvalidArgument(format!("points {i} and {j} coincide")));
    }
    Ok(DenseOperator::new(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOperator;

    #[test]
    fn unit_distance_gives_zero_matrix() {
        let pts = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let op = laplace2d_operator(&pts).unwrap();
        assert_eq!(op.matrix(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn entries_are_log_distance() {
        let pts = PointCloud::new(2, vec![0.0, 0.0, 0.6, 0.8]).unwrap();
        let op = laplace2d_operator(&pts).unwrap();
        assert!(op.matrix()[(0, 1)].abs() < 1e-15);
        let pts = PointCloud::new(2, vec![0.0, 0.0, 0.3, 0.4]).unwrap();
        let op = laplace2d_operator(&pts).unwrap();
        assert!((op.matrix()[(1, 0)] - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(op.apply(&Matrix::identity(2, 2)), op.apply_adjoint(&Matrix::identity(2, 2)));
    }

    #[test]
    fn coincident_points_rejected() {
        let pts = PointCloud::new(2, vec![0.25, 0.5, 0.25, 0.5]).unwrap();
        assert!(laplace2d_operator(&pts).is_err());
        let pts = PointCloud::new(1, vec![0.25, 0.5]).unwrap();
        assert!(matches!(laplace2d_operator(&pts), Err(Error::InvalidDimension(1))));
    }
}
