use std::f64::consts::PI;

use proptest::prelude::*;
use ublr::linalg::{gaussian, nullsp, Vector};
use ublr::tagging::{
    aspect_ratio, make_tagging_matrix, null_basis, optimize_null_vector, projected_tags, tag_null_vector,
    TagDistribution, TaggingMatrix,
};
use ublr::tessellation::{build_tessellation, PointCloud, Tessellation};
use ublr::{Matrix, RandomStream};

fn grid(b_per_axis: usize, d: usize) -> Tessellation {
    let b = b_per_axis.pow(d as u32);
    let coords = (0..b)
        .flat_map(|c| (0..d).map(move |a| ((c / b_per_axis.pow(a as u32)) % b_per_axis) as f64 + 0.5))
        .map(|x| x / b_per_axis as f64)
        .collect();
    build_tessellation(&PointCloud::new(d, coords).unwrap(), b).unwrap()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Signed cofactor vector `(c_0, −c_1, c_2, −c_3)` of a 3×4 matrix; it spans
/// the null space when the rows are independent.
fn cofactor_vector(rows: &Matrix) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let mut minor = [[0.0; 3]; 3];
        for (r, mr) in minor.iter_mut().enumerate() {
            for (slot, c) in (0..4).filter(|&c| c != k).enumerate() {
                mr[slot] = rows[(r, c)];
            }
        }
        *o = if k % 2 == 0 { 1.0 } else { -1.0 } * det3(&minor);
    }
    out
}

#[test]
fn null_vector_is_collinear_with_cofactors() {
    let tess = grid(8, 1);
    for seed in 0..100 {
        let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &RandomStream::new(seed)).unwrap();
        let z = tag_null_vector(&t, &tess, 3).unwrap().z;
        let c = cofactor_vector(&t.rows(&[2, 3, 4]));
        let dot: f64 = z.iter().zip(&c).map(|(a, b)| a * b).sum();
        let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(dot.abs() / (z.norm() * cn) >= 1.0 - 1e-10, "seed {seed}");
    }
}

#[test]
fn interior_null_vector_in_one_dimension() {
    let tess = grid(8, 1);
    let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &RandomStream::new(1)).unwrap();
    let nv = tag_null_vector(&t, &tess, 3).unwrap();
    assert!((t.rows(&[2, 3, 4]) * &nv.z).norm() <= 1e-13);
    let edge = null_basis(&t, &tess, 0).unwrap();
    assert_eq!(edge.ncols(), 2);
    assert!((t.rows(&[0, 1]) * edge).norm() <= 1e-13);
}

#[test]
fn far_field_tags_are_generically_nonzero() {
    let tess = grid(8, 1);
    for seed in 0..100 {
        let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &RandomStream::new(seed)).unwrap();
        let v = projected_tags(&t, &tag_null_vector(&t, &tess, 3).unwrap().z);
        for j in [0, 5, 6, 7] {
            assert!(v[j].abs() > 1e-8, "seed {seed}, block {j}");
        }
    }
}

fn rho_on_circle(t: &TaggingMatrix, tess: &Tessellation, i: usize, basis: &Matrix, theta: f64) -> f64 {
    let z = basis.column(0) * theta.cos() + basis.column(1) * theta.sin();
    aspect_ratio(&projected_tags(t, &z), tess, i).unwrap()
}

#[test]
fn circle_optimum_matches_dense_grid() {
    let tess = grid(10, 1);
    for seed in 0..20 {
        let t = make_tagging_matrix(10, 1, 1, TagDistribution::Gaussian, &RandomStream::new(seed)).unwrap();
        for i in 1..9 {
            let basis = null_basis(&t, &tess, i).unwrap();
            assert_eq!(basis.ncols(), 2);
            let best = (0..10_000)
                .map(|g| rho_on_circle(&t, &tess, i, &basis, 2.0 * PI * g as f64 / 10_000.0))
                .fold(f64::INFINITY, f64::min);
            let z = optimize_null_vector(&t, &tess, i).unwrap().z;
            let rho = aspect_ratio(&projected_tags(&t, &z), &tess, i).unwrap();
            assert!(rho <= best * (1.0 + 1e-3), "seed {seed} block {i}: {rho} vs grid {best}");
            let base = aspect_ratio(&projected_tags(&t, &basis.column(0).into_owned()), &tess, i).unwrap();
            assert!(rho <= base);
        }
    }
}

#[test]
fn engineered_tags_reach_unit_aspect_ratio() {
    let tess = grid(8, 1);
    let s = RandomStream::new(77);
    let mut t = gaussian(8, 5, &s.child(0));
    let z0 = {
        let x = nullsp(&ublr::linalg::gather_rows(&t, &[2, 3, 4]), 2).unwrap();
        x.column(0) * 1.1f64.cos() + x.column(1) * 1.1f64.sin()
    };
    for (n, j) in [0usize, 1, 5, 6, 7].into_iter().enumerate() {
        let g = gaussian(5, 1, &s.child2(1, n as u64)).column(0).into_owned();
        let w = &g - &z0 * z0.dot(&g);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        t.row_mut(j).copy_from(&(z0.clone() * sign + w).transpose());
    }
    let t = TaggingMatrix::from_matrix(t, 1).unwrap();
    let basis = null_basis(&t, &tess, 3).unwrap();
    let grid_best = (0..10_000)
        .map(|g| rho_on_circle(&t, &tess, 3, &basis, 2.0 * PI * g as f64 / 10_000.0))
        .fold(f64::INFINITY, f64::min);
    assert!(grid_best < 1.01);
    let z = optimize_null_vector(&t, &tess, 3).unwrap().z;
    assert!(aspect_ratio(&projected_tags(&t, &z), &tess, 3).unwrap() <= 1.0 + 1e-6);
}

#[test]
fn haar_columns_are_orthonormal() {
    let t = make_tagging_matrix(27, 2, 2, TagDistribution::Haar, &RandomStream::new(3)).unwrap();
    let m = t.matrix();
    assert!((m.tr_mul(m) - Matrix::identity(12, 12)).norm() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn null_vectors_annihilate_the_near_field(
        d in 1usize..=2,
        per_axis in 4usize..7,
        extra in 0usize..3,
        dist in prop_oneof![
            Just(TagDistribution::Gaussian),
            Just(TagDistribution::Haar),
            Just(TagDistribution::Equidistributed),
        ],
        seed: u64,
    ) {
        let tess = grid(if d == 1 { per_axis + 3 } else { per_axis }, d);
        let t = make_tagging_matrix(tess.num_blocks(), d, extra, dist, &RandomStream::new(seed)).unwrap();
        let scale = t.matrix().norm();
        for i in 0..tess.num_blocks() {
            let z: Vector = match tag_null_vector(&t, &tess, i) {
                Ok(nv) => nv.z,
                Err(_) => continue,
            };
            prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
            let v = projected_tags(&t, &z);
            for &j in tess.neighbors(i) {
                prop_assert!(v[j].abs() <= 1e-12 * scale);
            }
        }
    }
}
