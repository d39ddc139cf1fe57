use proptest::prelude::*;
use ublr::linalg::{col, gaussian, nullsp, pinv, Svd};
use ublr::{Matrix, RandomStream};

/// Gaussian `m × n` matrix of rank at most `r`.
fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> Matrix {
    let s = RandomStream::new(seed);
    gaussian(m, r, &s.child(0)) * gaussian(r, n, &s.child(1))
}

fn singular_values_by_eigen(b: &Matrix) -> Vec<f64> {
    let g = if b.nrows() >= b.ncols() { b.tr_mul(b) } else { b * b.transpose() };
    let mut ev: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    ev.sort_by(|a, c| c.total_cmp(a));
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudoinverse_satisfies_penrose_identities(m in 1usize..10, n in 1usize..10, r in 1usize..10, seed: u64) {
        let b = low_rank(m, n, r.min(m).min(n), seed);
        let x = pinv(&b, 1e-10);
        let tol = 1e-9 * (1.0 + b.norm() * x.norm()).powi(2);
        prop_assert!((&b * &x * &b - &b).norm() <= tol);
        prop_assert!((&x * &b * &x - &x).norm() <= tol);
        let bx = &b * &x;
        let xb = &x * &b;
        prop_assert!((&bx - bx.transpose()).norm() <= tol);
        prop_assert!((&xb - xb.transpose()).norm() <= tol);
    }

    #[test]
    fn svd_matches_gram_eigenvalues(m in 1usize..12, n in 1usize..12, seed: u64) {
        let b = gaussian(m, n, &RandomStream::new(seed));
        let svd = Svd::new(&b);
        let oracle = singular_values_by_eigen(&b);
        let smax = oracle[0];
        for (s, o) in svd.s.iter().zip(&oracle) {
            prop_assert!((s - o).abs() <= 1e-7 * smax, "{s} vs {o}");
        }
        let recon = &svd.u * Matrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone())) * svd.v.transpose();
        prop_assert!((recon - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn col_captures_exact_rank(m in 2usize..14, n in 2usize..14, r in 1usize..6, seed: u64) {
        let r = r.min(m).min(n);
        let b = low_rank(m, n, r, seed);
        let q = col(&b, r).unwrap();
        prop_assert!((q.tr_mul(&q) - Matrix::identity(r, r)).norm() <= 1e-12);
        prop_assert!((&b - &q * q.tr_mul(&b)).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn nullsp_annihilates(rows in 1usize..8, extra in 1usize..6, seed: u64) {
        let b = gaussian(rows, rows + extra, &RandomStream::new(seed));
        let z = nullsp(&b, extra).unwrap();
        prop_assert!((&b * &z).norm() <= 1e-12 * b.norm().max(1.0));
        prop_assert!((z.tr_mul(&z) - Matrix::identity(extra, extra)).norm() <= 1e-12);
    }
}

#[test]
fn nullsp_rejects_missing_nullity() {
    let b = gaussian(3, 4, &RandomStream::new(9));
    assert!(nullsp(&b, 2).is_err());
}

#[test]
fn col_keeps_the_dominant_directions_of_a_noisy_sample() {
    // A rank-3 signal plus tiny noise: the first three columns of Q would
    // miss directions that only later columns carry.
    let s = RandomStream::new(4);
    let signal = gaussian(30, 3, &s.child(0)) * gaussian(3, 12, &s.child(1));
    let noise = gaussian(30, 12, &s.child(2)) * 1e-9;
    let b = &signal + noise;
    let q = col(&b, 3).unwrap();
    assert!((&signal - &q * q.tr_mul(&signal)).norm() <= 1e-7 * signal.norm());
}
