use proptest::prelude::*;
use ublr::bases::{bases_block_nullification, bases_tagging, nullification_projector, TaggingOptions};
use ublr::linalg::gather_rows;
use ublr::operators::{synthetic_ublr, LinearOperator, SyntheticSpec};
use ublr::reconstruction::{
    compress, error_stream, read_container, relative_error, type_a, type_b, write_container, CompressionConfig, Method,
};
use ublr::tagging::{block_tags, make_tagging_matrix, TagDistribution};
use ublr::{Matrix, RandomStream};

fn spec(dim: usize, per_axis: usize, m: usize, k: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec { dim, per_axis, m, k, seed }
}

#[test]
fn nullification_projectors_annihilate_neighbor_rows() {
    for seed in 0..20 {
        let syn = synthetic_ublr(&spec(1 + (seed as usize % 2), 4, 6, 2, seed)).unwrap();
        let tess = &syn.tessellation;
        let (_, sk) = bases_block_nullification(&syn.operator, tess, 2, 3, &RandomStream::new(seed)).unwrap();
        for (omega, label) in [(&sk.omega, "omega"), (&sk.psi, "psi")] {
            for i in 0..tess.num_blocks() {
                let p = nullification_projector(omega, tess, i, 5).unwrap();
                let rows = gather_rows(omega, &tess.indices_of(tess.neighbors(i)));
                assert!((rows * p).norm() <= 1e-12 * omega.norm(), "{label} seed {seed} block {i}");
            }
        }
    }
}

#[test]
fn sketch_only_and_probed_reconstructions_agree() {
    let syn = synthetic_ublr(&spec(2, 4, 12, 3, 21)).unwrap();
    let run = |method| {
        compress(&syn.operator, &syn.tessellation, &syn.coloring, &CompressionConfig::new(method, 3, 5, 8)).unwrap()
    };
    let a1 = run(Method::A1).rep.to_dense();
    let b1 = run(Method::B1).rep.to_dense();
    assert!((&a1 - &b1).norm() <= 1e-7 * a1.norm());
}

#[test]
fn tagged_near_blocks_match_structured_identity_probes() {
    for seed in 0..3 {
        let syn = synthetic_ublr(&spec(1, 9, 10, 2, 40 + seed)).unwrap();
        let (tess, op) = (&syn.tessellation, &syn.operator);
        let stream = RandomStream::new(seed);
        let t = make_tagging_matrix(9, 1, 0, TagDistribution::Gaussian, &stream.child(0)).unwrap();
        let tags = block_tags(&t, tess, false).unwrap();
        let options = TaggingOptions { group_width: 10 + 3, extra_samples: false };
        let (bases, sk) = bases_tagging(op, tess, 2, 3, &t, &tags, options, &stream.child(1)).unwrap();
        let tagged = type_b::discrepancy_tagging(tess, &sk, &bases, &t).unwrap();
        let core = type_a::atilde_direct(op, tess, &bases);
        let probed = type_a::discrepancy_structured_ids(op, tess, &bases, &core, &syn.coloring).unwrap();
        let scale = op.matrix().norm();
        for (row_t, row_p) in tagged.near.iter().zip(&probed) {
            for (x, y) in row_t.iter().zip(row_p) {
                assert!((x - y).norm() <= 1e-7 * scale);
            }
        }
    }
}

#[test]
fn identical_seeds_give_identical_reports_and_containers() {
    let syn = synthetic_ublr(&spec(2, 4, 9, 2, 2)).unwrap();
    for method in Method::ALL {
        let cfg = CompressionConfig::new(method, 2, 4, 6);
        let once = compress(&syn.operator, &syn.tessellation, &syn.coloring, &cfg).unwrap();
        let twice = compress(&syn.operator, &syn.tessellation, &syn.coloring, &cfg).unwrap();
        assert_eq!(once.report.without_timings(), twice.report.without_timings());
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_container(&once.rep, &mut a).unwrap();
        write_container(&twice.rep, &mut b).unwrap();
        assert_eq!(a, b);
        let back = read_container(&a[..]).unwrap();
        let x = Matrix::identity(syn.truth.ncols(), syn.truth.ncols());
        assert_eq!(back.apply(&x), once.rep.apply(&x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_rank_operators_are_recovered(
        dim in 1usize..=2,
        per_axis in 4usize..6,
        m in 6usize..12,
        k in 1usize..3,
        method in prop_oneof![Just(Method::A1), Just(Method::A2), Just(Method::A3), Just(Method::B1), Just(Method::B2)],
        seed in 0u64..1000,
    ) {
        let per_axis = if dim == 1 { per_axis + 3 } else { per_axis };
        let syn = synthetic_ublr(&spec(dim, per_axis, m, k, seed)).unwrap();
        let cfg = CompressionConfig::new(method, k, 3, seed + 1);
        let out = compress(&syn.operator, &syn.tessellation, &syn.coloring, &cfg).unwrap();
        let err = relative_error(&syn.operator, &out.rep, 20, &error_stream(seed)).unwrap();
        prop_assert!(err <= 1e-7, "{method}: {err}");
    }
}
