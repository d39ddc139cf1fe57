use rayon::prelude::*;

use crate::bases::{BlockBases, SketchBundle, TaggedSketch};
use crate::error::Result;
use crate::linalg::{gather_rows, project_out, right_pinv_apply, tr_mul, Matrix, CONDITION_WARNING};
use crate::tagging::{pair_null_vector, TaggingMatrix};
use crate::tessellation::Tessellation;

/// Near-field blocks plus the worst pseudoinverse condition number met.
pub struct Discrepancy {
    pub near: Vec<Vec<Matrix>>,
    pub max_condition: f64,
}

impl Discrepancy {
    pub fn warnings(&self) -> Vec<String> {
        if self.max_condition > CONDITION_WARNING {
            vec![format!("pseudoinverse condition number {:.3e} exceeds {CONDITION_WARNING:.0e}", self.max_condition)]
        } else {
            Vec::new()
        }
    }
}

/// Splits an `m × Σ_{j∈list} m_j` matrix into its column blocks.
fn split_columns(x: &Matrix, tess: &Tessellation, list: &[usize]) -> Vec<Matrix> {
    let mut start = 0;
    list.iter()
        .map(|&j| {
            let w = tess.block_size(j);
            let blk = x.columns(start, w).into_owned();
            start += w;
            blk
        })
        .collect()
}

/// `B_{i,j} = (I − U_iU_i*) A_{i,j} + U_iU_i* A_{i,j} (I − V_jV_j*)` from the
/// block-nullification sketches alone.
///
/// The first term is the `j`-block of `(I − U_iU_i*) Y_i Ω(N_i, :)†`; the
/// second uses the adjoint sketch `(I − V_jV_j*) Z_j Ψ(N_j, :)†`, whose
/// `i`-block is `(A_{i,j} (I − V_jV_j*))*`.
pub fn discrepancy_bn(tess: &Tessellation, sk: &SketchBundle, bases: &BlockBases) -> Result<Discrepancy> {
    let b = tess.num_blocks();
    let solve = |test: &Matrix, sketch: &Matrix, basis: &[Matrix], i: usize| {
        let nb = tess.neighbors(i);
        let lhs = project_out(&basis[i], &gather_rows(sketch, tess.block(i)));
        let stack = gather_rows(test, &tess.indices_of(nb));
        let (x, cond) = right_pinv_apply(&lhs, &stack);
        (split_columns(&x, tess, nb), cond)
    };
    let rows: Vec<(Vec<Matrix>, f64)> = (0..b).into_par_iter().map(|i| solve(&sk.omega, &sk.y, &bases.u, i)).collect();
    let cols: Vec<(Vec<Matrix>, f64)> = (0..b).into_par_iter().map(|j| solve(&sk.psi, &sk.z, &bases.v, j)).collect();
    Ok(combine(tess, bases, rows, cols))
}

fn combine(
    tess: &Tessellation,
    bases: &BlockBases,
    rows: Vec<(Vec<Matrix>, f64)>,
    cols: Vec<(Vec<Matrix>, f64)>,
) -> Discrepancy {
    let max_condition = rows.iter().chain(&cols).map(|r| r.1).fold(1.0, f64::max);
    let near = (0..tess.num_blocks())
        .map(|i| {
            let ui = &bases.u[i];
            tess.neighbors(i)
                .iter()
                .enumerate()
                .map(|(t, &j)| {
                    let term1 = &rows[i].0[t];
                    let s = tess.neighbors(j).binary_search(&i).expect("symmetric neighbors");
                    let term2 = cols[j].0[s].transpose();
                    term1 + ui * tr_mul(ui, &term2)
                })
                .collect()
        })
        .collect();
    Discrepancy { near, max_condition }
}

/// Type-B discrepancy from tagged sketches with wide per-block generators.
///
/// For `j ∈ N_i`, a null vector `z` of `T(N_i \ {j}, :)` keeps only block
/// `j` of the near field in the combined sample, so
/// `(I − U_iU_i*) A_{i,j} = (I − U_iU_i*) (Σ_c z_c Y_i^(c)) G_j† / ⟨t^(j), z⟩`.
/// The adjoint side is symmetric with `H_i`.
pub fn discrepancy_tagging(
    tess: &Tessellation,
    sk: &TaggedSketch,
    bases: &BlockBases,
    t: &TaggingMatrix,
) -> Result<Discrepancy> {
    let b = tess.num_blocks();
    let solve = |sketch: &Matrix, gens: &[Matrix], basis: &[Matrix], i: usize| -> Result<(Vec<Matrix>, f64)> {
        let mut cond: f64 = 1.0;
        let blocks = tess
            .neighbors(i)
            .iter()
            .map(|&j| {
                let (z, denom) = pair_null_vector(t, tess, i, j)?;
                let sample = project_out(&basis[i], &sk.combine(sketch, tess.block(i), &z));
                let (x, c) = right_pinv_apply(&sample, &gens[j]);
                cond = cond.max(c);
                Ok(x / denom)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((blocks, cond))
    };
    let rows = (0..b).into_par_iter().map(|i| solve(&sk.bundle.y, &sk.g, &bases.u, i)).collect::<Result<Vec<_>>>()?;
    let cols = (0..b).into_par_iter().map(|j| solve(&sk.bundle.z, &sk.h, &bases.v, j)).collect::<Result<Vec<_>>>()?;
    Ok(combine(tess, bases, rows, cols))
}

/// `Ã = U* (Y − B Ω) (V* Ω)†`, blockwise over the rows of `Y`.
///
/// Returns the core and the condition number of `V* Ω`.
pub fn atilde_from_sketch(
    tess: &Tessellation,
    bases: &BlockBases,
    near: &[Vec<Matrix>],
    omega: &Matrix,
    y: &Matrix,
) -> (Matrix, f64) {
    let ranks = bases.ranks();
    let offsets = super::type_a::offsets(&ranks);
    let kk = *offsets.last().unwrap_or(&0);
    let s = omega.ncols();
    if kk == 0 {
        return (Matrix::zeros(0, 0), 1.0);
    }
    let blocks = tess.num_blocks();
    let lhs_rows: Vec<Matrix> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let mut yi = gather_rows(y, tess.block(i));
            for (t, &j) in tess.neighbors(i).iter().enumerate() {
                yi -= &near[i][t] * gather_rows(omega, tess.block(j));
            }
            tr_mul(&bases.u[i], &yi)
        })
        .collect();
    let mut lhs = Matrix::zeros(kk, s);
    let mut vt_omega = Matrix::zeros(kk, s);
    for i in 0..blocks {
        lhs.rows_mut(offsets[i], ranks[i]).copy_from(&lhs_rows[i]);
        vt_omega.rows_mut(offsets[i], ranks[i]).copy_from(&tr_mul(&bases.v[i], &gather_rows(omega, tess.block(i))));
    }
    right_pinv_apply(&lhs, &vt_omega)
}
