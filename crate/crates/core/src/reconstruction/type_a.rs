use rayon::prelude::*;

use super::lowrank_apply;
use crate::bases::BlockBases;
use crate::error::Result;
use crate::linalg::{gather_rows, tr_mul, Matrix};
use crate::operators::LinearOperator;
use crate::tessellation::{BoxColoring, Tessellation};

/// `Ã = U* (A V)`: pushes the `K` columns of the block-diagonal `V` through
/// the operator once.
pub fn atilde_direct(op: &dyn LinearOperator, tess: &Tessellation, bases: &BlockBases) -> Matrix {
    let offsets = offsets(&bases.ranks());
    let kk = *offsets.last().unwrap_or(&0);
    let n = tess.n();
    if kk == 0 {
        return Matrix::zeros(0, 0);
    }
    let mut v = Matrix::zeros(n, kk);
    for (i, vi) in bases.v.iter().enumerate() {
        for (r, &row) in tess.block(i).iter().enumerate() {
            for c in 0..vi.ncols() {
                v[(row, offsets[i] + c)] = vi[(r, c)];
            }
        }
    }
    let av = op.apply(&v);
    let mut core = Matrix::zeros(kk, kk);
    for (i, ui) in bases.u.iter().enumerate() {
        let rows = tr_mul(ui, &gather_rows(&av, tess.block(i)));
        core.rows_mut(offsets[i], ui.ncols()).copy_from(&rows);
    }
    core
}

pub(crate) fn offsets(ranks: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(ranks.len() + 1);
    out.push(0);
    for r in ranks {
        out.push(out.last().unwrap() + r);
    }
    out
}

/// Recovers every near-field block of `B = A − U Ã V*` with one probe per
/// color: the probe carries an identity on each block of that color, so the
/// rows of the residual over `I_i` give `B_{i,j}` for the unique probed
/// neighbor `j` of `i`.
pub fn discrepancy_structured_ids(
    op: &dyn LinearOperator,
    tess: &Tessellation,
    bases: &BlockBases,
    core: &Matrix,
    coloring: &BoxColoring,
) -> Result<Vec<Vec<Matrix>>> {
    coloring.validate(tess)?;
    let n = tess.n();
    let b = tess.num_blocks();
    let mut near: Vec<Vec<Option<Matrix>>> = (0..b).map(|i| vec![None; tess.neighbors(i).len()]).collect();
    for class in coloring.classes() {
        let width = class.iter().map(|&j| tess.block_size(j)).max().unwrap_or(0);
        if width == 0 {
            continue;
        }
        let mut probe = Matrix::zeros(n, width);
        for &j in &class {
            for (q, &row) in tess.block(j).iter().enumerate() {
                probe[(row, q)] = 1.0;
            }
        }
        let residual = op.apply(&probe) - lowrank_apply(tess, &bases.u, &bases.v, core, &probe, false);
        let found: Vec<(usize, usize, Matrix)> = class
            .par_iter()
            .flat_map_iter(|&j| {
                let mj = tess.block_size(j);
                let residual = &residual;
                tess.neighbors(j).iter().map(move |&i| {
                    let rows = tess.block(i);
                    let blk = Matrix::from_fn(rows.len(), mj, |r, c| residual[(rows[r], c)]);
                    (i, j, blk)
                })
            })
            .collect();
        for (i, j, blk) in found {
            let t = tess.neighbors(i).binary_search(&j).expect("symmetric neighbors");
            near[i][t] = Some(blk);
        }
    }
    Ok(near.into_iter().map(|row| row.into_iter().map(|m| m.expect("every near block probed")).collect()).collect())
}
