//! Binary container: magic `UBLR1`, little-endian `u64` header
//! `(n, b, k, d)`, the tessellation as length-prefixed JSON, the `b` block
//! ranks `k_i` as `u64`, then column-major
//! `f64` blocks: `U_1..U_b`, `V_1..V_b`, `Ã`, and finally the count of near
//! blocks, their 1-based `(i, j)` table, and the blocks themselves.

use std::io::{Read, Write};

use super::UniformBlr;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tessellation::{Tessellation, TessellationJson};

const MAGIC: &[u8; 5] = b"UBLR1";

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_matrix(w: &mut impl Write, m: &Matrix) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * m.len());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(w.write_all(&buf)?)
}

pub fn write_container(rep: &UniformBlr, w: &mut impl Write) -> Result<()> {
    let tess = rep.tessellation();
    w.write_all(MAGIC)?;
    for v in [tess.n(), tess.num_blocks(), rep.rank(), tess.dim()] {
        put_u64(w, v as u64)?;
    }
    let json = serde_json::to_vec(&tess.to_json(rep.coloring()))?;
    put_u64(w, json.len() as u64)?;
    w.write_all(&json)?;
    for i in 0..tess.num_blocks() {
        put_u64(w, rep.u(i).ncols() as u64)?;
    }
    for i in 0..tess.num_blocks() {
        put_matrix(w, rep.u(i))?;
    }
    for i in 0..tess.num_blocks() {
        put_matrix(w, rep.v(i))?;
    }
    put_matrix(w, rep.core())?;
    let pairs: Vec<(usize, usize)> =
        (0..tess.num_blocks()).flat_map(|i| tess.neighbors(i).iter().map(move |&j| (i, j))).collect();
    put_u64(w, pairs.len() as u64)?;
    for &(i, j) in &pairs {
        put_u64(w, i as u64 + 1)?;
        put_u64(w, j as u64 + 1)?;
    }
    for row in rep.near_blocks() {
        for blk in row {
            put_matrix(w, blk)?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        Ok(u64::from_le_bytes(b))
    }

    fn usize(&mut self, limit: u64, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(Error::Container(format!("{what} {v} exceeds {limit}")));
        }
        Ok(v as usize)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut buf = vec![0u8; 8 * rows * cols];
        self.inner.read_exact(&mut buf).map_err(truncated)?;
        let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        Ok(Matrix::from_iterator(rows, cols, data))
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Container("unexpected end of data".into())
    } else {
        Error::Io(e)
    }
}

const SIZE_LIMIT: u64 = 1 << 32;

pub fn read_container(r: impl Read) -> Result<UniformBlr> {
    let mut rd = Reader { inner: r };
    let mut magic = [0u8; 5];
    rd.inner.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let n = rd.usize(SIZE_LIMIT, "n")?;
    let b = rd.usize(SIZE_LIMIT, "b")?;
    let k = rd.usize(SIZE_LIMIT, "k")?;
    let d = rd.usize(3, "d")?;
    let len = rd.usize(SIZE_LIMIT, "json length")?;
    let mut json = vec![0u8; len];
    rd.inner.read_exact(&mut json).map_err(truncated)?;
    let tj: TessellationJson = serde_json::from_slice(&json)?;
    let (tess, coloring) = Tessellation::from_json(&tj)?;
    if tess.n() != n || tess.num_blocks() != b || tess.dim() != d {
        return Err(Error::Container("header disagrees with tessellation".into()));
    }
    let ranks = (0..b).map(|i| rd.usize(tess.block_size(i) as u64, "block rank")).collect::<Result<Vec<_>>>()?;
    let u = (0..b).map(|i| rd.matrix(tess.block_size(i), ranks[i])).collect::<Result<Vec<_>>>()?;
    let v = (0..b).map(|i| rd.matrix(tess.block_size(i), ranks[i])).collect::<Result<Vec<_>>>()?;
    let kk: usize = ranks.iter().sum();
    let core = rd.matrix(kk, kk)?;
    let count = rd.usize(SIZE_LIMIT, "near block count")?;
    let expected: Vec<(usize, usize)> =
        (0..b).flat_map(|i| tess.neighbors(i).iter().map(move |&j| (i + 1, j + 1))).collect();
    if count != expected.len() {
        return Err(Error::Container(format!("{count} near blocks, expected {}", expected.len())));
    }
    for &(i, j) in &expected {
        if (rd.u64()?, rd.u64()?) != (i as u64, j as u64) {
            return Err(Error::Container("near block table out of order".into()));
        }
    }
    let near = (0..b)
        .map(|i| {
            tess.neighbors(i)
                .iter()
                .map(|&j| rd.matrix(tess.block_size(i), tess.block_size(j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    UniformBlr::new(tess, coloring, k, u, v, core, near)
}
