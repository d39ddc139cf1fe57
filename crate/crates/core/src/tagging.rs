//! Tagging matrices, per-block null vectors, projected tags, and aspect
//! ratios.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gather_rows, gaussian, HouseholderQr, Matrix, RandomStream, Vector};
use crate::tessellation::Tessellation;

/// Aspect ratios above this value trigger a redraw of the tagging matrix.
pub const ASPECT_REDRAW_THRESHOLD: f64 = 1e6;

const DEGENERACY_RTOL: f64 = 1e-10;
const RIESZ_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagDistribution {
    Gaussian,
    Haar,
    Equidistributed,
}

impl FromStr for TagDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "haar" => Ok(Self::Haar),
            "equidistributed" => Ok(Self::Equidistributed),
            other => Err(Error::InvalidArgument(format!("unknown tag distribution `{other}`"))),
        }
    }
}

impl fmt::Display for TagDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Haar => "haar",
            Self::Equidistributed => "equidistributed",
        })
    }
}

/// Number of tag columns without extras: `3^d + 1`.
pub fn base_tag_columns(d: usize) -> usize {
    3usize.pow(d as u32) + 1
}

/// `b × ℓ` matrix of tags; row `i` scales the test blocks of box `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggingMatrix {
    t: Matrix,
    dim: usize,
    extra_cols: usize,
    distribution: TagDistribution,
}

impl TaggingMatrix {
    /// Wraps an explicit matrix; `ℓ` must be at least `3^d + 1`.
    pub fn from_matrix(t: Matrix, dim: usize) -> Result<Self> {
        let base = base_tag_columns(dim);
        if t.ncols() < base {
            return Err(Error::InvalidArgument(format!(
                "tagging matrix needs at least {base} columns in {dim}-d, got {}",
                t.ncols()
            )));
        }
        Ok(Self { extra_cols: t.ncols() - base, t, dim, distribution: TagDistribution::Gaussian })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.t
    }

    pub fn ell(&self) -> usize {
        self.t.ncols()
    }

    pub fn num_blocks(&self) -> usize {
        self.t.nrows()
    }

    pub fn extra_cols(&self) -> usize {
        self.extra_cols
    }

    pub fn distribution(&self) -> TagDistribution {
        self.distribution
    }

    pub fn tag(&self, block: usize, group: usize) -> f64 {
        self.t[(block, group)]
    }

    /// `T(rows, :)`.
    pub fn rows(&self, rows: &[usize]) -> Matrix {
        gather_rows(&self.t, rows)
    }
}

pub fn make_tagging_matrix(
    b: usize,
    d: usize,
    extra_cols: usize,
    distribution: TagDistribution,
    stream: &RandomStream,
) -> Result<TaggingMatrix> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    let ell = base_tag_columns(d) + extra_cols;
    if b < ell {
        return Err(Error::InvalidArgument(format!(
            "tagging needs at least {ell} boxes for d={d} with {extra_cols} extra columns, got {b}"
        )));
    }
    let g = gaussian(b, ell, stream);
    let t = match distribution {
        TagDistribution::Gaussian => g,
        TagDistribution::Haar => {
            let qr = HouseholderQr::new(g);
            let mut q = qr.q_columns(0, ell);
            for (c, r) in qr.r_diagonal().iter().enumerate() {
                if *r < 0.0 {
                    q.column_mut(c).neg_mut();
                }
            }
            q
        }
        TagDistribution::Equidistributed => riesz_rows(g),
    };
    Ok(TaggingMatrix { t, dim: d, extra_cols, distribution })
}

/// Normalizes the rows of `g` onto the unit sphere and spreads them with a
/// fixed number of Riesz-energy descent steps.
fn riesz_rows(g: Matrix) -> Matrix {
    let (b, ell) = g.shape();
    let mut x: Vec<Vector> = (0..b).map(|i| g.row(i).transpose().normalize()).collect();
    let s = (ell as f64 - 1.0).max(1.0);
    let spacing = (b as f64).powf(-1.0 / s);
    for step in 0..RIESZ_STEPS {
        let forces: Vec<Vector> = (0..b)
            .map(|i| {
                let mut f = Vector::zeros(ell);
                for j in 0..b {
                    if i != j {
                        let diff = &x[i] - &x[j];
                        let r = diff.norm().max(1e-12);
                        f += diff / r.powf(s + 1.0);
                    }
                }
                let radial = f.dot(&x[i]);
                f - &x[i] * radial
            })
            .collect();
        let fmax = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
        if fmax == 0.0 {
            break;
        }
        let eta = 0.1 * spacing * (1.0 - step as f64 / RIESZ_STEPS as f64);
        for (xi, fi) in x.iter_mut().zip(&forces) {
            *xi = (&*xi + fi * (eta / fmax)).normalize();
        }
    }
    Matrix::from_fn(b, ell, |i, c| x[i][c])
}

/// Orthonormal basis of the null space of `rows` (as a `ℓ × (ℓ − rows)`
/// matrix), or [`Error::DegenerateTags`] when the rows are numerically
/// dependent.
fn null_basis_of(rows: &Matrix, scale: f64, block: usize) -> Result<Matrix> {
    let (nr, ell) = rows.shape();
    if nr >= ell {
        return Err(Error::DegenerateTags {
            block,
            reason: format!("{nr} constraint rows leave no null space in {ell} columns"),
        });
    }
    let qr = HouseholderQr::new(rows.transpose());
    if let Some(d) = qr.r_diagonal().iter().find(|d| d.abs() < DEGENERACY_RTOL * scale) {
        return Err(Error::DegenerateTags {
            block,
            reason: format!("neighbor tags are linearly dependent (pivot {d:.3e})"),
        });
    }
    Ok(qr.q_columns(nr, ell - nr))
}

/// `nullsp(T(N_i, :), ℓ − |N_i|)`.
pub fn null_basis(t: &TaggingMatrix, tess: &Tessellation, i: usize) -> Result<Matrix> {
    null_basis_of(&t.rows(tess.neighbors(i)), t.t.norm(), i)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullVector {
    pub block: usize,
    pub z: Vector,
    /// `‖T(N_i, :) z‖`.
    pub residual: f64,
}

fn null_vector(t: &TaggingMatrix, tess: &Tessellation, i: usize, z: Vector) -> NullVector {
    let residual = (t.rows(tess.neighbors(i)) * &z).norm();
    NullVector { block: i, z, residual }
}

/// The first null basis vector of `T(N_i, :)`; unique up to sign when the
/// nullity is one.
pub fn tag_null_vector(t: &TaggingMatrix, tess: &Tessellation, i: usize) -> Result<NullVector> {
    let basis = null_basis(t, tess, i)?;
    Ok(null_vector(t, tess, i, basis.column(0).into_owned()))
}

/// `⟨t^(j), z⟩` for every block `j`.
pub fn projected_tags(t: &TaggingMatrix, z: &Vector) -> Vector {
    &t.t * z
}

/// `max |v_j| / min |v_j|` over `j ∈ F_i`. Equal magnitudes give 1 (even when
/// all vanish); otherwise a zero far-field tag gives `+∞`.
pub fn aspect_ratio(values: &Vector, tess: &Tessellation, i: usize) -> Result<f64> {
    let far = tess.far_field(i);
    if far.is_empty() {
        return Err(Error::EmptyFarField(i));
    }
    Ok(ratio_of(far.iter().map(|&j| values[j])))
}

fn ratio_of(values: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if hi == lo {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Projected far-field tags as a function of null-space coefficients.
struct Objective {
    /// `T(F_i, :) X` stored row-major, `|F_i| × s`.
    rows: Vec<f64>,
    s: usize,
}

impl Objective {
    fn new(f: &Matrix) -> Self {
        Self { rows: f.transpose().as_slice().to_vec(), s: f.ncols() }
    }

    fn eval(&self, alpha: &[f64]) -> f64 {
        ratio_of(self.rows.chunks_exact(self.s).map(|row| row.iter().zip(alpha).map(|(a, b)| a * b).sum()))
    }

    fn nullity(&self) -> usize {
        self.s
    }
}

/// Null vector minimizing the far-field aspect ratio over the unit sphere of
/// the null space of `T(N_i, :)`.
///
/// Nullity 2 uses a 360-point circle grid refined by golden-section search,
/// nullity 3 a 64×64 spherical grid, and higher nullities a random
/// multistart; both of the latter finish with a pattern search. The result is
/// never worse than the first null basis vector.
pub fn optimize_null_vector(t: &TaggingMatrix, tess: &Tessellation, i: usize) -> Result<NullVector> {
    let basis = null_basis(t, tess, i)?;
    let far = tess.far_field(i);
    let s = basis.ncols();
    if s < 2 || far.is_empty() {
        return Ok(null_vector(t, tess, i, basis.column(0).into_owned()));
    }
    let obj = Objective::new(&(t.rows(&far) * &basis));
    let mut e1 = vec![0.0; s];
    e1[0] = 1.0;
    let base = obj.eval(&e1);
    let (alpha, value) = match s {
        2 => optimize_circle(&obj),
        3 => optimize_sphere(&obj),
        _ => optimize_multistart(&obj, &RandomStream::new(0x7a67_5f6f_7074).child(i as u64)),
    };
    let alpha = if value <= base { alpha } else { e1 };
    let z = (&basis * Vector::from_vec(alpha)).normalize();
    Ok(null_vector(t, tess, i, z))
}

fn circle_point(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn optimize_circle(obj: &Objective) -> (Vec<f64>, f64) {
    const GRID: usize = 360;
    const REFINED: usize = 16;
    let h = std::f64::consts::PI / GRID as f64;
    let vals: Vec<f64> = (0..GRID).map(|g| obj.eval(&circle_point(g as f64 * h))).collect();
    let mut minima: Vec<usize> = (0..GRID)
        .filter(|&g| {
            let prev = vals[(g + GRID - 1) % GRID];
            let next = vals[(g + 1) % GRID];
            vals[g] <= prev && vals[g] <= next && vals[g].is_finite()
        })
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    minima.truncate(REFINED);

    let mut best = (0.0, vals[0]);
    for g in 0..GRID {
        if vals[g] < best.1 {
            best = (g as f64 * h, vals[g]);
        }
    }
    let f = |th: f64| obj.eval(&circle_point(th));
    for g in minima {
        let center = g as f64 * h;
        let (th, v) = golden_section(&f, center - h, center + h);
        if v < best.1 {
            best = (th, v);
        }
    }
    (circle_point(best.0).to_vec(), best.1)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(c, fc), (d, fd), (mid, fm)].into_iter().min_by(|x, y| x.1.total_cmp(&y.1)).expect("nonempty")
}

fn sphere_point(t1: f64, t2: f64) -> Vec<f64> {
    vec![t1.cos(), t1.sin() * t2.cos(), t1.sin() * t2.sin()]
}

fn optimize_sphere(obj: &Objective) -> (Vec<f64>, f64) {
    const GRID: usize = 64;
    let h1 = std::f64::consts::FRAC_PI_2 / (GRID - 1) as f64;
    let h2 = 2.0 * std::f64::consts::PI / GRID as f64;
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(GRID * GRID);
    for a in 0..GRID {
        for c in 0..GRID {
            let p = sphere_point(a as f64 * h1, c as f64 * h2);
            let v = obj.eval(&p);
            starts.push((p, v));
        }
    }
    refine_best(obj, starts, h1.min(h2))
}

fn optimize_multistart(obj: &Objective, stream: &RandomStream) -> (Vec<f64>, f64) {
    const SAMPLES: usize = 4096;
    let s = obj.nullity();
    let mut rng = stream.rng();
    let starts = (0..SAMPLES)
        .map(|_| {
            let mut p: Vec<f64> = (0..s).map(|_| rng.sample(StandardNormal)).collect();
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            p.iter_mut().for_each(|v| *v /= n);
            let v = obj.eval(&p);
            (p, v)
        })
        .collect();
    refine_best(obj, starts, 0.25)
}

fn refine_best(obj: &Objective, mut starts: Vec<(Vec<f64>, f64)>, step: f64) -> (Vec<f64>, f64) {
    const KEEP: usize = 4;
    starts.sort_by(|a, b| a.1.total_cmp(&b.1));
    starts.truncate(KEEP);
    starts
        .into_iter()
        .map(|(p, v)| pattern_search(obj, p, v, step))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start")
}

/// Compass search on the (scale-invariant) objective, renormalizing after
/// every accepted move.
fn pattern_search(obj: &Objective, mut p: Vec<f64>, mut value: f64, mut step: f64) -> (Vec<f64>, f64) {
    let s = p.len();
    while step > 1e-10 {
        let mut improved = false;
        for c in 0..s {
            for sign in [1.0, -1.0] {
                let mut q = p.clone();
                q[c] += sign * step;
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n == 0.0 {
                    continue;
                }
                q.iter_mut().for_each(|v| *v /= n);
                let vq = obj.eval(&q);
                if vq < value {
                    p = q;
                    value = vq;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (p, value)
}

/// Null vector and aspect ratios chosen for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTags {
    pub block: usize,
    pub nullity: usize,
    /// Null vector used for sketch combination.
    pub z: Vector,
    /// Full null basis of `T(N_i, :)`.
    pub basis: Matrix,
    /// Aspect ratio of the first basis vector; `None` for an empty far field.
    pub rho_base: Option<f64>,
    /// Aspect ratio of `z`.
    pub rho: Option<f64>,
}

/// Null vectors for every block, optimized when `optimize` is set and the
/// tagging matrix has extra columns.
pub fn block_tags(t: &TaggingMatrix, tess: &Tessellation, optimize: bool) -> Result<Vec<BlockTags>> {
    use rayon::prelude::*;
    (0..tess.num_blocks())
        .into_par_iter()
        .map(|i| {
            let basis = null_basis(t, tess, i)?;
            let x1 = basis.column(0).into_owned();
            let z = if optimize && t.extra_cols() >= 1 { optimize_null_vector(t, tess, i)?.z } else { x1.clone() };
            let rho_of = |v: &Vector| aspect_ratio(&projected_tags(t, v), tess, i).ok();
            Ok(BlockTags { block: i, nullity: basis.ncols(), rho_base: rho_of(&x1), rho: rho_of(&z), z, basis })
        })
        .collect()
}

/// True when some block's aspect ratio is infinite or above
/// [`ASPECT_REDRAW_THRESHOLD`].
pub fn needs_redraw(tags: &[BlockTags]) -> bool {
    tags.iter().filter_map(|b| b.rho).any(|r| !r.is_finite() || r > ASPECT_REDRAW_THRESHOLD)
}

/// Null vector of `T(N_i \ {j}, :)` with the largest tag at `j`, i.e. the
/// normalized projection of `t^(j)` onto that null space, and the tag
/// `⟨t^(j), z⟩` it leaves at block `j`.
pub fn pair_null_vector(t: &TaggingMatrix, tess: &Tessellation, i: usize, j: usize) -> Result<(Vector, f64)> {
    let rows: Vec<usize> = tess.neighbors(i).iter().copied().filter(|&l| l != j).collect();
    let scale = t.t.norm();
    let basis = null_basis_of(&t.rows(&rows), scale, i)?;
    let tj = t.t.row(j).transpose();
    let coeffs = basis.tr_mul(&tj);
    let denom = coeffs.norm();
    if denom < DEGENERACY_RTOL * scale {
        return Err(Error::DegenerateTags {
            block: i,
            reason: format!("tag of neighbor {j} vanishes on the reduced null space"),
        });
    }
    Ok((basis * coeffs / denom, denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tessellation::{build_tessellation, PointCloud};

    fn line(b: usize) -> Tessellation {
        let pts = PointCloud::new(1, (0..b).map(|i| (i as f64 + 0.5) / b as f64).collect()).unwrap();
        build_tessellation(&pts, b).unwrap()
    }

    #[test]
    fn shapes_and_distributions() {
        let s = RandomStream::new(5);
        let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &s).unwrap();
        assert_eq!(t.matrix().shape(), (8, 4));
        let t = make_tagging_matrix(8, 1, 1, TagDistribution::Gaussian, &s).unwrap();
        assert_eq!(t.matrix().shape(), (8, 5));
        let h = make_tagging_matrix(20, 2, 1, TagDistribution::Haar, &s).unwrap();
        let m = h.matrix();
        assert!((m.tr_mul(m) - Matrix::identity(11, 11)).amax() <= 1e-12);
        let e = make_tagging_matrix(30, 1, 2, TagDistribution::Equidistributed, &s).unwrap();
        for row in e.matrix().row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-12);
        }
        assert!(make_tagging_matrix(3, 1, 0, TagDistribution::Gaussian, &s).is_err());
        assert!("uniform".parse::<TagDistribution>().is_err());
        assert_eq!("Haar".parse::<TagDistribution>().unwrap(), TagDistribution::Haar);
    }

    #[test]
    fn interior_and_edge_null_vectors() {
        let tess = line(8);
        let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &RandomStream::new(1)).unwrap();
        let z = tag_null_vector(&t, &tess, 2).unwrap();
        assert!(z.residual <= 1e-13);
        assert!((z.z.norm() - 1.0).abs() <= 1e-13);
        let pt = projected_tags(&t, &z.z);
        for j in [1, 2, 3] {
            assert!(pt[j].abs() <= 1e-13);
        }
        assert_eq!(null_basis(&t, &tess, 0).unwrap().ncols(), 2);
        assert!(tag_null_vector(&t, &tess, 0).unwrap().residual <= 1e-13);
    }

    #[test]
    fn aspect_ratio_basics() {
        let tess = line(4);
        let v = Vector::from_vec(vec![0.0, 0.0, 2.0, -1.0]);
        assert_eq!(aspect_ratio(&v, &tess, 0).unwrap(), 2.0);
        let v = Vector::from_vec(vec![0.0, 0.0, -3.0, 3.0]);
        assert_eq!(aspect_ratio(&v, &tess, 0).unwrap(), 1.0);
        let v = Vector::from_vec(vec![0.0, 0.0, 0.0, 3.0]);
        assert_eq!(aspect_ratio(&v, &tess, 0).unwrap(), f64::INFINITY);
        assert!(matches!(aspect_ratio(&v, &line(2), 0), Err(Error::EmptyFarField(0))));
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let tess = line(8);
        let t = TaggingMatrix::from_matrix(Matrix::from_element(8, 4, 1.0), 1).unwrap();
        assert!(matches!(tag_null_vector(&t, &tess, 3), Err(Error::DegenerateTags { .. })));
        let z = Vector::from_vec(vec![0.5, -0.1, 0.3, 0.2]);
        assert_eq!(aspect_ratio(&projected_tags(&t, &z), &tess, 3).unwrap(), 1.0);
        assert_eq!(aspect_ratio(&Vector::zeros(8), &tess, 3).unwrap(), 1.0);
    }

    #[test]
    fn optimization_never_hurts() {
        let tess = line(12);
        for seed in 0..5 {
            let t = make_tagging_matrix(12, 1, 2, TagDistribution::Gaussian, &RandomStream::new(seed)).unwrap();
            for tags in block_tags(&t, &tess, true).unwrap() {
                assert!(tags.rho.unwrap() <= tags.rho_base.unwrap());
            }
        }
    }

    #[test]
    fn pair_vector_isolates_one_neighbor() {
        let tess = line(8);
        let t = make_tagging_matrix(8, 1, 0, TagDistribution::Gaussian, &RandomStream::new(3)).unwrap();
        let (z, denom) = pair_null_vector(&t, &tess, 1, 0).unwrap();
        let pt = projected_tags(&t, &z);
        assert!(pt[1].abs() <= 1e-13 && pt[2].abs() <= 1e-13);
        assert!((pt[0] - denom).abs() <= 1e-12);
    }
}
