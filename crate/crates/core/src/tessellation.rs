//! Flat box partitions of a point cloud on a regular grid.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RandomStream;

/// Points in the unit hypercube `[0, 1]^d`, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Wraps `coords` (point-major, `dim` values per point).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form a nonempty set of {dim}-d points",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::PointOutOfRange { index: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::Shape(format!("point of length {} in a {dim}-d cloud", p.len())));
        }
        Self::new(dim, points.iter().flatten().copied().collect())
    }

    /// `n` points drawn uniformly from the unit hypercube.
    pub fn uniform(n: usize, dim: usize, stream: &RandomStream) -> Result<Self> {
        let mut rng = stream.rng();
        let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Partition of `0..n` into `b` boxes with near-field neighbor lists.
///
/// Blocks and neighbor ids are 0-based. Every neighbor list contains the block
/// itself and is sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Tessellation {
    dim: usize,
    n: usize,
    blocks: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    /// Grid coordinates of each box when built from a regular grid.
    cells: Option<Vec<[usize; 3]>>,
    per_axis: usize,
}

impl Tessellation {
    /// Builds a tessellation from explicit blocks and neighbor lists,
    /// checking every structural invariant.
    pub fn from_parts(dim: usize, blocks: Vec<Vec<usize>>, neighbors: Vec<Vec<usize>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        let t = Self { dim, n: blocks.iter().map(Vec::len).sum(), blocks, neighbors, cells: None, per_axis: 0 };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let b = self.blocks.len();
        if self.neighbors.len() != b {
            return Err(Error::Shape(format!("{} neighbor lists for {b} blocks", self.neighbors.len())));
        }
        let mut seen = vec![false; self.n];
        for (i, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidArgument(format!("block {i} is empty")));
            }
            for &p in block {
                if p >= self.n || std::mem::replace(&mut seen[p], true) {
                    return Err(Error::InvalidArgument(format!(
                        "blocks do not partition 0..{}: index {p} repeated or out of range",
                        self.n
                    )));
                }
            }
        }
        let limit = 3usize.pow(self.dim as u32);
        for (i, nb) in self.neighbors.iter().enumerate() {
            if !nb.contains(&i) || nb.len() > limit || nb.iter().any(|&j| j >= b) {
                return Err(Error::InvalidArgument(format!("neighbor list of block {i} is malformed")));
            }
            if nb.iter().any(|&j| !self.neighbors[j].contains(&i)) {
                return Err(Error::InvalidArgument(format!("neighbor relation not symmetric at block {i}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of indices.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.blocks[i].len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// `F_i = [b] \ N_i`, ascending.
    pub fn far_field(&self, i: usize) -> Vec<usize> {
        (0..self.num_blocks()).filter(|&j| !self.is_neighbor(i, j)).collect()
    }

    /// Concatenated indices of the blocks in `ids`, in the order given.
    pub fn indices_of(&self, ids: &[usize]) -> Vec<usize> {
        ids.iter().flat_map(|&j| self.blocks[j].iter().copied()).collect()
    }

    /// Boxes per axis of the generating grid, or 0 for hand-built partitions.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    /// True when the tessellation is a regular grid with no dropped cells.
    pub fn is_full_grid(&self) -> bool {
        self.cells.is_some() && self.num_blocks() == self.per_axis.pow(self.dim as u32)
    }

    pub fn to_json(&self, coloring: &BoxColoring) -> TessellationJson {
        TessellationJson {
            dim: self.dim,
            b: self.num_blocks(),
            blocks: self.blocks.clone(),
            neighbors: self.neighbors.iter().map(|nb| nb.iter().map(|j| j + 1).collect()).collect(),
            colors: coloring.colors.iter().map(|c| c + 1).collect(),
            per_axis: self.cells.as_ref().map(|_| self.per_axis),
            cells: self.cells.clone(),
        }
    }

    pub fn from_json(json: &TessellationJson) -> Result<(Self, BoxColoring)> {
        if json.b != json.blocks.len() || json.colors.len() != json.b {
            return Err(Error::Shape("tessellation JSON counts disagree".into()));
        }
        let neighbors = json
            .neighbors
            .iter()
            .map(|nb| {
                nb.iter()
                    .map(|&j| j.checked_sub(1).ok_or_else(|| Error::InvalidArgument("block ids are 1-based".into())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Self::from_parts(json.dim, json.blocks.clone(), neighbors)?;
        match (&json.cells, json.per_axis) {
            (Some(cells), Some(per_axis)) => {
                if cells.len() != json.b || cells.iter().flatten().any(|&c| c >= per_axis.max(1)) {
                    return Err(Error::Shape("tessellation JSON cells disagree with the grid".into()));
                }
                t.cells = Some(cells.clone());
                t.per_axis = per_axis;
            }
            (None, None) => {}
            _ => return Err(Error::Shape("tessellation JSON needs both cells and per_axis".into())),
        }
        let colors = json
            .colors
            .iter()
            .map(|&c| c.checked_sub(1).ok_or_else(|| Error::InvalidArgument("color ids are 1-based".into())))
            .collect::<Result<Vec<_>>>()?;
        let coloring = BoxColoring::from_colors(colors);
        coloring.validate(&t)?;
        Ok((t, coloring))
    }
}

/// Serialized tessellation. Point indices are 0-based; block and color ids
/// are 1-based. Grid-built tessellations also record their 0-based cell
/// coordinates and boxes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TessellationJson {
    pub dim: usize,
    pub b: usize,
    pub blocks: Vec<Vec<usize>>,
    pub neighbors: Vec<Vec<usize>>,
    pub colors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<[usize; 3]>>,
}

fn integer_root(count: usize, dim: usize) -> Option<usize> {
    let guess = (count as f64).powf(1.0 / dim as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&n| n >= 1 && n.pow(dim as u32) == count)
}

/// Assigns every point to the cell of a regular `n^d` grid containing it and
/// keeps the nonempty cells as blocks.
pub fn build_tessellation(points: &PointCloud, target_block_count: usize) -> Result<Tessellation> {
    let dim = points.dim();
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidDimension(dim));
    }
    let n = integer_root(target_block_count, dim).ok_or(Error::NotAPower { count: target_block_count, dim })?;
    let cell_of = |x: &[f64]| {
        let mut c = [0usize; 3];
        for (a, &v) in x.iter().enumerate() {
            c[a] = ((v * n as f64).floor() as usize).min(n - 1);
        }
        c
    };
    let linear = |c: &[usize; 3]| c[0] + n * (c[1] + n * c[2]);

    let total = n.pow(dim as u32);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 0..points.len() {
        let p = points.point(i);
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::PointOutOfRange { index: i });
        }
        members[linear(&cell_of(p))].push(i);
    }

    let mut cells = Vec::new();
    let mut blocks = Vec::new();
    let mut id_of = HashMap::new();
    for (lin, m) in members.into_iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let c = [lin % n, (lin / n) % n, lin / (n * n)];
        id_of.insert(lin, blocks.len());
        cells.push(c);
        blocks.push(m);
    }

    let offsets: Vec<[isize; 3]> = (0..3usize.pow(dim as u32))
        .map(|o| {
            let mut d = [0isize; 3];
            for (a, slot) in d.iter_mut().enumerate().take(dim) {
                *slot = ((o / 3usize.pow(a as u32)) % 3) as isize - 1;
            }
            d
        })
        .collect();
    let neighbors = cells
        .iter()
        .map(|c| {
            let mut nb: Vec<usize> = offsets
                .iter()
                .filter_map(|o| {
                    let mut q = [0usize; 3];
                    for a in 0..3 {
                        let v = c[a] as isize + o[a];
                        if v < 0 || v >= n as isize {
                            return None;
                        }
                        q[a] = v as usize;
                    }
                    id_of.get(&linear(&q)).copied()
                })
                .collect();
            nb.sort_unstable();
            nb
        })
        .collect();

    Ok(Tessellation { dim, n: points.len(), blocks, neighbors, cells: Some(cells), per_axis: n })
}

/// Block count balancing basis and near-field sampling costs:
/// the `d`-th power of the per-axis count nearest `(√(3^d/k)·√N)^{1/d}`,
/// with at least two boxes per axis.
pub fn suggest_block_count(n: usize, k: usize, d: usize) -> usize {
    let b = (3f64.powi(d as i32) / k.max(1) as f64).sqrt() * (n as f64).sqrt();
    let per_axis = (b.powf(1.0 / d as f64).round() as usize).max(2);
    per_axis.pow(d as u32)
}

/// Distance-2 coloring of the box graph. Colors are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxColoring {
    colors: Vec<usize>,
    num_colors: usize,
}

impl BoxColoring {
    fn from_colors(colors: Vec<usize>) -> Self {
        let mut used: Vec<usize> = colors.clone();
        used.sort_unstable();
        used.dedup();
        let colors = colors.into_iter().map(|c| used.binary_search(&c).expect("color present")).collect();
        Self { colors, num_colors: used.len() }
    }

    pub fn color(&self, block: usize) -> usize {
        self.colors[block]
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn num_colors(&self) -> usize {
        self.num_colors
    }

    /// Blocks of each color, ascending.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_colors];
        for (i, &c) in self.colors.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Fails on the first pair of same-colored blocks sharing a neighbor.
    pub fn validate(&self, t: &Tessellation) -> Result<()> {
        if self.colors.len() != t.num_blocks() {
            return Err(Error::Shape("coloring size differs from block count".into()));
        }
        for i in 0..t.num_blocks() {
            for &j in t.neighbors(i) {
                for &l in t.neighbors(j) {
                    if l != i && self.colors[l] == self.colors[i] {
                        return Err(Error::InvalidColoring(i.min(l), i.max(l)));
                    }
                }
            }
        }
        Ok(())
    }
}

fn greedy_coloring(t: &Tessellation) -> BoxColoring {
    let b = t.num_blocks();
    let mut colors = vec![usize::MAX; b];
    for i in 0..b {
        let mut taken = Vec::new();
        for &j in t.neighbors(i) {
            for &l in t.neighbors(j) {
                if colors[l] != usize::MAX {
                    taken.push(colors[l]);
                }
            }
        }
        colors[i] = (0..).find(|c| !taken.contains(c)).expect("unbounded range");
    }
    BoxColoring::from_colors(colors)
}

/// Colors boxes so that any two sharing a neighbor differ. Regular grids use
/// grid coordinates modulo 3 (exactly `3^d` colors on full grids with at
/// least three boxes per axis); partial grids keep whichever of that and a
/// greedy coloring uses fewer colors.
pub fn color_boxes(t: &Tessellation) -> BoxColoring {
    let Some(cells) = &t.cells else {
        return greedy_coloring(t);
    };
    let modular = BoxColoring::from_colors(cells.iter().map(|c| c[0] % 3 + 3 * (c[1] % 3) + 9 * (c[2] % 3)).collect());
    if t.is_full_grid() {
        return modular;
    }
    let greedy = greedy_coloring(t);
    if greedy.num_colors < modular.num_colors {
        greedy
    } else {
        modular
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equispaced_1d(n: usize) -> PointCloud {
        PointCloud::new(1, (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()).unwrap()
    }

    fn grid_2d(per_axis: usize, per_cell: usize) -> PointCloud {
        let mut coords = Vec::new();
        for y in 0..per_axis {
            for x in 0..per_axis {
                for s in 0..per_cell {
                    let off = (s as f64 + 0.5) / per_cell as f64;
                    coords.push((x as f64 + off) / per_axis as f64);
                    coords.push((y as f64 + 0.5) / per_axis as f64);
                }
            }
        }
        PointCloud::new(2, coords).unwrap()
    }

    #[test]
    fn neighbor_lists_in_one_dimension() {
        let t = build_tessellation(&equispaced_1d(8), 8).unwrap();
        assert_eq!(t.num_blocks(), 8);
        assert_eq!(t.neighbors(2), &[1, 2, 3]);
        assert_eq!(t.neighbors(0), &[0, 1]);
        assert_eq!(t.far_field(2), vec![0, 4, 5, 6, 7]);
    }

    #[test]
    fn interior_box_in_two_dimensions_has_nine_neighbors() {
        let t = build_tessellation(&grid_2d(4, 3), 16).unwrap();
        assert_eq!(t.neighbors(5).len(), 9);
        assert_eq!(t.neighbors(0).len(), 4);
        assert!(t.is_full_grid());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(PointCloud::new(4, vec![0.5; 4]), Err(Error::InvalidDimension(4))));
        assert!(matches!(build_tessellation(&grid_2d(4, 1), 8), Err(Error::NotAPower { count: 8, dim: 2 })));
        assert!(matches!(PointCloud::new(1, vec![0.2, 1.5]), Err(Error::PointOutOfRange { index: 1 })));
    }

    #[test]
    fn empty_cells_are_dropped() {
        let pts = PointCloud::new(1, vec![0.05, 0.1, 0.9]).unwrap();
        let t = build_tessellation(&pts, 4).unwrap();
        assert_eq!(t.num_blocks(), 2);
        assert_eq!(t.blocks(), &[vec![0, 1], vec![2]]);
        assert_eq!(t.neighbors(0), &[0]);
        assert!(!t.is_full_grid());
    }

    #[test]
    fn suggested_counts() {
        assert_eq!(suggest_block_count(20000, 30, 2), 81);
        assert_eq!(suggest_block_count(100, 100, 1), 2);
        assert_eq!(suggest_block_count(900, 9, 1), 17);
    }

    #[test]
    fn one_dimensional_coloring_has_period_three() {
        let t = build_tessellation(&equispaced_1d(8), 8).unwrap();
        let c = color_boxes(&t);
        assert_eq!(c.num_colors(), 3);
        assert_eq!(c.classes(), vec![vec![0, 3, 6], vec![1, 4, 7], vec![2, 5]]);
        c.validate(&t).unwrap();
    }

    #[test]
    fn small_grids_color_every_box_distinctly() {
        let t = build_tessellation(&grid_2d(3, 1), 9).unwrap();
        assert_eq!(color_boxes(&t).num_colors(), 9);
        let single = build_tessellation(&equispaced_1d(5), 1).unwrap();
        assert_eq!(color_boxes(&single).num_colors(), 1);
    }

    #[test]
    fn json_round_trip() {
        let t = build_tessellation(&equispaced_1d(8), 8).unwrap();
        let c = color_boxes(&t);
        let json = t.to_json(&c);
        assert_eq!(json.neighbors[2], vec![2, 3, 4]);
        assert_eq!(json.colors[..4], [1, 2, 3, 1]);
        let text = serde_json::to_string(&json).unwrap();
        let (t2, c2) = Tessellation::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(t2.blocks(), t.blocks());
        assert_eq!(c2, c);
    }
}
