//! Segmented voxel volumes as conductor networks.
//!
//! Every occupied voxel is a vertex. Voxels sharing a face, an edge or only
//! a corner are joined with conductance `k_face`, `k_edge` or `k_vertex`
//! times the voxel spacing, so that refining a voxelized sample keeps the
//! effective conductivity comparable. Occupied voxels in the first and last
//! layer along the solve axis connect to `w1` and `w2` with `k_face`
//! times the spacing. The solve axis never wraps; the transverse axes wrap
//! when the grid is flagged periodic.

mod pgm;

pub use pgm::{parse_pgm, write_pgm, GrayImage};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Axis, Vec3};
use crate::graph::{CalibrationConstants, CircuitGraph};
use crate::sample::Sample;
use crate::solver::{effective_conductance_with, SolveError, SolveMethod, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoxelError {
    #[error("volume has {actual} bytes but dimensions need {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("slice {index}: {message}")]
    BadSlice { index: usize, message: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    spacing: f64,
    /// Transverse axes wrap around when building graphs.
    pub periodic_transverse: bool,
    words: Vec<u64>,
    /// Occupied voxels before each word.
    rank: Vec<usize>,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], spacing: f64) -> Result<Self, VoxelError> {
        if dims.contains(&0) {
            return Err(VoxelError::InvalidGrid(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(VoxelError::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| VoxelError::InvalidGrid("grid too large".into()))?;
        let nwords = len.div_ceil(64);
        Ok(Self {
            dims,
            spacing,
            periodic_transverse: false,
            words: vec![0; nwords],
            rank: vec![0; nwords],
        })
    }

    pub fn from_fn(
        dims: [usize; 3],
        spacing: f64,
        f: impl Fn(usize, usize, usize) -> bool,
    ) -> Result<Self, VoxelError> {
        let mut g = Self::new(dims, spacing)?;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if f(x, y, z) {
                        let i = g.index(x, y, z);
                        g.words[i / 64] |= 1 << (i % 64);
                    }
                }
            }
        }
        g.rebuild_rank();
        Ok(g)
    }

    pub fn full(dims: [usize; 3], spacing: f64) -> Result<Self, VoxelError> {
        Self::from_fn(dims, spacing, |_, _, _| true)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.occupied_count() == 0
    }

    /// `x + nx * (y + ny * z)`
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bit(self.index(x, y, z))
    }

    fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Linear in the number of words after the edited one.
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        if self.bit(i) == value {
            return;
        }
        self.words[i / 64] ^= 1 << (i % 64);
        let delta: isize = if value { 1 } else { -1 };
        for r in &mut self.rank[i / 64 + 1..] {
            *r = r.wrapping_add_signed(delta);
        }
    }

    pub fn occupied_count(&self) -> usize {
        match (self.rank.last(), self.words.last()) {
            (Some(r), Some(w)) => r + w.count_ones() as usize,
            _ => 0,
        }
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.len() as f64
    }

    /// Vertex id of an occupied voxel: occupied voxels before it in index order.
    fn vertex_id(&self, i: usize) -> usize {
        let mask = (1u64 << (i % 64)) - 1;
        self.rank[i / 64] + (self.words[i / 64] & mask).count_ones() as usize
    }

    fn rebuild_rank(&mut self) {
        let mut acc = 0;
        for (r, w) in self.rank.iter_mut().zip(&self.words) {
            *r = acc;
            acc += w.count_ones() as usize;
        }
    }

    fn occupied_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                (w != 0).then(|| {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    64 * k + b
                })
            })
        })
    }

    /// Grid whose axis `i` is this grid's axis `perm[i]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let mut sorted = perm;
        sorted.sort_unstable();
        assert_eq!(sorted, [0, 1, 2], "not a permutation");
        let dims = perm.map(|p| self.dims[p]);
        let mut out = Self::new(dims, self.spacing).expect("dims already valid");
        out.periodic_transverse = self.periodic_transverse;
        for i in self.occupied_indices() {
            let c = self.coords(i);
            let j = out.index(c[perm[0]], c[perm[1]], c[perm[2]]);
            out.words[j / 64] |= 1 << (j % 64);
        }
        out.rebuild_rank();
        out
    }

    fn coords(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }
}

/// Occupancy is `byte >= threshold`; bytes are in `x + nx * (y + ny * z)` order.
pub fn load_voxel_raw(
    bytes: &[u8],
    dims: [usize; 3],
    threshold: u8,
) -> Result<VoxelGrid, VoxelError> {
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if bytes.len() != expected {
        return Err(VoxelError::SizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let mut g = VoxelGrid::new(dims, 1.0)?;
    for (i, &b) in bytes.iter().enumerate() {
        if b >= threshold {
            g.words[i / 64] |= 1 << (i % 64);
        }
    }
    g.rebuild_rank();
    Ok(g)
}

/// Slices are `z` layers in order; occupancy is `pixel >= threshold`.
pub fn load_slice_stack(slices: &[GrayImage], threshold: u16) -> Result<VoxelGrid, VoxelError> {
    let first = slices.first().ok_or_else(|| VoxelError::BadSlice {
        index: 0,
        message: "no slices".into(),
    })?;
    let (w, h) = (first.width, first.height);
    for (index, s) in slices.iter().enumerate() {
        if (s.width, s.height) != (w, h) {
            return Err(VoxelError::BadSlice {
                index,
                message: format!("{}x{} slice in a {w}x{h} stack", s.width, s.height),
            });
        }
    }
    let mut g = VoxelGrid::new([w, h, slices.len()], 1.0)?;
    for (z, s) in slices.iter().enumerate() {
        for (k, &p) in s.pixels.iter().enumerate() {
            if p >= threshold {
                let i = k + w * h * z;
                g.words[i / 64] |= 1 << (i % 64);
            }
        }
    }
    g.rebuild_rank();
    Ok(g)
}

/// Cubic grid over the cell with `resolution` voxels per edge; a voxel is
/// occupied iff its center lies in some inclusion (periodic membership).
pub fn voxelize_sample(sample: &Sample, resolution: usize) -> Result<VoxelGrid, VoxelError> {
    if resolution < 8 {
        return Err(VoxelError::InvalidGrid(format!(
            "resolution must be at least 8, got {resolution}"
        )));
    }
    let l = sample.cell.edge_length();
    let h = l / resolution as f64;
    let mut g = VoxelGrid::new([resolution; 3], h)?;
    g.periodic_transverse = true;
    let n = resolution as i64;
    for inc in &sample.inclusions {
        let c = inc.center();
        let reach = inc.reach();
        let lo = [0, 1, 2].map(|a| ((c[a] - reach) / h - 0.5).floor() as i64);
        let hi = [0, 1, 2].map(|a| ((c[a] + reach) / h - 0.5).ceil() as i64);
        // the box may wrap onto itself when the reach exceeds half the cell
        let span = |a: usize| (hi[a] - lo[a]).min(n - 1);
        for dz in 0..=span(2) {
            for dy in 0..=span(1) {
                for dx in 0..=span(0) {
                    let v = [lo[0] + dx, lo[1] + dy, lo[2] + dz].map(|k| k.rem_euclid(n) as usize);
                    let i = g.index(v[0], v[1], v[2]);
                    if g.bit(i) {
                        continue;
                    }
                    let p = Vec3::new(
                        (v[0] as f64 + 0.5) * h,
                        (v[1] as f64 + 0.5) * h,
                        (v[2] as f64 + 0.5) * h,
                    );
                    if inc.contains(&p, &sample.cell) {
                        g.words[i / 64] |= 1 << (i % 64);
                    }
                }
            }
        }
    }
    g.rebuild_rank();
    Ok(g)
}

/// Which voxel contacts become edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// Face, edge and vertex neighbours.
    #[default]
    Full26,
    /// Face and edge neighbours.
    Edge18,
    /// Face neighbours only.
    Face6,
}

impl std::str::FromStr for Connectivity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full26" | "26" => Ok(Connectivity::Full26),
            "edge18" | "18" => Ok(Connectivity::Edge18),
            "face6" | "6" => Ok(Connectivity::Face6),
            _ => Err(format!("unknown connectivity `{s}` (26, 18, 6)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    Face,
    Edge,
    Vertex,
}

/// One representative of each neighbour pair `{d, -d}`.
const HALF_OFFSETS: [([i64; 3], Adjacency); 13] = [
    ([1, 0, 0], Adjacency::Face),
    ([0, 1, 0], Adjacency::Face),
    ([0, 0, 1], Adjacency::Face),
    ([1, 1, 0], Adjacency::Edge),
    ([1, -1, 0], Adjacency::Edge),
    ([1, 0, 1], Adjacency::Edge),
    ([1, 0, -1], Adjacency::Edge),
    ([0, 1, 1], Adjacency::Edge),
    ([0, 1, -1], Adjacency::Edge),
    ([1, 1, 1], Adjacency::Vertex),
    ([1, 1, -1], Adjacency::Vertex),
    ([1, -1, 1], Adjacency::Vertex),
    ([1, -1, -1], Adjacency::Vertex),
];

impl Connectivity {
    fn admits(self, kind: Adjacency) -> bool {
        match self {
            Connectivity::Full26 => true,
            Connectivity::Edge18 => kind != Adjacency::Vertex,
            Connectivity::Face6 => kind == Adjacency::Face,
        }
    }
}

/// Calls `f(a, b, kind)` with voxel indices for every adjacent occupied pair.
fn for_each_adjacency(
    grid: &VoxelGrid,
    axis: Axis,
    conn: Connectivity,
    mut f: impl FnMut(usize, usize, Adjacency),
) {
    let dims = grid.dims.map(|d| d as i64);
    let solve = axis.index();
    for i in grid.occupied_indices() {
        let c = grid.coords(i).map(|v| v as i64);
        'offsets: for &(d, kind) in &HALF_OFFSETS {
            if !conn.admits(kind) {
                continue;
            }
            let mut q = [0usize; 3];
            for a in 0..3 {
                let mut v = c[a] + d[a];
                if v < 0 || v >= dims[a] {
                    if a == solve || !grid.periodic_transverse {
                        continue 'offsets;
                    }
                    v = v.rem_euclid(dims[a]);
                }
                q[a] = v as usize;
            }
            let j = grid.index(q[0], q[1], q[2]);
            if j != i && grid.bit(j) {
                f(i, j, kind);
            }
        }
    }
}

/// Counts of `[face, edge, vertex]` adjacencies among occupied voxels.
pub fn adjacency_counts(grid: &VoxelGrid, axis: Axis, conn: Connectivity) -> [usize; 3] {
    let mut counts = [0; 3];
    for_each_adjacency(grid, axis, conn, |_, _, kind| counts[kind as usize] += 1);
    counts
}

pub fn voxel_graph(grid: &VoxelGrid, axis: Axis, cal: &CalibrationConstants) -> CircuitGraph {
    voxel_graph_with(grid, axis, cal, Connectivity::Full26)
}

pub fn voxel_graph_with(
    grid: &VoxelGrid,
    axis: Axis,
    cal: &CalibrationConstants,
    conn: Connectivity,
) -> CircuitGraph {
    let n = grid.occupied_count();
    let (w1, w2) = (n, n + 1);
    let s = grid.spacing;
    let k = [cal.k_face * s, cal.k_edge * s, cal.k_vertex * s];
    let mut edges = Vec::new();
    for_each_adjacency(grid, axis, conn, |i, j, kind| {
        edges.push((grid.vertex_id(i), grid.vertex_id(j), k[kind as usize]));
    });
    let last = grid.dims[axis.index()] - 1;
    for i in grid.occupied_indices() {
        let c = grid.coords(i)[axis.index()];
        let v = grid.vertex_id(i);
        if c == 0 {
            edges.push((v, w1, k[0]));
        }
        if c == last {
            edges.push((v, w2, k[0]));
        }
    }
    CircuitGraph::new(n + 2, w1, w2, edges).expect("voxel graphs are valid by construction")
}

/// Effective conductance along x, y and z, always on the iterative path.
pub fn voxel_effective_conductivity(
    grid: &VoxelGrid,
    cal: &CalibrationConstants,
    conn: Connectivity,
    opts: &SolverOptions,
) -> Result<[f64; 3], VoxelError> {
    let opts = SolverOptions {
        method: SolveMethod::LaplacianCg,
        ..opts.clone()
    };
    let v: Vec<f64> = Axis::ALL
        .par_iter()
        .map(|&a| effective_conductance_with(&voxel_graph_with(grid, a, cal, conn), &opts))
        .collect::<Result<_, _>>()?;
    Ok([v[0], v[1], v[2]])
}
