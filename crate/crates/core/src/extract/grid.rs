use std::collections::BTreeMap;

use crate::geometry::{Aabb, Vec3};

use super::ExtractError;

/// Values with `|s|` below this are nudged to `+S_EPS` before signs are read.
pub const S_EPS: f64 = 1e-8;

/// Corner `c` of a cube sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
pub const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The twelve cube edges as corner pairs: four along x, four along y,
/// four along z.
pub const CUBE_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Resolution and placement of a cubical grid.
///
/// Vertices are indexed `i + n·(j + n·k)` with `n = R + 1`, cubes
/// `i + R·(j + R·k)`, and grid edges `3·vertex + axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridLayout {
    pub resolution: usize,
    pub bounds: Aabb,
}

impl GridLayout {
    pub fn new(resolution: usize, bounds: Aabb) -> Self {
        Self { resolution, bounds }
    }

    pub fn vertices_per_axis(&self) -> usize {
        self.resolution + 1
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices_per_axis().pow(3)
    }

    pub fn num_cubes(&self) -> usize {
        self.resolution.pow(3)
    }

    /// Per-axis cell size.
    pub fn cell(&self) -> Vec3 {
        self.bounds.size() / self.resolution as f64
    }

    /// Smallest cell edge; the reference length for offset bounds.
    pub fn cell_edge(&self) -> f64 {
        self.cell().min()
    }

    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.vertices_per_axis();
        i + n * (j + n * k)
    }

    pub fn vertex_coords(&self, v: usize) -> [usize; 3] {
        let n = self.vertices_per_axis();
        [v % n, (v / n) % n, v / (n * n)]
    }

    pub fn cube_index(&self, i: usize, j: usize, k: usize) -> usize {
        let r = self.resolution;
        i + r * (j + r * k)
    }

    pub fn cube_coords(&self, c: usize) -> [usize; 3] {
        let r = self.resolution;
        [c % r, (c / r) % r, c / (r * r)]
    }

    /// Undeformed position of a vertex.
    pub fn vertex_position(&self, v: usize) -> Vec3 {
        let [i, j, k] = self.vertex_coords(v);
        let cell = self.cell();
        self.bounds.min() + Vec3::new(i as f64 * cell.x, j as f64 * cell.y, k as f64 * cell.z)
    }

    pub fn cube_center(&self, c: usize) -> Vec3 {
        let [i, j, k] = self.cube_coords(c);
        let cell = self.cell();
        self.bounds.min()
            + Vec3::new(
                (i as f64 + 0.5) * cell.x,
                (j as f64 + 0.5) * cell.y,
                (k as f64 + 0.5) * cell.z,
            )
    }

    /// Vertex indices of the eight corners of cube `c`, in corner order.
    pub fn cube_corners(&self, c: usize) -> [usize; 8] {
        let [i, j, k] = self.cube_coords(c);
        CORNER_OFFSETS.map(|[a, b, d]| self.vertex_index(i + a, j + b, k + d))
    }

    /// All undeformed vertex positions in index order.
    pub fn vertex_positions(&self) -> Vec<Vec3> {
        (0..self.num_vertices()).map(|v| self.vertex_position(v)).collect()
    }
}

/// Per-cube weights: `alpha` per corner biases edge crossings, `beta` per
/// edge weights the dual-vertex average, `gamma` splits quads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeWeights {
    pub alpha: [f64; 8],
    pub beta: [f64; 12],
    pub gamma: f64,
}

impl Default for CubeWeights {
    fn default() -> Self {
        Self {
            alpha: [1.0; 8],
            beta: [1.0; 12],
            gamma: 0.5,
        }
    }
}

/// Gradient with respect to one cube's [`CubeWeights`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CubeWeightGrad {
    pub alpha: [f64; 8],
    pub beta: [f64; 12],
    pub gamma: f64,
}

/// A deformable grid ready for extraction.
///
/// Cube weights are sparse: cubes missing from `weights` use
/// [`CubeWeights::default`], which reduces extraction to plain dual
/// marching cubes.
#[derive(Clone, Debug)]
pub struct FlexiGrid {
    pub layout: GridLayout,
    pub sdf: Vec<f64>,
    pub offsets: Vec<Vec3>,
    pub weights: BTreeMap<usize, CubeWeights>,
}

impl FlexiGrid {
    /// Grid with zero offsets and default weights.
    pub fn new(layout: GridLayout, sdf: Vec<f64>) -> Self {
        let n = layout.num_vertices();
        Self {
            layout,
            sdf,
            offsets: vec![Vec3::zeros(); n],
            weights: BTreeMap::new(),
        }
    }

    /// Samples `f` at every vertex.
    pub fn from_fn(layout: GridLayout, f: impl Fn(&Vec3) -> f64) -> Self {
        let sdf = (0..layout.num_vertices())
            .map(|v| f(&layout.vertex_position(v)))
            .collect();
        Self::new(layout, sdf)
    }

    pub fn cube_weights(&self, c: usize) -> CubeWeights {
        self.weights.get(&c).copied().unwrap_or_default()
    }

    /// The sdf value after the epsilon nudge.
    pub fn effective_sdf(&self, v: usize) -> f64 {
        nudge(self.sdf[v])
    }

    pub fn is_inside(&self, v: usize) -> bool {
        self.effective_sdf(v) < 0.0
    }

    /// Deformed vertex position `x + δ`.
    pub fn deformed_position(&self, v: usize) -> Vec3 {
        self.layout.vertex_position(v) + self.offsets[v]
    }

    /// Bitmask of inside corners; 0 or 255 means no crossing.
    pub fn corner_mask(&self, c: usize) -> u8 {
        self.layout
            .cube_corners(c)
            .iter()
            .enumerate()
            .fold(0u8, |m, (bit, &v)| if self.is_inside(v) { m | (1 << bit) } else { m })
    }

    pub fn is_crossing(&self, c: usize) -> bool {
        let m = self.corner_mask(c);
        m != 0 && m != 0xff
    }

    /// Indices of all cubes with a sign change, ascending.
    pub fn crossing_cubes(&self) -> Vec<usize> {
        (0..self.layout.num_cubes()).filter(|&c| self.is_crossing(c)).collect()
    }

    /// Checks the invariants extraction relies on.
    pub fn validate(&self) -> Result<(), ExtractError> {
        let layout = &self.layout;
        if layout.resolution == 0 || !layout.bounds.is_valid() {
            return Err(ExtractError::InvalidLayout);
        }
        let n = layout.num_vertices();
        if self.sdf.len() != n || self.offsets.len() != n {
            return Err(ExtractError::BufferLength {
                expected: n,
                sdf: self.sdf.len(),
                offsets: self.offsets.len(),
            });
        }
        let half_cell = 0.5 * layout.cell_edge();
        for v in 0..n {
            if !self.sdf[v].is_finite() {
                return Err(ExtractError::InvalidVertex {
                    vertex: v,
                    reason: "non-finite sdf",
                });
            }
            let d = &self.offsets[v];
            if !d.iter().all(|x| x.is_finite()) {
                return Err(ExtractError::InvalidVertex {
                    vertex: v,
                    reason: "non-finite offset",
                });
            }
            if d.amax() >= half_cell {
                return Err(ExtractError::InvalidVertex {
                    vertex: v,
                    reason: "offset leaves the dual cell",
                });
            }
        }
        for (&c, w) in &self.weights {
            if c >= layout.num_cubes() {
                return Err(ExtractError::InvalidCube {
                    cube: c,
                    reason: "index out of range",
                });
            }
            let positive = |x: &f64| x.is_finite() && *x > 0.0;
            if !w.alpha.iter().all(positive) || !w.beta.iter().all(positive) {
                return Err(ExtractError::InvalidCube {
                    cube: c,
                    reason: "alpha and beta must be finite and positive",
                });
            }
            if !(0.0..=1.0).contains(&w.gamma) {
                return Err(ExtractError::InvalidCube {
                    cube: c,
                    reason: "gamma outside [0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// Replaces near-zero values with `+S_EPS` so that no vertex sits exactly
/// on the surface.
pub fn nudge(s: f64) -> f64 {
    if s.abs() < S_EPS {
        S_EPS
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips() {
        let layout = GridLayout::new(5, Aabb::default());
        for v in [0, 7, 100, layout.num_vertices() - 1] {
            let [i, j, k] = layout.vertex_coords(v);
            assert_eq!(layout.vertex_index(i, j, k), v);
        }
        for c in [0, 3, 77, layout.num_cubes() - 1] {
            let [i, j, k] = layout.cube_coords(c);
            assert_eq!(layout.cube_index(i, j, k), c);
        }
    }

    #[test]
    fn exact_zero_is_nudged_outside() {
        assert_eq!(nudge(0.0), S_EPS);
        assert_eq!(nudge(-1e-9), S_EPS);
        assert_eq!(nudge(-1e-3), -1e-3);
    }

    #[test]
    fn validation_names_the_offending_vertex() {
        let layout = GridLayout::new(2, Aabb::default());
        let mut grid = FlexiGrid::from_fn(layout, |p| p.norm() - 0.3);
        grid.offsets[5] = Vec3::new(0.3, 0.0, 0.0);
        match grid.validate() {
            Err(ExtractError::InvalidVertex { vertex, .. }) => assert_eq!(vertex, 5),
            other => panic!("unexpected {other:?}"),
        }
        grid.offsets[5] = Vec3::zeros();
        grid.weights.insert(3, CubeWeights { gamma: 1.5, ..Default::default() });
        assert!(matches!(grid.validate(), Err(ExtractError::InvalidCube { cube: 3, .. })));
    }
}
