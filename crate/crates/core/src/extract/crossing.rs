use crate::geometry::Vec3;

use super::grid::{FlexiGrid, CUBE_EDGES};
use super::ExtractError;

/// Zero crossing on the segment `x_a`–`x_b`, biased by the endpoint weights.
///
/// `u = (α_a·|s_b|·x_a + α_b·|s_a|·x_b) / (α_a·|s_b| + α_b·|s_a|)`
pub fn edge_crossing(
    s_a: f64,
    s_b: f64,
    x_a: &Vec3,
    x_b: &Vec3,
    alpha_a: f64,
    alpha_b: f64,
) -> Result<Vec3, ExtractError> {
    if !(s_a * s_b < 0.0) {
        return Err(ExtractError::SameSign { s_a, s_b });
    }
    Ok(crossing_unchecked(s_a, s_b, x_a, x_b, alpha_a, alpha_b))
}

pub(super) fn crossing_unchecked(
    s_a: f64,
    s_b: f64,
    x_a: &Vec3,
    x_b: &Vec3,
    alpha_a: f64,
    alpha_b: f64,
) -> Vec3 {
    let w_a = alpha_a * s_b.abs();
    let w_b = alpha_b * s_a.abs();
    (x_a * w_a + x_b * w_b) / (w_a + w_b)
}

/// Per-cube quantities gathered once for forward and backward passes.
pub(super) struct CubeFrame {
    pub corners: [usize; 8],
    pub s: [f64; 8],
    pub x: [Vec3; 8],
}

impl CubeFrame {
    pub fn new(grid: &FlexiGrid, cube: usize) -> Self {
        let corners = grid.layout.cube_corners(cube);
        Self {
            corners,
            s: corners.map(|v| grid.effective_sdf(v)),
            x: corners.map(|v| grid.deformed_position(v)),
        }
    }

    pub fn crossing_edges(&self) -> impl Iterator<Item = (usize, [usize; 2])> + '_ {
        CUBE_EDGES
            .iter()
            .enumerate()
            .filter(|(_, [a, b])| (self.s[*a] < 0.0) != (self.s[*b] < 0.0))
            .map(|(e, &pair)| (e, pair))
    }
}

/// Dual vertex of `cube`: the β-weighted mean of its edge crossings, or
/// `None` when all corners share a sign.
pub fn dual_vertex(grid: &FlexiGrid, cube: usize) -> Option<Vec3> {
    let frame = CubeFrame::new(grid, cube);
    let w = grid.cube_weights(cube);
    let mut sum = Vec3::zeros();
    let mut total = 0.0;
    let mut count = 0;
    for (e, [a, b]) in frame.crossing_edges() {
        let u = crossing_unchecked(
            frame.s[a],
            frame.s[b],
            &frame.x[a],
            &frame.x[b],
            w.alpha[a],
            w.alpha[b],
        );
        sum += u * w.beta[e];
        total += w.beta[e];
        count += 1;
    }
    if count == 0 {
        return None;
    }
    debug_assert!(count >= 3, "a cube with a sign change has at least 3 crossings");
    Some(sum / total)
}
