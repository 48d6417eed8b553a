use std::collections::BTreeMap;

use crate::geometry::Vec3;

use super::crossing::{crossing_unchecked, dual_vertex, CubeFrame};
use super::grid::{CubeWeightGrad, FlexiGrid, S_EPS};
use super::mesh::{Provenance, TriMesh};
use super::surface::{edge_quad_cubes, quad_midpoint};
use super::ExtractError;

/// Gradients of a scalar loss with respect to every grid parameter.
/// `weights` holds an entry for every cube that received gradient, whether
/// or not the grid stores explicit weights for it.
#[derive(Clone, Debug, PartialEq)]
pub struct GridGradients {
    pub sdf: Vec<f64>,
    pub offsets: Vec<Vec3>,
    pub weights: BTreeMap<usize, CubeWeightGrad>,
}

impl GridGradients {
    pub fn zeros(num_vertices: usize) -> Self {
        Self {
            sdf: vec![0.0; num_vertices],
            offsets: vec![Vec3::zeros(); num_vertices],
            weights: BTreeMap::new(),
        }
    }
}

const POSITION_TOL: f64 = 1e-9;

fn matches(a: &Vec3, b: &Vec3) -> bool {
    (a - b).amax() <= POSITION_TOL * (1.0 + a.amax())
}

/// Pulls `d_positions` (one 3-vector per mesh vertex) back to the grid at
/// fixed topology.
///
/// Midpoint gradients are first distributed onto their quad's dual vertices
/// and the owner cube's γ, then every dual vertex is differentiated through
/// its crossings.
pub fn extract_backward(
    grid: &FlexiGrid,
    mesh: &TriMesh,
    d_positions: &[Vec3],
) -> Result<GridGradients, ExtractError> {
    grid.validate()?;
    let n = mesh.num_vertices();
    if d_positions.len() != n {
        return Err(ExtractError::GradientLength {
            expected: n,
            found: d_positions.len(),
        });
    }
    if mesh.provenance.len() != n {
        return Err(ExtractError::ProvenanceMismatch {
            vertex: mesh.provenance.len().min(n),
            reason: "provenance table length differs from vertex count",
        });
    }
    let layout = &grid.layout;
    let mut out = GridGradients::zeros(layout.num_vertices());

    let mut dual_slot = std::collections::HashMap::new();
    for (i, p) in mesh.provenance.iter().enumerate() {
        match *p {
            Provenance::Dual { cube } if cube < layout.num_cubes() => {
                let mismatch = |reason| ExtractError::ProvenanceMismatch { vertex: i, reason };
                let v_d = dual_vertex(grid, cube).ok_or_else(|| mismatch("cube has no sign change"))?;
                if !matches(&v_d, &mesh.positions[i]) {
                    return Err(mismatch("dual vertex moved"));
                }
                dual_slot.insert(cube, i);
            }
            Provenance::Dual { .. } => {
                return Err(ExtractError::ProvenanceMismatch {
                    vertex: i,
                    reason: "cube index out of range",
                })
            }
            Provenance::Midpoint { .. } => {}
            Provenance::External => {
                return Err(ExtractError::ProvenanceMismatch {
                    vertex: i,
                    reason: "vertex was not produced by extraction",
                })
            }
        }
    }

    let mut d_dual: Vec<Vec3> = vec![Vec3::zeros(); n];
    for (i, p) in mesh.provenance.iter().enumerate() {
        if let Provenance::Dual { .. } = p {
            d_dual[i] += d_positions[i];
        }
    }
    for (i, p) in mesh.provenance.iter().enumerate() {
        let Provenance::Midpoint { edge } = *p else {
            continue;
        };
        let (v, axis) = (edge / 3, edge % 3);
        let other = v + super::surface::vertex_stride(layout, axis);
        let mismatch = |reason| ExtractError::ProvenanceMismatch { vertex: i, reason };
        if v >= layout.num_vertices() || other >= layout.num_vertices() {
            return Err(mismatch("edge out of range"));
        }
        if grid.is_inside(v) == grid.is_inside(other) {
            return Err(mismatch("edge has no sign change"));
        }
        let [c0, c1, c2, c3] =
            edge_quad_cubes(layout, v, axis).ok_or_else(|| mismatch("edge lies on the boundary"))?;
        let cubes = if grid.is_inside(v) {
            [c0, c1, c2, c3]
        } else {
            [c0, c3, c2, c1]
        };
        let mut idx = [0usize; 4];
        for (k, c) in cubes.iter().enumerate() {
            idx[k] = *dual_slot.get(c).ok_or_else(|| mismatch("quad cube has no dual vertex"))?;
        }
        let gamma = grid.cube_weights(cubes[0]).gamma;
        let corners = idx.map(|j| &mesh.positions[j]);
        if !matches(&quad_midpoint(corners, gamma), &mesh.positions[i]) {
            return Err(mismatch("midpoint moved"));
        }
        let g = d_positions[i];
        let d_gamma = g.dot(&((corners[0] + corners[2]) - (corners[1] + corners[3]))) * 0.5;
        if g == Vec3::zeros() {
            continue;
        }
        out.weights.entry(cubes[0]).or_default().gamma += d_gamma;
        d_dual[idx[0]] += g * (0.5 * gamma);
        d_dual[idx[2]] += g * (0.5 * gamma);
        d_dual[idx[1]] += g * (0.5 * (1.0 - gamma));
        d_dual[idx[3]] += g * (0.5 * (1.0 - gamma));
    }

    for (i, p) in mesh.provenance.iter().enumerate() {
        let Provenance::Dual { cube } = *p else {
            continue;
        };
        let g = d_dual[i];
        if g == Vec3::zeros() {
            continue;
        }
        dual_backward(grid, cube, &g, &mut out);
    }
    Ok(out)
}

/// Chain rule through `v_d = Σ β_e u_e / Σ β_e` and the crossings `u_e`.
fn dual_backward(grid: &FlexiGrid, cube: usize, g: &Vec3, out: &mut GridGradients) {
    let frame = CubeFrame::new(grid, cube);
    let w = grid.cube_weights(cube);
    let total: f64 = frame.crossing_edges().map(|(e, _)| w.beta[e]).sum();
    let v_d = &dual_vertex(grid, cube).expect("caller checked the sign change");
    let mut wg = CubeWeightGrad::default();
    for (e, [a, b]) in frame.crossing_edges() {
        let (s_a, s_b) = (frame.s[a], frame.s[b]);
        let (x_a, x_b) = (&frame.x[a], &frame.x[b]);
        let u = crossing_unchecked(s_a, s_b, x_a, x_b, w.alpha[a], w.alpha[b]);
        wg.beta[e] += g.dot(&(u - v_d)) / total;
        let g_u = g * (w.beta[e] / total);

        let w_a = w.alpha[a] * s_b.abs();
        let w_b = w.alpha[b] * s_a.abs();
        let sum = w_a + w_b;
        let d_wa = g_u.dot(&(x_a - u)) / sum;
        let d_wb = g_u.dot(&(x_b - u)) / sum;
        let (va, vb) = (frame.corners[a], frame.corners[b]);
        out.offsets[va] += g_u * (w_a / sum);
        out.offsets[vb] += g_u * (w_b / sum);
        wg.alpha[a] += d_wa * s_b.abs();
        wg.alpha[b] += d_wb * s_a.abs();
        out.sdf[vb] += d_wa * w.alpha[a] * d_abs(grid.sdf[vb]);
        out.sdf[va] += d_wb * w.alpha[b] * d_abs(grid.sdf[va]);
    }
    let entry = out.weights.entry(cube).or_default();
    for k in 0..8 {
        entry.alpha[k] += wg.alpha[k];
    }
    for k in 0..12 {
        entry.beta[k] += wg.beta[k];
    }
}

/// Derivative of `|nudge(s)|` with respect to the raw value.
fn d_abs(s: f64) -> f64 {
    if s.abs() < S_EPS {
        0.0
    } else {
        s.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_mesh, CubeWeights, GridLayout};
    use crate::geometry::Aabb;

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let grid = FlexiGrid::from_fn(GridLayout::new(6, Aabb::default()), |p| p.norm() - 0.3);
        let mesh = extract_mesh(&grid).unwrap();
        let g = extract_backward(&grid, &mesh, &vec![Vec3::zeros(); mesh.num_vertices()]).unwrap();
        assert!(g.sdf.iter().all(|&x| x == 0.0));
        assert!(g.offsets.iter().all(|x| *x == Vec3::zeros()));
        assert!(g.weights.is_empty());
    }

    #[test]
    fn beta_is_stationary_at_the_symmetric_centroid() {
        // A corner-cut cube whose three crossings are symmetric about the
        // diagonal: the dual vertex equals their centroid and every
        // crossing sits at the same distance along the diagonal direction.
        let layout = GridLayout::new(1, Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)));
        let mut grid = FlexiGrid::from_fn(layout, |p| p.sum() - 0.5);
        grid.weights.insert(0, CubeWeights::default());
        let mut out = GridGradients::zeros(layout.num_vertices());
        dual_backward(&grid, 0, &Vec3::repeat(1.0), &mut out);
        for b in out.weights[&0].beta {
            assert!(b.abs() < 1e-15);
        }
    }

    #[test]
    fn foreign_mesh_is_rejected() {
        let grid = FlexiGrid::from_fn(GridLayout::new(6, Aabb::default()), |p| p.norm() - 0.3);
        let mut mesh = extract_mesh(&grid).unwrap();
        mesh.positions[0].x += 0.01;
        let g = vec![Vec3::zeros(); mesh.num_vertices()];
        assert!(matches!(
            extract_backward(&grid, &mesh, &g),
            Err(ExtractError::ProvenanceMismatch { vertex: 0, .. })
        ));
        let other = FlexiGrid::from_fn(GridLayout::new(6, Aabb::default()), |p| p.norm() - 0.2);
        let mesh = extract_mesh(&grid).unwrap();
        assert!(extract_backward(&other, &mesh, &g).is_err());
    }
}
