use super::crossing::dual_vertex;
use super::grid::{FlexiGrid, GridLayout};
use super::mesh::{Provenance, TriMesh};
use super::ExtractError;

/// The four cubes around grid edge `3·v + axis`, in counter-clockwise order
/// seen from the edge's positive direction: offsets (−,−), (+,−), (+,+),
/// (−,+) in the two remaining axes taken cyclically. The first entry has
/// the lowest linear index. `None` for edges on the grid boundary.
pub fn edge_quad_cubes(layout: &GridLayout, v: usize, axis: usize) -> Option<[usize; 4]> {
    let r = layout.resolution;
    let coords = layout.vertex_coords(v);
    let b = (axis + 1) % 3;
    let c = (axis + 2) % 3;
    if coords[axis] >= r || coords[b] == 0 || coords[b] >= r || coords[c] == 0 || coords[c] >= r {
        return None;
    }
    let cube_at = |db: usize, dc: usize| {
        let mut q = coords;
        q[b] = coords[b] + db - 1;
        q[c] = coords[c] + dc - 1;
        layout.cube_index(q[0], q[1], q[2])
    };
    Some([cube_at(0, 0), cube_at(1, 0), cube_at(1, 1), cube_at(0, 1)])
}

/// A quad over one sign-changing edge, cubes listed starting from the
/// γ owner and wound so the face normal points to positive sdf.
pub(super) struct Quad {
    pub edge: usize,
    pub cubes: [usize; 4],
}

pub(super) fn vertex_stride(layout: &GridLayout, axis: usize) -> usize {
    layout.vertices_per_axis().pow(axis as u32)
}

/// Enumerates quads in ascending edge id.
pub(super) fn quads(grid: &FlexiGrid) -> Vec<Quad> {
    let layout = &grid.layout;
    let inside: Vec<bool> = (0..layout.num_vertices()).map(|v| grid.is_inside(v)).collect();
    let strides = [0, 1, 2].map(|a| vertex_stride(layout, a));
    let mut out = Vec::new();
    for v in 0..layout.num_vertices() {
        for axis in 0..3 {
            let w = v + strides[axis];
            if w >= inside.len() || inside[v] == inside[w] {
                continue;
            }
            let Some([c0, c1, c2, c3]) = edge_quad_cubes(layout, v, axis) else {
                continue;
            };
            let cubes = if inside[v] {
                [c0, c1, c2, c3]
            } else {
                [c0, c3, c2, c1]
            };
            out.push(Quad {
                edge: 3 * v + axis,
                cubes,
            });
        }
    }
    out
}

/// Fan midpoint `(γ·(v1+v3) + (1−γ)·(v2+v4)) / 2`.
pub(super) fn quad_midpoint(
    v: [&crate::geometry::Vec3; 4],
    gamma: f64,
) -> crate::geometry::Vec3 {
    ((v[0] + v[2]) * gamma + (v[1] + v[3]) * (1.0 - gamma)) * 0.5
}

/// Extracts the weighted dual surface of `grid`.
///
/// Vertices are ordered dual vertices by cube index, then quad midpoints by
/// edge id; triangles follow edge id. Cubes whose only sign changes lie on
/// the grid boundary produce no vertex.
pub fn extract_mesh(grid: &FlexiGrid) -> Result<TriMesh, ExtractError> {
    grid.validate()?;
    let quads = quads(grid);
    let mut used: Vec<usize> = quads.iter().flat_map(|q| q.cubes).collect();
    used.sort_unstable();
    used.dedup();

    let mut mesh = TriMesh::default();
    let mut slot = std::collections::HashMap::with_capacity(used.len());
    for &cube in &used {
        let p = dual_vertex(grid, cube).expect("quad cubes straddle a sign change");
        slot.insert(cube, mesh.positions.len());
        mesh.positions.push(p);
        mesh.provenance.push(Provenance::Dual { cube });
    }
    for q in &quads {
        let idx = q.cubes.map(|c| slot[&c]);
        let gamma = grid.cube_weights(q.cubes[0]).gamma;
        let m = quad_midpoint(idx.map(|i| &mesh.positions[i]), gamma);
        let mi = mesh.positions.len();
        mesh.positions.push(m);
        mesh.provenance.push(Provenance::Midpoint { edge: q.edge });
        for k in 0..4 {
            mesh.triangles.push([idx[k], idx[(k + 1) % 4], mi]);
        }
    }
    Ok(mesh)
}
