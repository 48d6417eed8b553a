use std::collections::{HashMap, HashSet};

use super::mesh::TriMesh;

/// Topology and quality summary of a triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshReport {
    /// Every undirected edge is shared by exactly two triangles.
    /// Vacuously true for an empty mesh.
    pub watertight: bool,
    pub empty: bool,
    /// Every directed edge occurs at most once, so neighbours agree on
    /// winding.
    pub consistently_oriented: bool,
    /// `V − E + F` over all vertices, unique edges and triangles.
    pub euler_characteristic: i64,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    /// Vertices at exactly the same position as an earlier vertex.
    pub duplicate_vertices: usize,
    /// Triangles with a repeated index or zero area.
    pub degenerate_triangles: usize,
    /// Smallest `4√3·area / Σ edge²` over non-degenerate triangles; 1 for
    /// an equilateral triangle. `None` when there is none.
    pub min_quality: Option<f64>,
}

pub fn mesh_validate(mesh: &TriMesh) -> MeshReport {
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    let mut oriented = true;
    let mut degenerate = 0;
    let mut min_quality: Option<f64> = None;
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            if u == v {
                continue;
            }
            *undirected.entry((u.min(v), u.max(v))).or_default() += 1;
            if !directed.insert((u, v)) {
                oriented = false;
            }
        }
        let area = mesh.face_area(t);
        if a == b || b == c || a == c || !(area > 0.0) {
            degenerate += 1;
            continue;
        }
        let [pa, pb, pc] = mesh.corners(t);
        let edges = (pb - pa).norm_squared() + (pc - pb).norm_squared() + (pa - pc).norm_squared();
        let q = 4.0 * 3f64.sqrt() * area / edges;
        min_quality = Some(min_quality.map_or(q, |m| m.min(q)));
    }
    let boundary = undirected.values().filter(|&&n| n == 1).count();
    let non_manifold = undirected.values().filter(|&&n| n > 2).count();

    let mut seen = HashSet::new();
    let duplicates = mesh
        .positions
        .iter()
        .filter(|p| !seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
        .count();

    MeshReport {
        watertight: boundary == 0 && non_manifold == 0,
        empty: mesh.triangles.is_empty(),
        consistently_oriented: oriented,
        euler_characteristic: mesh.num_vertices() as i64 - undirected.len() as i64
            + mesh.num_triangles() as i64,
        boundary_edges: boundary,
        non_manifold_edges: non_manifold,
        duplicate_vertices: duplicates,
        degenerate_triangles: degenerate,
        min_quality,
    }
}
