use rand::{Rng, RngExt};

use crate::geometry::Vec3;

/// Where a mesh vertex came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Dual vertex of the cube with this linear index.
    Dual { cube: usize },
    /// Quad midpoint for the grid edge with this id (`3·vertex + axis`).
    Midpoint { edge: usize },
    /// Not produced by extraction (e.g. loaded from a file).
    External,
}

/// Triangle mesh. Triangles wind counter-clockwise seen from the side the
/// face normal points to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub provenance: Vec<Provenance>,
}

impl TriMesh {
    /// Mesh without extraction provenance.
    pub fn from_parts(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Self {
        let provenance = vec![Provenance::External; positions.len()];
        Self {
            positions,
            triangles,
            provenance,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.positions[i])
    }

    /// Unnormalised normal; its length is twice the triangle area.
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, t: usize) -> f64 {
        0.5 * self.face_cross(t).norm()
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        self.face_cross(t).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.face_area(t)).sum()
    }

    /// Area-weighted vertex normals; zero for isolated vertices.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.face_cross(t);
            for &i in tri {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            *n = n.try_normalize(0.0).unwrap_or_else(Vec3::zeros);
        }
        normals
    }

    /// `n` area-weighted uniform surface samples with their face normals.
    /// Returns an empty vector for a mesh without area.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(Vec3, Vec3)> {
        let mut cumulative = Vec::with_capacity(self.num_triangles());
        let mut total = 0.0;
        for t in 0..self.num_triangles() {
            total += self.face_area(t);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
                let [a, b, c] = self.corners(t);
                let r1: f64 = rng.random::<f64>().sqrt();
                let r2: f64 = rng.random();
                let p = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
                (p, self.face_normal(t))
            })
            .collect()
    }

    /// Copy moved by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> TriMesh {
        TriMesh::from_parts(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn normals_follow_the_winding() {
        let m = square();
        assert_eq!(m.face_normal(0), Vec3::z());
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        for n in m.vertex_normals() {
            assert_eq!(n, Vec3::z());
        }
    }

    #[test]
    fn samples_stay_on_the_surface() {
        let m = square();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = m.sample_surface(500, &mut rng);
        assert_eq!(s.len(), 500);
        let mean_x = s.iter().map(|(p, _)| p.x).sum::<f64>() / 500.0;
        assert!((mean_x - 0.5).abs() < 0.05);
        assert!(s.iter().all(|(p, _)| p.z == 0.0 && p.x >= 0.0 && p.x <= 1.0));
    }
}
