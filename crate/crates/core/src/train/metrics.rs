use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::extract::{extract_mesh, FlexiGrid, GridLayout, TriMesh};
use crate::geometry::{Aabb, Vec3};

use super::kdtree::KdTree;
use super::shapes::TargetShape;
use super::TrainError;

/// Resolution of the auxiliary grid used to sample target surfaces.
pub const TARGET_SAMPLING_RESOLUTION: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChamferResult {
    /// Sum of the two directional mean nearest-neighbour distances.
    pub chamfer_l1: f64,
    /// 95th percentile of the pooled nearest-neighbour distances.
    pub hausdorff95: f64,
}

/// Symmetric nearest-neighbour statistics between two point sets.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> ChamferResult {
    let ta = KdTree::new(a);
    let tb = KdTree::new(b);
    let ab: Vec<f64> = a.iter().map(|p| tb.nearest(p)).collect();
    let ba: Vec<f64> = b.iter().map(|p| ta.nearest(p)).collect();
    summarize(&ab, &ba)
}

fn summarize(ab: &[f64], ba: &[f64]) -> ChamferResult {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let mut pooled: Vec<f64> = ab.iter().chain(ba).copied().collect();
    let hausdorff95 = if pooled.is_empty() {
        0.0
    } else {
        let k = ((pooled.len() as f64 * 0.95).ceil() as usize).clamp(1, pooled.len()) - 1;
        *pooled.select_nth_unstable_by(k, f64::total_cmp).1
    };
    ChamferResult {
        chamfer_l1: mean(ab) + mean(ba),
        hausdorff95,
    }
}

/// `n` points on the target surface: area-weighted samples of a fine
/// extraction, Newton-projected onto the zero set.
pub fn target_surface_samples(target: &TargetShape, n: usize, seed: u64) -> Result<Vec<Vec3>, TrainError> {
    let bb = target
        .bounding_box()
        .ok_or_else(|| TrainError::InvalidTarget("unbounded target".into()))?;
    let half = 0.5 * bb.size().max() * 1.2 + 1e-3;
    let layout = GridLayout::new(TARGET_SAMPLING_RESOLUTION, Aabb::cube(bb.center(), half));
    let grid = FlexiGrid::from_fn(layout, |p| target.sdf(p));
    let mesh = extract_mesh(&grid)?;
    if mesh.is_empty() {
        return Err(TrainError::InvalidTarget("target surface is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(mesh
        .sample_surface(n, &mut rng)
        .into_iter()
        .map(|(p, _)| target.project(&p))
        .collect())
}

/// Chamfer evaluation against a fixed target sample set.
pub struct ChamferOracle {
    samples: Vec<Vec3>,
    tree: KdTree,
    n_samples: usize,
    seed: u64,
}

impl ChamferOracle {
    pub fn new(target: &TargetShape, n_samples: usize, seed: u64) -> Result<Self, TrainError> {
        let samples = target_surface_samples(target, n_samples, seed ^ 0x7a11)?;
        Ok(Self {
            tree: KdTree::new(&samples),
            samples,
            n_samples,
            seed,
        })
    }

    pub fn target_samples(&self) -> &[Vec3] {
        &self.samples
    }

    pub fn evaluate(&self, mesh: &TriMesh) -> Result<ChamferResult, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pts: Vec<Vec3> = mesh
            .sample_surface(self.n_samples, &mut rng)
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        if pts.is_empty() {
            return Err(TrainError::EmptyMesh { iteration: None });
        }
        let mesh_tree = KdTree::new(&pts);
        let ab: Vec<f64> = pts.iter().map(|p| self.tree.nearest(p)).collect();
        let ba: Vec<f64> = self.samples.iter().map(|p| mesh_tree.nearest(p)).collect();
        Ok(summarize(&ab, &ba))
    }
}

/// Chamfer-L1 and Hausdorff-95 between `mesh` and `target`, each
/// represented by `n_samples` surface points.
pub fn chamfer(mesh: &TriMesh, target: &TargetShape, n_samples: usize, seed: u64) -> Result<ChamferResult, TrainError> {
    if mesh.is_empty() {
        return Err(TrainError::EmptyMesh { iteration: None });
    }
    ChamferOracle::new(target, n_samples, seed)?.evaluate(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_are_zero() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let r = chamfer_points(&pts, &pts);
        assert_eq!(r.chamfer_l1, 0.0);
        assert_eq!(r.hausdorff95, 0.0);
    }

    #[test]
    fn single_offset_pair() {
        let r = chamfer_points(&[Vec3::zeros()], &[Vec3::new(0.0, 0.0, 0.1)]);
        assert!((r.chamfer_l1 - 0.2).abs() < 1e-15);
        assert!((r.hausdorff95 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn target_samples_lie_on_the_surface() {
        let t = TargetShape::torus(0.25, 0.1);
        let pts = target_surface_samples(&t, 2000, 1).unwrap();
        assert!(pts.iter().all(|p| t.sdf(p).abs() < 1e-9));
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let t = TargetShape::sphere(0.3);
        assert!(matches!(
            chamfer(&TriMesh::default(), &t, 100, 0),
            Err(TrainError::EmptyMesh { .. })
        ));
    }
}
