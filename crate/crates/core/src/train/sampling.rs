use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Aabb, Vec3};

use super::shapes::TargetShape;
use super::TrainError;

/// Half-width of the band that near-surface samples are drawn from.
pub const NEAR_BAND: f64 = 0.05;

/// Jittered samples on a `k³` lattice (`k = ⌊∛n⌋`) topped up with uniform
/// draws to exactly `n`.
pub fn stratified<R: Rng + ?Sized>(n: usize, domain: &Aabb, rng: &mut R) -> Vec<Vec3> {
    let mut k = (n as f64).cbrt().floor() as usize;
    while (k + 1).pow(3) <= n {
        k += 1;
    }
    let size = domain.size();
    let min = domain.min();
    let mut out = Vec::with_capacity(n);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let u = Vec3::new(
                    (a as f64 + rng.random::<f64>()) / k as f64,
                    (b as f64 + rng.random::<f64>()) / k as f64,
                    (c as f64 + rng.random::<f64>()) / k as f64,
                );
                out.push(min + u.component_mul(&size));
            }
        }
    }
    while out.len() < n {
        out.push(uniform(domain, rng));
    }
    out
}

pub fn uniform<R: Rng + ?Sized>(domain: &Aabb, rng: &mut R) -> Vec3 {
    let u = Vec3::new(rng.random(), rng.random(), rng.random());
    domain.min() + u.component_mul(&domain.size())
}

/// `n` points with `|sdf*| < band`, by rejection from the domain.
pub fn near_surface<R: Rng + ?Sized>(
    n: usize,
    target: &TargetShape,
    domain: &Aabb,
    band: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>, TrainError> {
    let mut out = Vec::with_capacity(n);
    let budget = 10_000 + 2_000 * n;
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        let p = uniform(domain, rng);
        if target.sdf(&p).abs() < band {
            out.push(p);
        }
    }
    if out.len() < n {
        return Err(TrainError::InvalidTarget(format!(
            "could not find {n} points within {band} of the surface"
        )));
    }
    Ok(out)
}

/// Training batch: stratified points followed by near-surface points.
pub fn training_batch<R: Rng + ?Sized>(
    n: usize,
    near_fraction: f64,
    target: &TargetShape,
    domain: &Aabb,
    rng: &mut R,
) -> Result<Vec<Vec3>, TrainError> {
    let near = ((n as f64) * near_fraction).round() as usize;
    let mut pts = stratified(n - near, domain, rng);
    pts.extend(near_surface(near, target, domain, NEAR_BAND, rng)?);
    Ok(pts)
}

/// Fixed uniform evaluation points.
pub fn probe_points(n: usize, domain: &Aabb, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| uniform(domain, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_covers_every_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Aabb::default();
        let pts = stratified(1000, &d, &mut rng);
        assert_eq!(pts.len(), 1000);
        let mut hit = [false; 1000];
        for p in &pts {
            let u = d.to_unit(p) * 10.0;
            hit[u.x as usize + 10 * (u.y as usize + 10 * u.z as usize)] = true;
        }
        assert!(hit.iter().all(|&h| h));
    }

    #[test]
    fn batch_split_and_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = TargetShape::sphere(0.3);
        let d = Aabb::default();
        let pts = training_batch(4096, 0.25, &t, &d, &mut rng).unwrap();
        assert_eq!(pts.len(), 4096);
        assert!(pts[3072..].iter().all(|p| t.sdf(p).abs() < NEAR_BAND));
        assert!(pts.iter().all(|p| d.contains(p)));
    }

    #[test]
    fn probes_are_fixed_by_seed() {
        let d = Aabb::default();
        assert_eq!(probe_points(16, &d, 5), probe_points(16, &d, 5));
        assert_ne!(probe_points(16, &d, 5), probe_points(16, &d, 6));
    }
}
