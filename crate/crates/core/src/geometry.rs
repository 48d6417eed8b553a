use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Aabb {
    /// The unit cube centred at the origin.
    fn default() -> Self {
        Self {
            min: [-0.5; 3],
            max: [0.5; 3],
        }
    }
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: min.into(),
            max: max.into(),
        }
    }

    pub fn cube(center: Vec3, half: f64) -> Self {
        Self::new(center.add_scalar(-half), center.add_scalar(half))
    }

    pub fn min(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn max(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn size(&self) -> Vec3 {
        self.max() - self.min()
    }

    pub fn center(&self) -> Vec3 {
        (self.min() + self.max()) * 0.5
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    /// Maps `p` into `[0,1]³` (unclamped).
    pub fn to_unit(&self, p: &Vec3) -> Vec3 {
        (p - self.min()).component_div(&self.size())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// The box shrunk about its centre by `factor` per axis.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let h = self.size() * (0.5 * factor);
        Self::new(c - h, c + h)
    }
}
