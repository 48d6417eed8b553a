use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

use super::RasterError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Projection {
    Orthographic {
        /// Half the visible height; the width follows the aspect ratio.
        half_extent: f64,
    },
    Pinhole {
        /// Vertical field of view in degrees.
        fov_y: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub projection: Projection,
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub width: usize,
    pub height: usize,
}

/// Orthonormal camera frame: `right`, `up` and `back` (toward the viewer).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub back: Vec3,
}

impl Frame {
    /// World point to camera space (x right, y up, z toward the viewer).
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(&self.right), d.dot(&self.up), d.dot(&self.back))
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.dot(&self.right), v.dot(&self.up), v.dot(&self.back))
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.right * v.x + self.up * v.y + self.back * v.z
    }
}

/// Points closer than this along the view axis are not projected.
pub const NEAR: f64 = 1e-6;

impl Camera {
    pub fn orthographic(position: [f64; 3], look_at: [f64; 3], half_extent: f64, width: usize, height: usize) -> Self {
        Self {
            projection: Projection::Orthographic { half_extent },
            position,
            look_at,
            up: [0.0, 1.0, 0.0],
            width,
            height,
        }
    }

    pub fn pinhole(position: [f64; 3], look_at: [f64; 3], fov_y: f64, width: usize, height: usize) -> Self {
        Self {
            projection: Projection::Pinhole { fov_y },
            position,
            look_at,
            up: [0.0, 1.0, 0.0],
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        let bad = |m: &str| Err(RasterError::InvalidCamera(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        let finite = |a: &[f64; 3]| a.iter().all(|x| x.is_finite());
        if !finite(&self.position) || !finite(&self.look_at) || !finite(&self.up) {
            return bad("non-finite camera vector");
        }
        let fwd = Vec3::from(self.look_at) - Vec3::from(self.position);
        let up = Vec3::from(self.up);
        if fwd.norm() == 0.0 || up.norm() == 0.0 {
            return bad("zero view or up direction");
        }
        if fwd.normalize().cross(&up.normalize()).norm() < 1e-9 {
            return bad("up is parallel to the view direction");
        }
        match self.projection {
            Projection::Orthographic { half_extent } if !(half_extent > 0.0 && half_extent.is_finite()) => {
                bad("half extent must be positive")
            }
            Projection::Pinhole { fov_y } if !(fov_y > 0.0 && fov_y < 180.0) => bad("field of view must lie in (0, 180)"),
            _ => Ok(()),
        }
    }

    pub fn frame(&self) -> Frame {
        let origin = Vec3::from(self.position);
        let back = (origin - Vec3::from(self.look_at)).normalize();
        let right = Vec3::from(self.up).cross(&back).normalize();
        let up = back.cross(&right);
        Frame { origin, right, up, back }
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// Camera-space point to continuous pixel coordinates (origin at the
    /// top-left corner, y down) and view-axis depth. `None` behind the
    /// near plane of a pinhole camera.
    pub fn project(&self, c: &Vec3) -> Option<(f64, f64, f64)> {
        let depth = -c.z;
        let (w, h) = (self.width as f64, self.height as f64);
        let (nx, ny) = match self.projection {
            Projection::Orthographic { half_extent } => (c.x / (half_extent * self.aspect()), c.y / half_extent),
            Projection::Pinhole { fov_y } => {
                if depth < NEAR {
                    return None;
                }
                let t = (0.5 * fov_y.to_radians()).tan();
                (c.x / (depth * t * self.aspect()), c.y / (depth * t))
            }
        };
        Some((0.5 * (nx + 1.0) * w, 0.5 * (1.0 - ny) * h, depth))
    }

    pub fn is_perspective(&self) -> bool {
        matches!(self.projection, Projection::Pinhole { .. })
    }

    /// Unit world-space direction from `p` toward the viewer.
    pub fn view_dir(&self, frame: &Frame, p: &Vec3) -> Vec3 {
        match self.projection {
            Projection::Orthographic { .. } => frame.back,
            Projection::Pinhole { .. } => (frame.origin - p).try_normalize(0.0).unwrap_or(frame.back),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_right_handed() {
        let cam = Camera::orthographic([0.0, 0.0, 2.0], [0.0; 3], 1.0, 4, 4);
        let f = cam.frame();
        assert!((f.right - Vec3::x()).norm() < 1e-15);
        assert!((f.up - Vec3::y()).norm() < 1e-15);
        assert!((f.back - Vec3::z()).norm() < 1e-15);
        let c = f.to_camera(&Vec3::new(1.0, 0.0, 0.0));
        let (x, y, d) = cam.project(&c).unwrap();
        assert_eq!((x, y, d), (4.0, 2.0, 2.0));
    }

    #[test]
    fn invalid_cameras() {
        let mut cam = Camera::pinhole([0.0, 0.0, 2.0], [0.0; 3], 45.0, 4, 4);
        assert!(cam.validate().is_ok());
        cam.up = [0.0, 0.0, 1.0];
        assert!(cam.validate().is_err());
        cam.up = [0.0, 1.0, 0.0];
        cam.width = 0;
        assert!(cam.validate().is_err());
        cam.width = 4;
        cam.projection = Projection::Pinhole { fov_y: 180.0 };
        assert!(cam.validate().is_err());
    }

    #[test]
    fn pinhole_rejects_points_behind() {
        let cam = Camera::pinhole([0.0, 0.0, 2.0], [0.0; 3], 90.0, 10, 10);
        let f = cam.frame();
        assert!(cam.project(&f.to_camera(&Vec3::new(0.0, 0.0, 3.0))).is_none());
        let (x, y, _) = cam.project(&f.to_camera(&Vec3::new(2.0, 0.0, 0.0))).unwrap();
        assert!((x - 10.0).abs() < 1e-12 && (y - 5.0).abs() < 1e-12);
    }
}
