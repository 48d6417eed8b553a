use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};

/// Analytic target surfaces. Primitives are exact signed distances;
/// composites combine them with min/max and are conservative bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetShape {
    Sphere {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
    },
    /// Approximate distance `k₀(k₀−1)/k₁`, exact for spheres.
    Ellipsoid {
        #[serde(default)]
        center: [f64; 3],
        radii: [f64; 3],
    },
    /// Ring in the xy-plane around `center`.
    Torus {
        #[serde(default)]
        center: [f64; 3],
        major: f64,
        minor: f64,
    },
    Box {
        #[serde(default)]
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    /// `⟨p, n⟩ − offset`; unbounded, so never accepted as a fit target.
    HalfSpace { normal: [f64; 3], offset: f64 },
    Union { shapes: Vec<TargetShape> },
    Intersection { shapes: Vec<TargetShape> },
    Difference {
        base: std::boxed::Box<TargetShape>,
        cut: std::boxed::Box<TargetShape>,
    },
}

/// Sphere distance.
pub fn sphere_sdf(p: &Vec3, center: &Vec3, radius: f64) -> f64 {
    (p - center).norm() - radius
}

/// Ellipsoid bound `k₀(k₀−1)/k₁` with `k₀ = ‖p/r‖`, `k₁ = ‖p/r²‖`.
pub fn ellipsoid_sdf(p: &Vec3, center: &Vec3, radii: &Vec3) -> f64 {
    let q = p - center;
    let k0 = q.component_div(radii).norm();
    let k1 = q.component_div(&radii.component_mul(radii)).norm();
    if k1 == 0.0 {
        -radii.min()
    } else {
        k0 * (k0 - 1.0) / k1
    }
}

impl TargetShape {
    pub fn sphere(radius: f64) -> Self {
        Self::Sphere {
            center: [0.0; 3],
            radius,
        }
    }

    pub fn ellipsoid(radii: [f64; 3]) -> Self {
        Self::Ellipsoid {
            center: [0.0; 3],
            radii,
        }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self::Torus {
            center: [0.0; 3],
            major,
            minor,
        }
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Self::Sphere { center, radius } => sphere_sdf(p, &Vec3::from(*center), *radius),
            Self::Ellipsoid { center, radii } => ellipsoid_sdf(p, &Vec3::from(*center), &Vec3::from(*radii)),
            Self::Torus { center, major, minor } => {
                let q = p - Vec3::from(*center);
                let ring = (q.x * q.x + q.y * q.y).sqrt() - major;
                (ring * ring + q.z * q.z).sqrt() - minor
            }
            Self::Box { center, half_extents } => {
                let q = (p - Vec3::from(*center)).abs() - Vec3::from(*half_extents);
                q.sup(&Vec3::zeros()).norm() + q.max().min(0.0)
            }
            Self::Capsule { a, b, radius } => {
                let (a, b) = (Vec3::from(*a), Vec3::from(*b));
                let ab = b - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (p - (a + ab * t)).norm() - radius
            }
            Self::HalfSpace { normal, offset } => p.dot(&Vec3::from(*normal).normalize()) - offset,
            Self::Union { shapes } => shapes.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min),
            Self::Intersection { shapes } => {
                shapes.iter().map(|s| s.sdf(p)).fold(f64::NEG_INFINITY, f64::max)
            }
            Self::Difference { base, cut } => base.sdf(p).max(-cut.sdf(p)),
        }
    }

    /// Central-difference gradient.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        const H: f64 = 1e-6;
        Vec3::from_fn(|k, _| {
            let mut a = *p;
            let mut b = *p;
            a[k] += H;
            b[k] -= H;
            (self.sdf(&a) - self.sdf(&b)) / (2.0 * H)
        })
    }

    /// Moves `p` onto the zero set with a few Newton steps.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        for _ in 0..4 {
            let g = self.gradient(&q);
            let n2 = g.norm_squared();
            if n2 < 1e-12 {
                break;
            }
            q -= g * (self.sdf(&q) / n2);
        }
        q
    }

    /// Box containing the zero set, if bounded.
    pub fn bounding_box(&self) -> Option<Aabb> {
        match self {
            Self::Sphere { center, radius } => Some(Aabb::cube(Vec3::from(*center), *radius)),
            Self::Ellipsoid { center, radii } => {
                let c = Vec3::from(*center);
                let r = Vec3::from(*radii);
                Some(Aabb::new(c - r, c + r))
            }
            Self::Torus { center, major, minor } => {
                let c = Vec3::from(*center);
                let e = Vec3::new(major + minor, major + minor, *minor);
                Some(Aabb::new(c - e, c + e))
            }
            Self::Box { center, half_extents } => {
                let c = Vec3::from(*center);
                let e = Vec3::from(*half_extents);
                Some(Aabb::new(c - e, c + e))
            }
            Self::Capsule { a, b, radius } => {
                let (a, b) = (Vec3::from(*a), Vec3::from(*b));
                Some(Aabb::new(a.inf(&b).add_scalar(-radius), a.sup(&b).add_scalar(*radius)))
            }
            Self::HalfSpace { .. } => None,
            Self::Union { shapes } => {
                let mut boxes = shapes.iter().map(|s| s.bounding_box());
                let first = boxes.next()??;
                boxes.try_fold(first, |acc, b| {
                    let b = b?;
                    Some(Aabb::new(acc.min().inf(&b.min()), acc.max().sup(&b.max())))
                })
            }
            Self::Intersection { shapes } => {
                let boxes: Vec<Aabb> = shapes.iter().filter_map(|s| s.bounding_box()).collect();
                let first = *boxes.first()?;
                Some(boxes.iter().fold(first, |acc, b| {
                    Aabb::new(acc.min().sup(&b.min()), acc.max().inf(&b.max()))
                }))
            }
            Self::Difference { base, .. } => base.bounding_box(),
        }
    }

    /// Checks parameters and that the zero set lies strictly inside the
    /// central 90% of `domain`.
    pub fn validate(&self, domain: &Aabb) -> Result<(), String> {
        self.check_params()?;
        let inner = domain.scaled(0.9);
        let b = self
            .bounding_box()
            .ok_or_else(|| "target surface is unbounded".to_string())?;
        let inside = (0..3).all(|k| b.min[k] > inner.min[k] && b.max[k] < inner.max[k]);
        if !inside {
            return Err(format!("target bounds {b:?} leave the inner 90% of the domain {inner:?}"));
        }
        Ok(())
    }

    fn check_params(&self) -> Result<(), String> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let finite = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Sphere { center, radius } => finite(center) && pos(*radius),
            Self::Ellipsoid { center, radii } => finite(center) && radii.iter().all(|&r| pos(r)),
            Self::Torus { center, major, minor } => {
                finite(center) && pos(*major) && pos(*minor) && minor < major
            }
            Self::Box { center, half_extents } => finite(center) && half_extents.iter().all(|&r| pos(r)),
            Self::Capsule { a, b, radius } => finite(a) && finite(b) && pos(*radius),
            Self::HalfSpace { normal, offset } => {
                finite(normal) && offset.is_finite() && Vec3::from(*normal).norm() > 0.0
            }
            Self::Union { shapes } | Self::Intersection { shapes } => {
                if shapes.is_empty() {
                    return Err("composite needs at least one shape".into());
                }
                for s in shapes {
                    s.check_params()?;
                }
                true
            }
            Self::Difference { base, cut } => {
                base.check_params()?;
                cut.check_params()?;
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid shape parameters: {self:?}"))
        }
    }
}

/// Analytic surface colours for texture fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetColor {
    Constant { rgb: [f64; 3] },
    /// `c(p) = (p − min) / size` per channel over the given box.
    AxisGradient { bounds: Aabb },
}

impl TargetColor {
    pub fn color(&self, p: &Vec3) -> [f64; 3] {
        match self {
            Self::Constant { rgb } => *rgb,
            Self::AxisGradient { bounds } => {
                let u = bounds.to_unit(p);
                [u.x.clamp(0.0, 1.0), u.y.clamp(0.0, 1.0), u.z.clamp(0.0, 1.0)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_bound_is_exact_for_spheres() {
        let p = Vec3::new(0.1, -0.3, 0.2);
        let r = 0.35;
        let e = ellipsoid_sdf(&p, &Vec3::zeros(), &Vec3::repeat(r));
        assert!((e - (p.norm() - r)).abs() < 1e-15);
        assert_eq!(ellipsoid_sdf(&Vec3::zeros(), &Vec3::zeros(), &Vec3::new(0.4, 0.3, 0.2)), -0.2);
    }

    #[test]
    fn primitive_values() {
        let t = TargetShape::torus(0.25, 0.1);
        assert!((t.sdf(&Vec3::new(0.25, 0.0, 0.0)) + 0.1).abs() < 1e-15);
        assert!((t.sdf(&Vec3::zeros()) - 0.15).abs() < 1e-15);
        let b = TargetShape::Box {
            center: [0.0; 3],
            half_extents: [0.2, 0.1, 0.3],
        };
        assert!((b.sdf(&Vec3::new(0.3, 0.0, 0.0)) - 0.1).abs() < 1e-15);
        assert!((b.sdf(&Vec3::zeros()) + 0.1).abs() < 1e-15);
        let c = TargetShape::Capsule {
            a: [0.0, 0.0, -0.1],
            b: [0.0, 0.0, 0.1],
            radius: 0.1,
        };
        assert!((c.sdf(&Vec3::new(0.0, 0.0, 0.3)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn composites_combine_with_min_and_max() {
        let a = TargetShape::Sphere {
            center: [-0.1, 0.0, 0.0],
            radius: 0.15,
        };
        let b = TargetShape::Sphere {
            center: [0.1, 0.0, 0.0],
            radius: 0.15,
        };
        let p = Vec3::new(0.2, 0.05, 0.0);
        let u = TargetShape::Union {
            shapes: vec![a.clone(), b.clone()],
        };
        assert_eq!(u.sdf(&p), a.sdf(&p).min(b.sdf(&p)));
        let d = TargetShape::Difference {
            base: std::boxed::Box::new(a.clone()),
            cut: std::boxed::Box::new(b.clone()),
        };
        assert_eq!(d.sdf(&p), a.sdf(&p).max(-b.sdf(&p)));
        let bb = u.bounding_box().unwrap();
        assert!((bb.min[0] + 0.25).abs() < 1e-15 && (bb.max[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn primitives_are_one_lipschitz() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let shapes = [
            TargetShape::sphere(0.3),
            TargetShape::torus(0.25, 0.1),
            TargetShape::Box {
                center: [0.0; 3],
                half_extents: [0.2, 0.1, 0.3],
            },
        ];
        for s in &shapes {
            for _ in 0..500 {
                let p = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
                let q = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
                assert!((s.sdf(&p) - s.sdf(&q)).abs() <= (p - q).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn projection_lands_on_the_surface() {
        let t = TargetShape::torus(0.25, 0.1);
        let q = t.project(&Vec3::new(0.3, 0.1, 0.05));
        assert!(t.sdf(&q).abs() < 1e-9);
    }

    #[test]
    fn domain_check() {
        let d = Aabb::default();
        assert!(TargetShape::sphere(0.35).validate(&d).is_ok());
        assert!(TargetShape::sphere(0.46).validate(&d).is_err());
        assert!(TargetShape::sphere(-0.1).validate(&d).is_err());
        let h = TargetShape::HalfSpace {
            normal: [0.0, 0.0, 1.0],
            offset: 0.0,
        };
        assert!(h.validate(&d).is_err());
    }

    #[test]
    fn config_round_trip() {
        let s: TargetShape = serde_json::from_str(r#"{"kind":"torus","major":0.25,"minor":0.1}"#).unwrap();
        assert_eq!(s, TargetShape::torus(0.25, 0.1));
        assert!(serde_json::from_str::<TargetShape>(r#"{"kind":"sphere","radius":0.2,"bogus":1}"#).is_err());
    }
}
