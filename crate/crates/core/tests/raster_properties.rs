use flexfit_core::extract::{extract_mesh, FlexiGrid, GridLayout, TriMesh};
use flexfit_core::raster::{render, Camera};
use flexfit_core::{Aabb, Vec3};

fn unit_sphere() -> TriMesh {
    let layout = GridLayout::new(64, Aabb::cube(Vec3::zeros(), 1.2));
    extract_mesh(&FlexiGrid::from_fn(layout, |p| p.norm() - 1.0)).unwrap()
}

fn front_camera(size: usize) -> Camera {
    Camera::orthographic([0.0, 0.0, 3.0], [0.0; 3], 1.0, size, size)
}

#[test]
fn half_frame_square_covers_half() {
    let mesh = TriMesh::from_parts(
        vec![
            Vec3::new(-2.0, -2.0, 0.0),
            Vec3::new(0.0, -2.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(-2.0, 2.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    );
    for (w, h) in [(64, 64), (65, 40), (33, 17)] {
        let cam = Camera::orthographic([0.0, 0.0, 1.0], [0.0; 3], 1.0, w, h);
        let r = render(&mesh, &cam, None).unwrap();
        let expected = (w * h) as f64 / 2.0;
        assert!((r.covered() as f64 - expected).abs() <= h as f64, "{w}x{h}: {}", r.covered());
    }
}

#[test]
fn projected_unit_sphere_area() {
    let mesh = unit_sphere();
    let r = render(&mesh, &front_camera(256), None).unwrap();
    let ratio = r.coverage() / (std::f64::consts::PI / 4.0);
    assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn sphere_normals_match_analytic() {
    let mesh = unit_sphere();
    let cam = front_camera(128);
    let r = render(&mesh, &cam, None).unwrap();
    let frame = cam.frame();
    let mut good = 0;
    for py in 0..cam.height {
        for px in 0..cam.width {
            let idx = py * cam.width + px;
            if !r.mask[idx] {
                continue;
            }
            let x = (px as f64 + 0.5) / cam.width as f64 * 2.0 - 1.0;
            let y = 1.0 - (py as f64 + 0.5) / cam.height as f64 * 2.0;
            let z = (1.0 - x * x - y * y).max(0.0).sqrt();
            let analytic = frame.rotate(&Vec3::new(x, y, z).normalize());
            if r.normal[idx].dot(&analytic) >= 5f64.to_radians().cos() {
                good += 1;
            }
        }
    }
    let share = good as f64 / r.covered() as f64;
    assert!(share >= 0.95, "share {share}");
}

#[test]
fn coverage_is_resolution_consistent() {
    let mesh = unit_sphere();
    for cam in [
        front_camera(100),
        Camera::pinhole([1.5, 1.0, 2.5], [0.1, 0.0, 0.0], 50.0, 120, 90),
    ] {
        let mut fine = cam;
        fine.width *= 2;
        fine.height *= 2;
        let a = render(&mesh, &cam, None).unwrap().coverage();
        let b = render(&mesh, &fine, None).unwrap().coverage();
        assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
    }
}

#[test]
fn rendering_is_deterministic() {
    let mesh = unit_sphere();
    let cam = Camera::pinhole([2.0, 1.0, 2.0], [0.0; 3], 45.0, 64, 48);
    assert_eq!(render(&mesh, &cam, None).unwrap(), render(&mesh, &cam, None).unwrap());
}
