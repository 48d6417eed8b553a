use crate::encoding::TextureField;
use crate::extract::TriMesh;
use crate::geometry::Vec3;

use super::camera::Camera;
use super::image::Image;
use super::RasterError;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderTarget {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    /// View-axis depth, `+∞` where empty.
    pub depth: Vec<f64>,
    /// Camera-space unit normals, zero where empty.
    pub normal: Vec<Vec3>,
    pub rgb: Option<Vec<[f64; 3]>>,
}

impl RenderTarget {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            mask: vec![false; n],
            depth: vec![f64::INFINITY; n],
            normal: vec![Vec3::zeros(); n],
            rgb: None,
        }
    }

    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn coverage(&self) -> f64 {
        self.covered() as f64 / self.mask.len().max(1) as f64
    }

    pub fn mask_image(&self) -> Image {
        Image::gray(self.width, self.height, self.mask.iter().map(|&m| f64::from(u8::from(m))).collect())
    }

    pub fn rgb_image(&self) -> Option<Image> {
        self.rgb
            .as_ref()
            .map(|rgb| Image::rgb(self.width, self.height, rgb.iter().flatten().copied().collect()))
    }

    /// Normals mapped from `[-1, 1]` to `[0, 1]` per channel; empty pixels
    /// stay black.
    pub fn normal_image(&self) -> Image {
        let data = self
            .normal
            .iter()
            .zip(&self.mask)
            .flat_map(|(n, &m)| {
                let f = |x: f64| if m { 0.5 * (x + 1.0) } else { 0.0 };
                [f(n.x), f(n.y), f(n.z)]
            })
            .collect();
        Image::rgb(self.width, self.height, data)
    }
}

struct Hit {
    triangle: usize,
    weights: [f64; 3],
}

fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Z-buffered rasterization with pixel-centre sampling. Both triangle
/// orientations are drawn; at equal depth the lower triangle index wins.
/// Pinhole triangles with a vertex behind the near plane are skipped.
pub fn render(mesh: &TriMesh, camera: &Camera, tex: Option<&TextureField>) -> Result<RenderTarget, RasterError> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let mut out = RenderTarget::empty(w, h);
    let frame = camera.frame();
    let cam_pts: Vec<Vec3> = mesh.positions.iter().map(|p| frame.to_camera(p)).collect();
    let projected: Vec<Option<(f64, f64, f64)>> = cam_pts.iter().map(|c| camera.project(c)).collect();
    let perspective = camera.is_perspective();
    let mut hits: Vec<Option<Hit>> = (0..w * h).map(|_| None).collect();

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (Some(a), Some(b), Some(c)) = (projected[tri[0]], projected[tri[1]], projected[tri[2]]) else {
            continue;
        };
        let area = edge(a.0, a.1, b.0, b.1, c.0, c.1);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let min_x = a.0.min(b.0).min(c.0);
        let max_x = a.0.max(b.0).max(c.0);
        let min_y = a.1.min(b.1).min(c.1);
        let max_y = a.1.max(b.1).max(c.1);
        let x0 = (min_x - 0.5).ceil().max(0.0);
        let x1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (min_y - 0.5).ceil().max(0.0);
        let y1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for py in y0 as usize..=y1 as usize {
            let cy = py as f64 + 0.5;
            for px in x0 as usize..=x1 as usize {
                let cx = px as f64 + 0.5;
                let b0 = edge(b.0, b.1, c.0, c.1, cx, cy) / area;
                let b1 = edge(c.0, c.1, a.0, a.1, cx, cy) / area;
                let b2 = edge(a.0, a.1, b.0, b.1, cx, cy) / area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let (depth, weights) = if perspective {
                    let q = [b0 / a.2, b1 / b.2, b2 / c.2];
                    let inv = q[0] + q[1] + q[2];
                    (1.0 / inv, [q[0] / inv, q[1] / inv, q[2] / inv])
                } else {
                    (b0 * a.2 + b1 * b.2 + b2 * c.2, [b0, b1, b2])
                };
                let idx = py * w + px;
                if depth < out.depth[idx] {
                    out.depth[idx] = depth;
                    hits[idx] = Some(Hit { triangle: t, weights });
                }
            }
        }
    }

    let vertex_normals = mesh.vertex_normals();
    let mut tex_inputs = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (idx, hit) in hits.iter().enumerate() {
        let Some(hit) = hit else { continue };
        let tri = mesh.triangles[hit.triangle];
        let interp = |f: &dyn Fn(usize) -> Vec3| (0..3).map(|k| f(tri[k]) * hit.weights[k]).sum::<Vec3>();
        let n = interp(&|v| vertex_normals[v])
            .try_normalize(1e-300)
            .or_else(|| mesh.face_normal(hit.triangle).try_normalize(0.0))
            .unwrap_or(frame.back);
        out.mask[idx] = true;
        out.normal[idx] = frame.rotate(&n);
        if tex.is_some() {
            let p = interp(&|v| mesh.positions[v]);
            tex_inputs.0.push(idx);
            tex_inputs.1.push(p);
            tex_inputs.2.push(n);
            tex_inputs.3.push(camera.view_dir(&frame, &p));
        }
    }
    if let Some(tex) = tex {
        let colors = tex.eval_batch(&tex_inputs.1, &tex_inputs.2, &tex_inputs.3)?;
        let mut rgb = vec![[0.0; 3]; w * h];
        for (&idx, c) in tex_inputs.0.iter().zip(colors) {
            rgb[idx] = c;
        }
        out.rgb = Some(rgb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(z: f64) -> TriMesh {
        TriMesh::from_parts(
            vec![
                Vec3::new(-1.0, -1.0, z),
                Vec3::new(0.0, -1.0, z),
                Vec3::new(0.0, 1.0, z),
                Vec3::new(-1.0, 1.0, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn empty_mesh_gives_empty_target() {
        let cam = Camera::orthographic([0.0, 0.0, 3.0], [0.0; 3], 1.0, 8, 6);
        let r = render(&TriMesh::default(), &cam, None).unwrap();
        assert_eq!(r.covered(), 0);
        assert!(r.depth.iter().all(|d| *d == f64::INFINITY));
    }

    #[test]
    fn nearer_surface_wins_and_ties_keep_first() {
        let cam = Camera::orthographic([0.0, 0.0, 3.0], [0.0; 3], 1.0, 16, 16);
        let mut mesh = square(0.0);
        let far = square(-0.5);
        let mut twin = square(0.0);
        for t in &mut twin.triangles {
            t.swap(1, 2);
        }
        for extra in [far, twin] {
            let base = mesh.num_vertices();
            mesh.positions.extend(extra.positions);
            mesh.triangles.extend(extra.triangles.iter().map(|t| t.map(|v| v + base)));
        }
        let r = render(&mesh, &cam, None).unwrap();
        let covered: Vec<f64> = r.depth.iter().copied().filter(|d| d.is_finite()).collect();
        assert!(covered.iter().all(|&d| (d - 3.0).abs() < 1e-12));
        assert!(r.normal.iter().zip(&r.mask).all(|(n, &m)| !m || (n - Vec3::z()).norm() < 1e-12));
    }

    #[test]
    fn sentinel_invariant() {
        let cam = Camera::pinhole([0.3, 0.2, 3.0], [0.0; 3], 40.0, 20, 10);
        let r = render(&square(0.0), &cam, None).unwrap();
        for i in 0..r.mask.len() {
            assert_eq!(r.mask[i], r.depth[i].is_finite());
            assert_eq!(r.mask[i], r.normal[i] != Vec3::zeros());
        }
        assert!(r.covered() > 0);
    }
}
