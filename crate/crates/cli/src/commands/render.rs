use std::path::PathBuf;

use flexfit_core::encoding::TextureField;
use flexfit_core::raster::{self, depth_image, write_normal_map, write_pnm};
use flexfit_core::train::{fit_texture, TextureOptions};

use super::{create_out, load_mesh, write_file};
use crate::config::RenderConfig;
use crate::error::CliError;

/// Renders every camera into `view{i}.ppm` (colour, or normals shaded into
/// RGB without a texture), `view{i}_depth.pgm` and `view{i}_normal.nrm`.
/// Returns the written paths.
pub fn render(config: &RenderConfig, base: &std::path::Path) -> Result<Vec<PathBuf>, CliError> {
    let mesh_path = crate::config::resolve(base, &config.mesh);
    let mesh = load_mesh(&mesh_path)?;
    for cam in &config.cameras {
        cam.validate()?;
    }
    let texture = match &config.texture {
        None => None,
        Some(spec) => {
            let mut tex = TextureField::new(spec.config, spec.bounds, config.seed)?;
            fit_texture(&mut tex, &mesh, &spec.color, spec.iterations, config.seed, &TextureOptions::default())?;
            Some(tex)
        }
    };
    let out = create_out(&config.out)?;
    let mut written = Vec::new();
    for (i, cam) in config.cameras.iter().enumerate() {
        let target = raster::render(&mesh, cam, texture.as_ref())?;
        let color = target.rgb_image().unwrap_or_else(|| target.normal_image());
        let depth = depth_image(target.width, target.height, &target.depth);
        let files = [
            out.join(format!("view{i}.ppm")),
            out.join(format!("view{i}_depth.pgm")),
            out.join(format!("view{i}_normal.nrm")),
        ];
        write_file(&files[0], |w| write_pnm(&color, w).map_err(std::io::Error::other))?;
        write_file(&files[1], |w| write_pnm(&depth, w).map_err(std::io::Error::other))?;
        write_file(&files[2], |w| {
            write_normal_map(target.width, target.height, &target.normal, w).map_err(std::io::Error::other)
        })?;
        written.extend(files);
    }
    Ok(written)
}
