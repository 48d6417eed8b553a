use std::path::{Path, PathBuf};

use flexfit_core::encoding::load_checkpoint;
use flexfit_core::extract::write_obj;
use flexfit_core::train::extract_network;

use super::{create_out, open, write_file};
use crate::config::{resolve, ExtractConfig};
use crate::error::CliError;

pub const MESH_FILE: &str = "mesh.obj";

/// Checkpoint to OBJ at the configured resolution, without training.
pub fn extract_mesh(config: &ExtractConfig, base: &Path) -> Result<PathBuf, CliError> {
    let path = resolve(base, &config.checkpoint);
    let mut net = load_checkpoint(open(&path)?).map_err(|e| CliError::input(&path, e))?;
    if config.resolution < 2 {
        return Err(CliError::Config("resolution must be at least 2".into()));
    }
    net.set_resolution(config.resolution);
    let mesh = extract_network(&net, config.resolution)?;
    let out = create_out(&config.out)?.join(MESH_FILE);
    write_file(&out, |w| write_obj(&mesh, w, config.normals))?;
    Ok(out)
}
