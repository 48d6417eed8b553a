use std::path::Path;

use flexfit_core::extract::mesh_validate;
use flexfit_core::raster::{psnr, read_pnm};
use flexfit_core::train::{chamfer, chamfer_points};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{create_out, load_mesh, open, Metrics};
use crate::config::{resolve, EvalConfig, Reference};
use crate::error::CliError;

pub const METRICS_FILE: &str = "metrics.csv";

fn subject(p: &Path) -> String {
    p.display().to_string()
}

/// Chamfer, topology checks and PSNR as configured, into
/// `config.out/metrics.csv`.
pub fn eval(config: &EvalConfig, base: &Path) -> Result<Metrics, CliError> {
    let mut metrics = Metrics::default();
    for job in &config.chamfer {
        let path = resolve(base, &job.mesh);
        let mesh = load_mesh(&path)?;
        if mesh.is_empty() {
            return Err(CliError::input(&path, "mesh has no triangles"));
        }
        let (c, name) = match &job.reference {
            Reference::Shape(shape) => (chamfer(&mesh, shape, job.samples, config.seed)?, subject(&job.mesh)),
            Reference::Mesh(other) => {
                let other_path = resolve(base, other);
                let reference = load_mesh(&other_path)?;
                if reference.is_empty() {
                    return Err(CliError::input(&other_path, "mesh has no triangles"));
                }
                let sample = |m: &flexfit_core::extract::TriMesh, seed: u64| -> Vec<_> {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    m.sample_surface(job.samples, &mut rng).into_iter().map(|(p, _)| p).collect()
                };
                let a = sample(&mesh, config.seed);
                let b = sample(&reference, config.seed ^ 0x5bd1_e995);
                (chamfer_points(&a, &b), format!("{}|{}", subject(&job.mesh), subject(other)))
            }
        };
        metrics.push("chamfer_l1", c.chamfer_l1, &name);
        metrics.push("hausdorff95", c.hausdorff95, &name);
    }
    for m in &config.validate {
        let mesh = load_mesh(&resolve(base, m))?;
        metrics.push_report(&mesh_validate(&mesh), &subject(m));
    }
    for pair in &config.psnr {
        let read = |p: &Path| {
            let path = resolve(base, p);
            read_pnm(&mut open(&path)?).map_err(|e| CliError::input(&path, e))
        };
        let value = psnr(&read(&pair.a)?, &read(&pair.b)?)?;
        metrics.push("psnr", value, &format!("{}|{}", subject(&pair.a), subject(&pair.b)));
    }
    let out = create_out(&config.out)?;
    metrics.write(&out.join(METRICS_FILE))?;
    Ok(metrics)
}
