use flexfit_core::encoding::{save_checkpoint, SdfNetwork};
use flexfit_core::extract::{mesh_validate, write_obj};
use flexfit_core::train::{chamfer, extract_network, fit_geometry, fit_surface_mode, init_ellipsoid, WarmupOptions};

use super::{create_out, write_file, Metrics};
use crate::config::{FitMode, FitShapeConfig};
use crate::error::CliError;

pub const MESH_FILE: &str = "mesh.obj";
pub const CHECKPOINT_FILE: &str = "network.ckpt";
pub const LOSS_FILE: &str = "loss.csv";
pub const METRICS_FILE: &str = "metrics.csv";

/// Warm-up, fit, extraction and evaluation. Writes the mesh, the network
/// checkpoint, the loss log and the metrics table into `config.out`.
pub fn fit_shape(config: &FitShapeConfig) -> Result<Metrics, CliError> {
    config.target.validate(&config.bounds).map_err(|e| CliError::Config(format!("target: {e}")))?;
    config.schedule.validate(config.fit.max_resolution)?;
    let resolution = config
        .eval
        .resolution
        .or_else(|| config.schedule.stages.last().map(|s| s.resolution))
        .ok_or_else(|| CliError::Config("an empty schedule needs eval.resolution".into()))?;
    if resolution < 2 || resolution > config.fit.max_resolution {
        return Err(CliError::Config(format!("eval resolution {resolution} is out of range")));
    }
    let first = config.schedule.stages.first().map_or(resolution, |s| s.resolution);
    let out = create_out(&config.out)?;

    let mut net = SdfNetwork::new(config.network, config.bounds, first, config.seed)?;
    let mut metrics = Metrics::default();
    if !config.init.skip {
        let warm = WarmupOptions {
            iterations: config.init.iterations,
            seed: config.seed,
            ..Default::default()
        };
        let report = init_ellipsoid(&mut net, config.init.semi_axes, &warm)?;
        metrics.push("warmup_probe_error", report.probe_error, "network");
    }
    let log = match config.mode {
        FitMode::Sdf => fit_geometry(&mut net, &config.target, &config.schedule, config.seed, &config.fit)?,
        FitMode::Surface => fit_surface_mode(&mut net, &config.target, &config.schedule, config.seed, &config.fit)?,
    };
    net.set_resolution(resolution);
    let mesh = extract_network(&net, resolution)?;
    if mesh.is_empty() {
        return Err(CliError::Numerical("the fitted network extracts to an empty mesh".into()));
    }

    for (i, c) in log.stage_chamfer.iter().enumerate() {
        let subject = format!("stage{i}");
        metrics.push("chamfer_l1", c.chamfer_l1, &subject);
        metrics.push("hausdorff95", c.hausdorff95, &subject);
    }
    let c = chamfer(&mesh, &config.target, config.eval.chamfer_samples, config.seed)?;
    metrics.push("chamfer_l1", c.chamfer_l1, MESH_FILE);
    metrics.push("hausdorff95", c.hausdorff95, MESH_FILE);
    metrics.push("chamfer_threshold", 3.0 * config.bounds_cell(resolution), MESH_FILE);
    metrics.push("vertices", mesh.num_vertices(), MESH_FILE);
    metrics.push("triangles", mesh.num_triangles(), MESH_FILE);
    metrics.push_report(&mesh_validate(&mesh), MESH_FILE);

    write_file(&out.join(MESH_FILE), |w| write_obj(&mesh, w, false))?;
    let ckpt = out.join(CHECKPOINT_FILE);
    write_file(&ckpt, |w| save_checkpoint(&net, w).map_err(std::io::Error::other))?;
    write_file(&out.join(LOSS_FILE), |w| log.write_csv(w))?;
    metrics.write(&out.join(METRICS_FILE))?;
    Ok(metrics)
}

impl FitShapeConfig {
    /// Shortest cell edge at `resolution`.
    pub fn bounds_cell(&self, resolution: usize) -> f64 {
        self.bounds.size().min() / resolution as f64
    }
}
