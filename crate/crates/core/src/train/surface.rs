use flexfit_autodiff::{kernels, AdamConfig, AdamState, Tape};

use crate::encoding::{activate_cube, SdfNetwork, CUBE_OUTPUTS, VERTEX_OUTPUTS};
use crate::extract::{extract_backward, extract_mesh, CubeWeightGrad, FlexiGrid, GridGradients, GridLayout, TriMesh};
use crate::geometry::Vec3;

use super::fit::{lr_factor, FitLog, FitOptions, FitSchedule, LossRow};
use super::metrics::ChamferOracle;
use super::network_grid::fill_cube_weights;
use super::optim::{LearningRates, ParamOptimizer};
use super::shapes::{ellipsoid_sdf, TargetShape};
use super::TrainError;

/// Mean `|sdf*(v)|` over mesh vertices and its gradient with respect to
/// every vertex position.
pub fn surface_loss(mesh: &TriMesh, target: &TargetShape) -> (f64, Vec<Vec3>) {
    let n = mesh.num_vertices().max(1) as f64;
    let mut loss = 0.0;
    let grads = mesh
        .positions
        .iter()
        .map(|p| {
            let d = target.sdf(p);
            loss += d.abs();
            if d == 0.0 {
                Vec3::zeros()
            } else {
                target.gradient(p) * (d.signum() / n)
            }
        })
        .collect();
    (loss / n, grads)
}

/// Grid-valued parameters trainable through extraction.
pub trait SurfaceParams {
    /// Current grid at `resolution` cells per axis.
    fn grid(&mut self, resolution: usize) -> Result<FlexiGrid, TrainError>;
    /// One optimizer step from gradients on the grid returned by the last
    /// [`SurfaceParams::grid`] call.
    fn apply(&mut self, grid: &FlexiGrid, grads: &GridGradients) -> Result<(), TrainError>;
    /// Multiplies every base learning rate by `factor`.
    fn set_lr_scale(&mut self, factor: f64);
}

fn offset_raw_grad(raw: f64, d: f64, scale: f64) -> f64 {
    let t = raw.tanh();
    d * scale * (1.0 - t * t)
}

fn cube_raw_grad(raw: &[f64], g: &CubeWeightGrad, out: &mut [f64]) {
    for k in 0..8 {
        out[k] = g.alpha[k] * kernels::sigmoid(raw[k]);
    }
    for k in 0..12 {
        out[8 + k] = g.beta[k] * kernels::sigmoid(raw[8 + k]);
    }
    let s = kernels::sigmoid(raw[20]);
    out[20] = g.gamma * s * (1.0 - s);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandOptions {
    /// Vertices within this many grid steps of a crossing cube are
    /// re-evaluated every iteration.
    pub band_cells: usize,
    /// Full re-evaluation period in iterations.
    pub refresh_every: usize,
}

impl Default for BandOptions {
    fn default() -> Self {
        Self {
            band_cells: 0,
            refresh_every: 20,
        }
    }
}

struct BandCache {
    layout: GridLayout,
    sdf: Vec<f64>,
    offsets: Vec<Vec3>,
    active: Vec<usize>,
    is_active: Vec<bool>,
    age: usize,
}

impl BandCache {
    /// Inactive vertices within `k` steps of any of `cubes`.
    fn inactive_near(&self, cubes: &[usize], k: usize) -> Vec<usize> {
        let n = self.layout.vertices_per_axis();
        let span = |x: usize| x.saturating_sub(k)..(x + k + 2).min(n);
        let mut seen = vec![false; self.is_active.len()];
        let mut out = Vec::new();
        for &c in cubes {
            let [ci, cj, ck] = self.layout.cube_coords(c);
            for kk in span(ck) {
                for j in span(cj) {
                    for i in span(ci) {
                        let v = self.layout.vertex_index(i, j, kk);
                        if !self.is_active[v] && !seen[v] {
                            seen[v] = true;
                            out.push(v);
                        }
                    }
                }
            }
        }
        out
    }

    fn grid(&self) -> FlexiGrid {
        let mut grid = FlexiGrid::new(self.layout, self.sdf.clone());
        grid.offsets = self.offsets.clone();
        grid
    }

    /// Crossing cubes with a corner whose value is cached.
    fn stale_cubes(&self, grid: &FlexiGrid) -> Vec<usize> {
        grid.crossing_cubes()
            .into_iter()
            .filter(|&c| self.layout.cube_corners(c).iter().any(|&v| !self.is_active[v]))
            .collect()
    }

    fn activate(&mut self, verts: Vec<usize>) {
        for &v in &verts {
            self.is_active[v] = true;
        }
        self.active.extend(verts);
    }
}

/// The SDF network seen as grid parameters. Between periodic full
/// evaluations only vertices near the zero set are re-evaluated; the band
/// grows wherever a crossing cube reaches a cached corner.
pub struct NetworkSurface<'a> {
    pub net: &'a mut SdfNetwork,
    opt: ParamOptimizer,
    band: BandOptions,
    cache: Option<BandCache>,
}

impl<'a> NetworkSurface<'a> {
    pub fn new(net: &'a mut SdfNetwork, rates: LearningRates, band: BandOptions) -> Self {
        let sizes: Vec<usize> = net.buffers().iter().map(|b| b.len()).collect();
        Self {
            net,
            opt: ParamOptimizer::new(&sizes, rates),
            band,
            cache: None,
        }
    }

    fn refresh(&mut self, resolution: usize) -> Result<FlexiGrid, TrainError> {
        self.net.set_resolution(resolution);
        let layout = GridLayout::new(resolution, self.net.bounds);
        let out = self.net.sdf_batch(&layout.vertex_positions())?;
        let mut cache = BandCache {
            layout,
            sdf: out.sdf,
            offsets: out.offsets,
            active: Vec::new(),
            is_active: vec![false; layout.num_vertices()],
            age: 0,
        };
        let grid = cache.grid();
        let band = cache.inactive_near(&grid.crossing_cubes(), self.band.band_cells);
        cache.activate(band);
        self.cache = Some(cache);
        Ok(grid)
    }

    fn evaluate(net: &SdfNetwork, cache: &mut BandCache, verts: &[usize]) -> Result<(), TrainError> {
        let pts: Vec<Vec3> = verts.iter().map(|&v| cache.layout.vertex_position(v)).collect();
        let out = net.sdf_batch(&pts)?;
        for (k, &v) in verts.iter().enumerate() {
            cache.sdf[v] = out.sdf[k];
            cache.offsets[v] = out.offsets[k];
        }
        Ok(())
    }

    /// Re-evaluates the band, then grows it until no crossing cube has a
    /// cached corner.
    fn update(&mut self) -> Result<FlexiGrid, TrainError> {
        let cache = self.cache.as_mut().expect("cache present");
        let active = std::mem::take(&mut cache.active);
        Self::evaluate(self.net, cache, &active)?;
        cache.active = active;
        cache.age += 1;
        loop {
            let grid = cache.grid();
            let stale = cache.stale_cubes(&grid);
            if stale.is_empty() {
                return Ok(grid);
            }
            let grow = cache.inactive_near(&stale, self.band.band_cells);
            Self::evaluate(self.net, cache, &grow)?;
            cache.activate(grow);
        }
    }
}

impl SurfaceParams for NetworkSurface<'_> {
    fn grid(&mut self, resolution: usize) -> Result<FlexiGrid, TrainError> {
        let reuse = self
            .cache
            .as_ref()
            .is_some_and(|c| c.layout.resolution == resolution && c.age + 1 < self.band.refresh_every);
        let mut grid = if reuse { self.update()? } else { self.refresh(resolution)? };
        fill_cube_weights(self.net, &mut grid)?;
        Ok(grid)
    }

    fn set_lr_scale(&mut self, factor: f64) {
        self.opt.set_lr_scale(factor);
    }

    fn apply(&mut self, grid: &FlexiGrid, grads: &GridGradients) -> Result<(), TrainError> {
        let layout = &grid.layout;
        let verts: Vec<usize> = (0..layout.num_vertices())
            .filter(|&v| grads.sdf[v] != 0.0 || grads.offsets[v] != Vec3::zeros())
            .collect();
        let cubes: Vec<(usize, CubeWeightGrad)> = grads.weights.iter().map(|(&c, g)| (c, *g)).collect();
        if verts.is_empty() && cubes.is_empty() {
            return Ok(());
        }
        let scale = self.net.offset_scale();
        let mut tape = Tape::new();
        let vars = self.net.bind(&mut tape);
        let mut total = None;
        if !verts.is_empty() {
            let pts: Vec<Vec3> = verts.iter().map(|&v| layout.vertex_position(v)).collect();
            let lookup = self.net.lookup(&pts)?;
            let raw = self.net.vertex_raw_tape(&mut tape, &vars, &lookup);
            let values = tape.value(raw);
            let mut up = vec![0.0; verts.len() * VERTEX_OUTPUTS];
            for (k, &v) in verts.iter().enumerate() {
                let r = &values[k * VERTEX_OUTPUTS..(k + 1) * VERTEX_OUTPUTS];
                up[k * VERTEX_OUTPUTS] = grads.sdf[v];
                for a in 0..3 {
                    up[k * VERTEX_OUTPUTS + 1 + a] = offset_raw_grad(r[1 + a], grads.offsets[v][a], scale);
                }
            }
            total = Some(tape.dot_const(raw, up));
        }
        if !cubes.is_empty() {
            let centers: Vec<Vec3> = cubes.iter().map(|(c, _)| layout.cube_center(*c)).collect();
            let lookup = self.net.lookup(&centers)?;
            let raw = self.net.cube_raw_tape(&mut tape, &vars, &lookup);
            let values = tape.value(raw);
            let mut up = vec![0.0; cubes.len() * CUBE_OUTPUTS];
            for (k, (_, g)) in cubes.iter().enumerate() {
                let span = k * CUBE_OUTPUTS..(k + 1) * CUBE_OUTPUTS;
                cube_raw_grad(&values[span.clone()], g, &mut up[span]);
            }
            let term = tape.dot_const(raw, up);
            total = Some(match total {
                Some(t) => tape.add(t, term),
                None => term,
            });
        }
        let grads = tape.backward(total.expect("at least one term"))?;
        self.opt.step(self.net.buffers_mut(), &grads, &vars.all())
    }
}

/// Direct-parameter baseline: `s`, raw offsets and raw cube weights are
/// trainable arrays on a fixed grid, activated exactly as the network's
/// outputs are.
#[derive(Clone, Debug)]
pub struct DirectGrid {
    pub layout: GridLayout,
    pub sdf: Vec<f64>,
    /// Raw offsets, 3 per vertex.
    pub offset_raw: Vec<f64>,
    /// Raw cube weights, 21 per cube.
    pub weight_raw: Vec<f64>,
    pub offset_bound: f64,
    lr: f64,
    states: [AdamState; 3],
}

impl DirectGrid {
    pub fn new(layout: GridLayout, sdf: Vec<f64>, offset_bound: f64, lr: f64) -> Self {
        let nv = layout.num_vertices();
        let nc = layout.num_cubes();
        let adam = |len| AdamState::new(len, AdamConfig::with_lr(lr));
        Self {
            layout,
            sdf,
            offset_raw: vec![0.0; 3 * nv],
            weight_raw: vec![0.0; CUBE_OUTPUTS * nc],
            offset_bound,
            lr,
            states: [adam(nv), adam(3 * nv), adam(CUBE_OUTPUTS * nc)],
        }
    }

    /// Grid initialized to an analytic ellipsoid with zero offsets and
    /// uniform weights.
    pub fn ellipsoid(layout: GridLayout, semi_axes: [f64; 3], offset_bound: f64, lr: f64) -> Self {
        let r = Vec3::from(semi_axes);
        let sdf = layout.vertex_positions().iter().map(|p| ellipsoid_sdf(p, &Vec3::zeros(), &r)).collect();
        Self::new(layout, sdf, offset_bound, lr)
    }

    fn scale(&self) -> f64 {
        self.offset_bound * self.layout.cell_edge()
    }

    pub fn to_grid(&self) -> FlexiGrid {
        let scale = self.scale();
        let mut grid = FlexiGrid::new(self.layout, self.sdf.clone());
        grid.offsets = self
            .offset_raw
            .chunks_exact(3)
            .map(|r| Vec3::new(r[0].tanh(), r[1].tanh(), r[2].tanh()) * scale)
            .collect();
        grid.weights = grid
            .crossing_cubes()
            .into_iter()
            .map(|c| (c, activate_cube(&self.weight_raw[c * CUBE_OUTPUTS..(c + 1) * CUBE_OUTPUTS])))
            .collect();
        grid
    }
}

impl SurfaceParams for DirectGrid {
    fn grid(&mut self, resolution: usize) -> Result<FlexiGrid, TrainError> {
        if resolution != self.layout.resolution {
            return Err(TrainError::InvalidSchedule(format!(
                "direct grid has resolution {}, stage asks for {resolution}",
                self.layout.resolution
            )));
        }
        Ok(self.to_grid())
    }

    fn set_lr_scale(&mut self, factor: f64) {
        for s in &mut self.states {
            s.config.lr = self.lr * factor;
        }
    }

    fn apply(&mut self, _grid: &FlexiGrid, grads: &GridGradients) -> Result<(), TrainError> {
        let scale = self.scale();
        let d_offsets: Vec<f64> = grads
            .offsets
            .iter()
            .zip(self.offset_raw.chunks_exact(3))
            .flat_map(|(d, r)| (0..3).map(move |a| offset_raw_grad(r[a], d[a], scale)))
            .collect();
        let mut d_weights = vec![0.0; self.weight_raw.len()];
        for (&c, g) in &grads.weights {
            let span = c * CUBE_OUTPUTS..(c + 1) * CUBE_OUTPUTS;
            cube_raw_grad(&self.weight_raw[span.clone()], g, &mut d_weights[span]);
        }
        let [s0, s1, s2] = &mut self.states;
        s0.update(&mut self.sdf, &grads.sdf)?;
        s1.update(&mut self.offset_raw, &d_offsets)?;
        s2.update(&mut self.weight_raw, &d_weights)?;
        Ok(())
    }
}

/// Trains `params` so extracted vertices land on the target surface.
/// Loss values are logged before each update, in the `loss_total` and
/// `loss_sdf` columns. Learning rates decay exactly as in
/// [`super::fit_geometry`].
pub fn fit_surface<P: SurfaceParams>(
    params: &mut P,
    target: &TargetShape,
    schedule: &FitSchedule,
    seed: u64,
    options: &FitOptions,
) -> Result<FitLog, TrainError> {
    schedule.validate(options.max_resolution)?;
    if schedule.stages.is_empty() {
        return Ok(FitLog::default());
    }
    let oracle = ChamferOracle::new(target, options.chamfer_samples, seed)?;
    let mut log = FitLog::default();
    let mut global = 0;
    let total: usize = schedule.stages.iter().map(|s| s.iterations).sum();
    for (stage_idx, stage) in schedule.stages.iter().enumerate() {
        for _ in 0..stage.iterations {
            params.set_lr_scale(lr_factor(options.final_lr_factor, global, total));
            let grid = params.grid(stage.resolution)?;
            let mesh = extract_mesh(&grid)?;
            if mesh.is_empty() {
                return Err(TrainError::EmptyMesh {
                    iteration: Some(global),
                });
            }
            let (loss, d_pos) = surface_loss(&mesh, target);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite {
                    stage: stage_idx,
                    iteration: global,
                });
            }
            let chamfer = if options.chamfer_every > 0 && global % options.chamfer_every == 0 {
                Some(oracle.evaluate(&mesh)?.chamfer_l1)
            } else {
                None
            };
            let grads = extract_backward(&grid, &mesh, &d_pos)?;
            params.apply(&grid, &grads)?;
            log.rows.push(LossRow {
                iter: global,
                stage: stage_idx,
                loss_total: loss,
                loss_sdf: loss,
                loss_eik: 0.0,
                chamfer,
            });
            global += 1;
        }
        let grid = params.grid(stage.resolution)?;
        let mesh = extract_mesh(&grid)?;
        if mesh.is_empty() {
            return Err(TrainError::EmptyMesh {
                iteration: Some(global),
            });
        }
        let c = oracle.evaluate(&mesh)?;
        log.stage_chamfer.push(c);
    }
    Ok(log)
}

/// Surface-mode training of the network through differentiable
/// extraction, with the default band cache.
pub fn fit_surface_mode(
    net: &mut SdfNetwork,
    target: &TargetShape,
    schedule: &FitSchedule,
    seed: u64,
    options: &FitOptions,
) -> Result<FitLog, TrainError> {
    let mut params = NetworkSurface::new(net, options.rates, BandOptions::default());
    fit_surface(&mut params, target, schedule, seed, options)
}

/// Mean `|sdf*(v)|` over the vertices of the network's current extraction.
pub fn surface_error(net: &SdfNetwork, target: &TargetShape, resolution: usize) -> Result<f64, TrainError> {
    let mesh = super::fit::extract_network(net, resolution)?;
    if mesh.is_empty() {
        return Err(TrainError::EmptyMesh { iteration: None });
    }
    Ok(surface_loss(&mesh, target).0)
}
