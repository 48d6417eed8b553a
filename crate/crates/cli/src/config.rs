use std::fs;
use std::path::{Path, PathBuf};

use flexfit_core::encoding::{SdfConfig, TextureConfig};
use flexfit_core::raster::Camera;
use flexfit_core::train::{FitOptions, FitSchedule, TargetColor, TargetShape};
use flexfit_core::Aabb;
use flexfit_inversion::{InitOptions, OptimizeOptions, OracleSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Command-line values that replace the matching config keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub iters: Option<usize>,
}

/// Reads a JSON config. Relative input paths inside it are resolved
/// against the directory holding the file.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, PathBuf), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let config = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_init_axes() -> [f64; 3] {
    [0.4, 0.35, 0.3]
}

fn default_warmup_iterations() -> usize {
    500
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Regress the distance field at sampled points.
    #[default]
    Sdf,
    /// Move extracted vertices onto the target through differentiable
    /// extraction.
    Surface,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Skip the ellipsoid warm-up entirely.
    pub skip: bool,
    pub semi_axes: [f64; 3],
    pub iterations: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            skip: false,
            semi_axes: default_init_axes(),
            iterations: default_warmup_iterations(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub chamfer_samples: usize,
    /// Extraction resolution of the exported mesh; the last stage's
    /// resolution when absent.
    pub resolution: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            chamfer_samples: 100_000,
            resolution: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitShapeConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub target: TargetShape,
    #[serde(default)]
    pub mode: FitMode,
    #[serde(default)]
    pub bounds: Aabb,
    #[serde(default)]
    pub network: SdfConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub schedule: FitSchedule,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub eval: EvalOptions,
}

impl FitShapeConfig {
    /// `--iters` sets every stage's iteration count.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(n) = o.iters {
            for stage in &mut self.schedule.stages {
                stage.iterations = n;
            }
        }
    }
}

/// Where the embedding table comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VocabSource {
    /// Text file: `V D` header, then `token v₁ … v_D` per line.
    File(PathBuf),
    /// Gaussian table with the template's carrier words plus `words − 3`
    /// generated tokens.
    Synthetic { words: usize, dim: usize, seed: u64 },
}

/// A vector in embedding space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSource {
    /// One line of `D` floats.
    File(PathBuf),
    /// The embedding of a vocabulary token.
    Token(String),
    /// `pool(e₀) + W_p q` with seeded Gaussian `q` scaled by `scale`; the
    /// optimum of the quadratic oracle is then reachable.
    Reachable { seed: u64, scale: f64 },
}

fn default_subspace_dim() -> usize {
    8
}

fn default_budget() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub vocabulary: VocabSource,
    pub style_query: VectorSource,
    pub object_query: VectorSource,
    pub oracle: OracleSpec,
    pub target: VectorSource,
    #[serde(default = "default_subspace_dim")]
    pub subspace_dim: usize,
    /// Generations.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub init: InitOptions,
    #[serde(default)]
    pub optimizer: OptimizeOptions,
}

impl InvertConfig {
    /// `--iters` sets the generation budget.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(n) = o.iters {
            self.budget = n;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSpec {
    pub color: TargetColor,
    pub iterations: usize,
    #[serde(default)]
    pub config: TextureConfig,
    #[serde(default)]
    pub bounds: Aabb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub mesh: PathBuf,
    pub cameras: Vec<Camera>,
    /// Fit a colour field on the mesh before rendering.
    #[serde(default)]
    pub texture: Option<TextureSpec>,
}

impl RenderConfig {
    /// `--iters` sets the texture-fit iterations.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let (Some(n), Some(t)) = (o.iters, self.texture.as_mut()) {
            t.iterations = n;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    Shape(TargetShape),
    Mesh(PathBuf),
}

fn default_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamferJob {
    pub mesh: PathBuf,
    pub reference: Reference,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePair {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub chamfer: Vec<ChamferJob>,
    /// Meshes to run the topology checks on.
    #[serde(default)]
    pub validate: Vec<PathBuf>,
    #[serde(default)]
    pub psnr: Vec<ImagePair>,
}

impl EvalConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub resolution: usize,
    #[serde(default)]
    pub normals: bool,
}

impl ExtractConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
    }
}
