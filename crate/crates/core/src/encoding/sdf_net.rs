use flexfit_autodiff::{kernels, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::CubeWeights;
use crate::geometry::{Aabb, Vec3};

use super::hashgrid::{HashGrid, HashGridConfig, Lookup};
use super::mlp::{BoundDense, SkipMlp};
use super::EncodingError;

/// Raw outputs of the vertex head: `s` and three offset channels.
pub const VERTEX_OUTPUTS: usize = 4;
/// Raw outputs of the cube head: 8 α, 12 β and γ.
pub const CUBE_OUTPUTS: usize = 21;
/// Added to softplus so α and β stay strictly positive.
pub const WEIGHT_FLOOR: f64 = 1e-3;

const EVAL_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdfConfig {
    pub encoding: HashGridConfig,
    pub hidden: usize,
    /// Offsets are bounded by this fraction of a cell edge.
    pub offset_bound: f64,
}

impl Default for SdfConfig {
    fn default() -> Self {
        Self {
            encoding: HashGridConfig::default(),
            hidden: 64,
            offset_bound: 0.45,
        }
    }
}

/// Hash-grid encoded SDF network with a per-vertex head `(s, δ)` and a
/// per-cube head `(α, β, γ)` sharing one encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfNetwork {
    pub config: SdfConfig,
    pub bounds: Aabb,
    /// Cell edge used to scale offsets; follows the extraction resolution.
    pub cell: f64,
    pub encoding: HashGrid,
    pub vertex_head: SkipMlp,
    pub cube_head: SkipMlp,
}

/// Network parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct SdfVars {
    pub table: Var,
    pub vertex: [BoundDense; 3],
    pub cube: [BoundDense; 3],
}

impl SdfVars {
    /// All parameters in declaration order, matching
    /// [`SdfNetwork::buffers_mut`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.table];
        for l in self.vertex.iter().chain(&self.cube) {
            out.push(l.weight);
            out.push(l.bias);
        }
        out
    }
}

/// Batched vertex-head outputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VertexOutputs {
    pub sdf: Vec<f64>,
    pub offsets: Vec<Vec3>,
}

impl SdfNetwork {
    /// Random network. The offset channels and the whole cube head start
    /// with zero output weights, so initial offsets are zero and initial
    /// cube weights uniform.
    pub fn new(config: SdfConfig, bounds: Aabb, resolution: usize, seed: u64) -> Result<Self, EncodingError> {
        if !(config.offset_bound > 0.0 && config.offset_bound < 0.5) || config.hidden == 0 {
            return Err(EncodingError::InvalidConfig(format!(
                "hidden {} offset_bound {}",
                config.hidden, config.offset_bound
            )));
        }
        if !bounds.is_valid() || resolution == 0 {
            return Err(EncodingError::InvalidConfig("empty domain or zero resolution".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoding = HashGrid::new(config.encoding, &mut rng)?;
        let dim = encoding.output_dim();
        let mut vertex_head = SkipMlp::new(dim, config.hidden, VERTEX_OUTPUTS, &mut rng);
        let last = &mut vertex_head.layers[2];
        for r in 0..last.input {
            for c in 1..VERTEX_OUTPUTS {
                last.weight[r * VERTEX_OUTPUTS + c] = 0.0;
            }
        }
        let mut cube_head = SkipMlp::new(dim, config.hidden, CUBE_OUTPUTS, &mut rng);
        cube_head.layers[2].weight.fill(0.0);
        Ok(Self {
            config,
            bounds,
            cell: bounds.size().min() / resolution as f64,
            encoding,
            vertex_head,
            cube_head,
        })
    }

    /// Rescales the offset bound for a grid of `resolution` cells.
    pub fn set_resolution(&mut self, resolution: usize) {
        self.cell = self.bounds.size().min() / resolution as f64;
    }

    pub fn offset_scale(&self) -> f64 {
        self.config.offset_bound * self.cell
    }

    pub fn lookup(&self, points: &[Vec3]) -> Result<Lookup, EncodingError> {
        let unit: Vec<Vec3> = points.iter().map(|p| self.bounds.to_unit(p)).collect();
        self.encoding.lookup(&unit)
    }

    fn encode(&self, points: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        let lk = self.lookup(points)?;
        Ok(kernels::gather(
            &self.encoding.table,
            self.encoding.config.features,
            &lk.index,
            &lk.weights,
            self.encoding.config.levels,
            8,
        ))
    }

    /// Vertex-head raw outputs, `n × 4`.
    pub fn vertex_raw(&self, points: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        let mut out = Vec::with_capacity(points.len() * VERTEX_OUTPUTS);
        for chunk in points.chunks(EVAL_CHUNK) {
            let enc = self.encode(chunk)?;
            out.extend(self.vertex_head.forward(&enc, chunk.len()));
        }
        Ok(out)
    }

    pub fn sdf_batch(&self, points: &[Vec3]) -> Result<VertexOutputs, EncodingError> {
        let raw = self.vertex_raw(points)?;
        let scale = self.offset_scale();
        let mut out = VertexOutputs {
            sdf: Vec::with_capacity(points.len()),
            offsets: Vec::with_capacity(points.len()),
        };
        for r in raw.chunks_exact(VERTEX_OUTPUTS) {
            out.sdf.push(r[0]);
            out.offsets
                .push(Vec3::new(r[1].tanh(), r[2].tanh(), r[3].tanh()) * scale);
        }
        Ok(out)
    }

    /// Only the signed distance, skipping the offset activation.
    pub fn sdf_values(&self, points: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        Ok(self
            .vertex_raw(points)?
            .chunks_exact(VERTEX_OUTPUTS)
            .map(|r| r[0])
            .collect())
    }

    pub fn sdf_eval(&self, p: &Vec3) -> Result<(f64, Vec3), EncodingError> {
        let out = self.sdf_batch(std::slice::from_ref(p))?;
        Ok((out.sdf[0], out.offsets[0]))
    }

    /// Cube-head raw outputs, `n × 21`.
    pub fn cube_raw(&self, centers: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        let mut out = Vec::with_capacity(centers.len() * CUBE_OUTPUTS);
        for chunk in centers.chunks(EVAL_CHUNK) {
            let enc = self.encode(chunk)?;
            out.extend(self.cube_head.forward(&enc, chunk.len()));
        }
        Ok(out)
    }

    pub fn cube_weights_batch(&self, centers: &[Vec3]) -> Result<Vec<CubeWeights>, EncodingError> {
        Ok(self
            .cube_raw(centers)?
            .chunks_exact(CUBE_OUTPUTS)
            .map(activate_cube)
            .collect())
    }

    pub fn cube_weights_eval(&self, center: &Vec3) -> Result<CubeWeights, EncodingError> {
        Ok(self.cube_weights_batch(std::slice::from_ref(center))?[0])
    }

    pub fn bind(&self, tape: &mut Tape) -> SdfVars {
        SdfVars {
            table: self.encoding.bind(tape),
            vertex: self.vertex_head.bind(tape),
            cube: self.cube_head.bind(tape),
        }
    }

    /// Vertex-head raw outputs on the tape, `n × 4`.
    pub fn vertex_raw_tape(&self, tape: &mut Tape, vars: &SdfVars, lookup: &Lookup) -> Var {
        let enc = self.encoding.encode_tape(tape, vars.table, lookup);
        SkipMlp::forward_tape(&vars.vertex, tape, enc)
    }

    /// Cube-head raw outputs on the tape, `n × 21`.
    pub fn cube_raw_tape(&self, tape: &mut Tape, vars: &SdfVars, lookup: &Lookup) -> Var {
        let enc = self.encoding.encode_tape(tape, vars.table, lookup);
        SkipMlp::forward_tape(&vars.cube, tape, enc)
    }

    /// Parameter buffers in declaration order: table, vertex head, cube
    /// head (weight then bias per layer).
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.encoding.table];
        for l in self.vertex_head.layers.iter().chain(&self.cube_head.layers) {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.encoding.table];
        for l in self.vertex_head.layers.iter_mut().chain(&mut self.cube_head.layers) {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }
}

/// Maps 21 raw values to positive α, β and γ in (0, 1).
pub fn activate_cube(raw: &[f64]) -> CubeWeights {
    CubeWeights {
        alpha: std::array::from_fn(|k| kernels::softplus(raw[k]) + WEIGHT_FLOOR),
        beta: std::array::from_fn(|k| kernels::softplus(raw[8 + k]) + WEIGHT_FLOOR),
        gamma: kernels::sigmoid(raw[20]),
    }
}
