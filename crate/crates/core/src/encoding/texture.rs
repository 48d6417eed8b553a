use flexfit_autodiff::{kernels, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};

use super::hashgrid::{HashGrid, HashGridConfig, Lookup};
use super::mlp::{BoundDense, Mlp};
use super::EncodingError;

pub const UNIT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureConfig {
    pub encoding: HashGridConfig,
    pub hidden: usize,
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self {
            encoding: HashGridConfig::default(),
            hidden: 256,
        }
    }
}

/// Colour field: own hash grid, then a three-layer MLP over
/// `enc(p) ⧺ n ⧺ v` with a sigmoid output.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureField {
    pub config: TextureConfig,
    pub bounds: Aabb,
    pub encoding: HashGrid,
    pub mlp: Mlp,
}

#[derive(Clone, Debug)]
pub struct TextureVars {
    pub table: Var,
    pub layers: Vec<BoundDense>,
}

impl TextureVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.table];
        for l in &self.layers {
            out.push(l.weight);
            out.push(l.bias);
        }
        out
    }
}

fn check_unit(v: &Vec3, what: &'static str) -> Result<(), EncodingError> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL || !norm.is_finite() {
        return Err(EncodingError::NotUnit { what, norm });
    }
    Ok(())
}

impl TextureField {
    pub fn new(config: TextureConfig, bounds: Aabb, seed: u64) -> Result<Self, EncodingError> {
        if config.hidden == 0 || !bounds.is_valid() {
            return Err(EncodingError::InvalidConfig("texture hidden width or domain".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoding = HashGrid::new(config.encoding, &mut rng)?;
        let input = encoding.output_dim() + 6;
        let mlp = Mlp::new(&[input, config.hidden, config.hidden, 3], &mut rng);
        Ok(Self {
            config,
            bounds,
            encoding,
            mlp,
        })
    }

    pub fn lookup(&self, positions: &[Vec3]) -> Result<Lookup, EncodingError> {
        let unit: Vec<Vec3> = positions.iter().map(|p| self.bounds.to_unit(p)).collect();
        self.encoding.lookup(&unit)
    }

    /// `n × 6` block of normals followed by view directions.
    fn directions(normals: &[Vec3], views: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        let mut out = Vec::with_capacity(normals.len() * 6);
        for (n, v) in normals.iter().zip(views) {
            check_unit(n, "normal")?;
            check_unit(v, "view direction")?;
            out.extend_from_slice(n.as_slice());
            out.extend_from_slice(v.as_slice());
        }
        Ok(out)
    }

    pub fn eval_batch(
        &self,
        positions: &[Vec3],
        normals: &[Vec3],
        views: &[Vec3],
    ) -> Result<Vec<[f64; 3]>, EncodingError> {
        let rows = positions.len();
        if normals.len() != rows || views.len() != rows {
            return Err(EncodingError::InvalidConfig("mismatched texture input lengths".into()));
        }
        let dirs = Self::directions(normals, views)?;
        let lk = self.lookup(positions)?;
        let enc = kernels::gather(
            &self.encoding.table,
            self.encoding.config.features,
            &lk.index,
            &lk.weights,
            self.encoding.config.levels,
            8,
        );
        let x = kernels::concat_cols(&enc, self.encoding.output_dim(), &dirs, 6, rows);
        let y = self.mlp.forward(&x, rows);
        Ok(y.chunks_exact(3)
            .map(|c| [kernels::sigmoid(c[0]), kernels::sigmoid(c[1]), kernels::sigmoid(c[2])])
            .collect())
    }

    pub fn texture_eval(&self, position: &Vec3, normal: &Vec3, view: &Vec3) -> Result<[f64; 3], EncodingError> {
        Ok(self.eval_batch(
            std::slice::from_ref(position),
            std::slice::from_ref(normal),
            std::slice::from_ref(view),
        )?[0])
    }

    pub fn bind(&self, tape: &mut Tape) -> TextureVars {
        TextureVars {
            table: self.encoding.bind(tape),
            layers: self.mlp.bind(tape),
        }
    }

    /// RGB on the tape, `n × 3`.
    pub fn eval_tape(
        &self,
        tape: &mut Tape,
        vars: &TextureVars,
        lookup: &Lookup,
        normals: &[Vec3],
        views: &[Vec3],
    ) -> Result<Var, EncodingError> {
        let dirs = Self::directions(normals, views)?;
        let enc = self.encoding.encode_tape(tape, vars.table, lookup);
        let d = tape.constant(dirs, normals.len(), 6);
        let x = tape.concat(enc, d);
        let y = Mlp::forward_tape(&vars.layers, tape, x);
        Ok(tape.sigmoid(y))
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.encoding.table];
        for l in &mut self.mlp.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.encoding.table];
        for l in &self.mlp.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }
}
