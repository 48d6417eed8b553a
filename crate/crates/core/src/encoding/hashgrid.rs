use flexfit_autodiff::{Tape, Var};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

use super::EncodingError;

pub const HASH_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashGridConfig {
    pub levels: usize,
    pub base_resolution: usize,
    pub growth: f64,
    pub table_size: usize,
    pub features: usize,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            base_resolution: 16,
            growth: 1.3819,
            table_size: 1 << 14,
            features: 2,
        }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<(), EncodingError> {
        let ok = self.levels >= 1
            && self.base_resolution >= 1
            && self.growth.is_finite()
            && self.growth >= 1.0
            && self.table_size >= 1
            && self.table_size <= u32::MAX as usize
            && self.features >= 1;
        if ok {
            Ok(())
        } else {
            Err(EncodingError::InvalidConfig(format!("{self:?}")))
        }
    }

    /// `N_l = ⌊N_min · b^l⌋`.
    pub fn resolution(&self, level: usize) -> usize {
        (self.base_resolution as f64 * self.growth.powi(level as i32)).floor() as usize
    }
}

/// Spatial hash `(i·p₁ ⊕ j·p₂ ⊕ k·p₃) mod T` in wrapping 32-bit arithmetic.
pub fn spatial_hash(i: u32, j: u32, k: u32, table_size: u32) -> u32 {
    (i.wrapping_mul(HASH_PRIMES[0]) ^ j.wrapping_mul(HASH_PRIMES[1]) ^ k.wrapping_mul(HASH_PRIMES[2]))
        % table_size
}

#[derive(Clone, Debug, PartialEq)]
struct Level {
    resolution: usize,
    dense: bool,
    offset: usize,
    entries: usize,
}

/// Multi-resolution hash-grid encoding. All levels share one flat table of
/// `num_entries() × F` features; coarse levels whose `(N+1)³` lattice fits
/// in `T` entries are stored densely, the rest are hashed.
#[derive(Clone, Debug, PartialEq)]
pub struct HashGrid {
    pub config: HashGridConfig,
    levels: Vec<Level>,
    pub table: Vec<f64>,
}

/// Precomputed corner indices and trilinear weights for a batch of points,
/// `L × 8` per point.
#[derive(Clone, Debug, Default)]
pub struct Lookup {
    pub index: Vec<u32>,
    pub weights: Vec<f64>,
}

impl Lookup {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

impl HashGrid {
    /// Zero-initialised tables.
    pub fn zeros(config: HashGridConfig) -> Result<Self, EncodingError> {
        config.validate()?;
        let mut levels = Vec::with_capacity(config.levels);
        let mut offset = 0;
        for l in 0..config.levels {
            let resolution = config.resolution(l);
            let lattice = (resolution + 1).pow(3);
            let dense = lattice <= config.table_size;
            let entries = if dense { lattice } else { config.table_size };
            levels.push(Level {
                resolution,
                dense,
                offset,
                entries,
            });
            offset += entries;
        }
        Ok(Self {
            config,
            table: vec![0.0; offset * config.features],
            levels,
        })
    }

    /// Tables drawn uniformly from `±1e-4`.
    pub fn new<R: Rng + ?Sized>(config: HashGridConfig, rng: &mut R) -> Result<Self, EncodingError> {
        let mut grid = Self::zeros(config)?;
        for v in &mut grid.table {
            *v = rng.random_range(-1e-4..1e-4);
        }
        Ok(grid)
    }

    pub fn output_dim(&self) -> usize {
        self.config.levels * self.config.features
    }

    pub fn num_entries(&self) -> usize {
        self.table.len() / self.config.features
    }

    pub fn level_resolution(&self, level: usize) -> usize {
        self.levels[level].resolution
    }

    pub fn level_is_dense(&self, level: usize) -> bool {
        self.levels[level].dense
    }

    /// Row of the flat table holding lattice corner `(i, j, k)` of `level`.
    pub fn entry(&self, level: usize, i: usize, j: usize, k: usize) -> usize {
        let lv = &self.levels[level];
        let local = if lv.dense {
            let n = lv.resolution + 1;
            i + n * (j + n * k)
        } else {
            spatial_hash(i as u32, j as u32, k as u32, lv.entries as u32) as usize
        };
        lv.offset + local
    }

    /// Corner entries and weights for points in `[0,1]³`. Coordinates
    /// outside are clamped onto the boundary.
    pub fn lookup(&self, points: &[Vec3]) -> Result<Lookup, EncodingError> {
        let per_point = self.config.levels * 8;
        let mut out = Lookup {
            index: Vec::with_capacity(points.len() * per_point),
            weights: Vec::with_capacity(points.len() * per_point),
        };
        for (n, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(EncodingError::NonFinite { point: n });
            }
            let p = p.map(|c| c.clamp(0.0, 1.0));
            for level in 0..self.config.levels {
                let res = self.levels[level].resolution;
                let mut cell = [0usize; 3];
                let mut t = [0.0; 3];
                for a in 0..3 {
                    let x = p[a] * res as f64;
                    let i = (x.floor() as usize).min(res - 1);
                    cell[a] = i;
                    t[a] = x - i as f64;
                }
                for c in 0..8 {
                    let bit = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
                    let mut w = 1.0;
                    for a in 0..3 {
                        w *= if bit[a] == 1 { t[a] } else { 1.0 - t[a] };
                    }
                    let e = self.entry(level, cell[0] + bit[0], cell[1] + bit[1], cell[2] + bit[2]);
                    out.index.push(e as u32);
                    out.weights.push(w);
                }
            }
        }
        Ok(out)
    }

    /// Encodes a batch into an `n × (L·F)` row-major matrix.
    pub fn encode_batch(&self, points: &[Vec3]) -> Result<Vec<f64>, EncodingError> {
        let lk = self.lookup(points)?;
        Ok(flexfit_autodiff::kernels::gather(
            &self.table,
            self.config.features,
            &lk.index,
            &lk.weights,
            self.config.levels,
            8,
        ))
    }

    pub fn encode(&self, p: &Vec3) -> Result<Vec<f64>, EncodingError> {
        self.encode_batch(std::slice::from_ref(p))
    }

    /// Registers the table as a tape parameter.
    pub fn bind(&self, tape: &mut Tape) -> Var {
        tape.param(self.table.clone(), self.num_entries(), self.config.features)
    }

    /// Encodes on the tape using a precomputed lookup.
    pub fn encode_tape(&self, tape: &mut Tape, table: Var, lookup: &Lookup) -> Var {
        tape.gather(
            table,
            lookup.index.clone(),
            lookup.weights.clone(),
            self.config.levels,
            8,
        )
    }
}
