//! Flat binary checkpoint for [`SdfNetwork`].
//!
//! Layout (little-endian): magic `MTFK`, version `u32`, levels `u32`, table
//! size `u32`, features `u32`, base resolution `u32`, growth `f64`, hidden
//! width `u32`, offset bound `f64`, domain min/max `6 × f64`, cell `f64`,
//! layer count `u32` followed by `(input, output)` `u32` pairs, then every
//! parameter buffer as `f64` in declaration order.

use std::io::{Read, Write};

use crate::geometry::Aabb;

use super::hashgrid::HashGridConfig;
use super::sdf_net::{SdfConfig, SdfNetwork};
use super::EncodingError;

pub const MAGIC: &[u8; 4] = b"MTFK";
pub const VERSION: u32 = 1;

fn layers(net: &SdfNetwork) -> impl Iterator<Item = &super::mlp::Dense> {
    net.vertex_head.layers.iter().chain(&net.cube_head.layers)
}

pub fn save_checkpoint<W: Write>(net: &SdfNetwork, out: &mut W) -> Result<(), EncodingError> {
    let e = &net.config.encoding;
    out.write_all(MAGIC)?;
    for v in [VERSION, e.levels as u32, e.table_size as u32, e.features as u32, e.base_resolution as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&e.growth.to_le_bytes())?;
    out.write_all(&(net.config.hidden as u32).to_le_bytes())?;
    out.write_all(&net.config.offset_bound.to_le_bytes())?;
    for v in net.bounds.min.iter().chain(&net.bounds.max) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&net.cell.to_le_bytes())?;
    out.write_all(&(layers(net).count() as u32).to_le_bytes())?;
    for l in layers(net) {
        out.write_all(&(l.input as u32).to_le_bytes())?;
        out.write_all(&(l.output as u32).to_le_bytes())?;
    }
    for buf in net.buffers() {
        for v in buf {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], EncodingError> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| EncodingError::Checkpoint("truncated file".into()))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32, EncodingError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, EncodingError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn load_checkpoint<R: Read>(input: R) -> Result<SdfNetwork, EncodingError> {
    let mut r = Reader { inner: input };
    if &r.bytes::<4>()? != MAGIC {
        return Err(EncodingError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(EncodingError::Checkpoint(format!("unsupported version {version}")));
    }
    let levels = r.u32()? as usize;
    let table_size = r.u32()? as usize;
    let features = r.u32()? as usize;
    let base_resolution = r.u32()? as usize;
    let growth = r.f64()?;
    let hidden = r.u32()? as usize;
    let offset_bound = r.f64()?;
    let mut bounds = Aabb::default();
    for v in bounds.min.iter_mut().chain(bounds.max.iter_mut()) {
        *v = r.f64()?;
    }
    let cell = r.f64()?;
    let config = SdfConfig {
        encoding: HashGridConfig {
            levels,
            base_resolution,
            growth,
            table_size,
            features,
        },
        hidden,
        offset_bound,
    };
    let mut net = SdfNetwork::new(config, bounds, 1, 0)?;
    net.cell = cell;
    let count = r.u32()? as usize;
    let expected: Vec<(usize, usize)> = layers(&net).map(|l| (l.input, l.output)).collect();
    if count != expected.len() {
        return Err(EncodingError::Checkpoint(format!("expected {} layers, found {count}", expected.len())));
    }
    for (n, &(i, o)) in expected.iter().enumerate() {
        let found = (r.u32()? as usize, r.u32()? as usize);
        if found != (i, o) {
            return Err(EncodingError::Checkpoint(format!(
                "layer {n}: expected {i}x{o}, found {}x{}",
                found.0, found.1
            )));
        }
    }
    for buf in net.buffers_mut() {
        for v in buf.iter_mut() {
            *v = r.f64()?;
        }
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(EncodingError::Checkpoint("trailing bytes".into()));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn round_trip_is_bit_exact() {
        let config = SdfConfig {
            encoding: HashGridConfig {
                levels: 4,
                table_size: 1 << 10,
                ..Default::default()
            },
            hidden: 16,
            ..Default::default()
        };
        let mut net = SdfNetwork::new(config, Aabb::default(), 32, 3).unwrap();
        net.cube_head.layers[2].bias[20] = 0.25;
        let mut buf = Vec::new();
        save_checkpoint(&net, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MTFK");
        let back = load_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, net);
        let p = Vec3::new(0.1, 0.2, -0.3);
        assert_eq!(back.sdf_eval(&p).unwrap(), net.sdf_eval(&p).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let net = SdfNetwork::new(
            SdfConfig {
                hidden: 8,
                ..Default::default()
            },
            Aabb::default(),
            16,
            1,
        )
        .unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&net, &mut buf).unwrap();
        assert!(load_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(load_checkpoint(&extra[..]).is_err());
        let mut bad = buf;
        bad[0] = b'X';
        assert!(load_checkpoint(&bad[..]).is_err());
    }
}
