use std::io::{BufRead, Read, Write};

use crate::geometry::Vec3;

use super::RasterError;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const NORMAL_MAGIC: [u8; 8] = *b"MTFN\0\0\0\x01";

/// Row-major image with interleaved channels and values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn rgb(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), 3 * width * height);
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }
}

/// `10·log10(1/MSE)` with peak 1, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64, RasterError> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(RasterError::ShapeMismatch {
            left: (a.width, a.height, a.channels),
            right: (b.width, b.height, b.channels),
        });
    }
    if a.data.is_empty() {
        return Ok(PSNR_CAP);
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM (3 channels) or PGM (1 channel) with maxval 255.
pub fn write_pnm<W: Write>(img: &Image, out: &mut W) -> Result<(), RasterError> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(RasterError::Format(format!("cannot write {c}-channel image as PNM"))),
    };
    write!(out, "{magic}\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img.data.iter().map(|&v| to_byte(v)).collect();
    out.write_all(&bytes)?;
    Ok(())
}

fn header_token<R: BufRead>(input: &mut R) -> Result<String, RasterError> {
    let mut tok = String::new();
    loop {
        let mut b = [0u8];
        if input.read(&mut b)? == 0 {
            break;
        }
        let c = b[0] as char;
        if c == '#' && tok.is_empty() {
            let mut skip = String::new();
            input.read_line(&mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c);
    }
    if tok.is_empty() {
        return Err(RasterError::Format("truncated PNM header".into()));
    }
    Ok(tok)
}

/// Reads binary P5/P6 files with maxval 255.
pub fn read_pnm<R: BufRead>(input: &mut R) -> Result<Image, RasterError> {
    let magic = header_token(input)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(RasterError::Format(format!("unsupported PNM magic {m:?}"))),
    };
    let mut num = |what: &str| -> Result<usize, RasterError> {
        header_token(input)?
            .parse()
            .map_err(|_| RasterError::Format(format!("bad PNM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(RasterError::Format(format!("unsupported maxval {maxval}")));
    }
    let mut bytes = vec![0u8; width * height * channels];
    input
        .read_exact(&mut bytes)
        .map_err(|_| RasterError::Format("truncated PNM pixel data".into()))?;
    Ok(Image {
        width,
        height,
        channels,
        data: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
    })
}

/// Depth as a gray image: finite depths map linearly from nearest (1.0)
/// to farthest (1/255); empty pixels are 0.
pub fn depth_image(width: usize, height: usize, depth: &[f64]) -> Image {
    let finite = depth.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(d), h.max(d)));
    let span = hi - lo;
    let data = depth
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                0.0
            } else if span > 0.0 {
                (255.0 - 254.0 * (d - lo) / span) / 255.0
            } else {
                1.0
            }
        })
        .collect();
    Image::gray(width, height, data)
}

/// Normal map: 8-byte magic, little-endian u32 width and height, then
/// three f64 per pixel in row-major order.
pub fn write_normal_map<W: Write>(width: usize, height: usize, normals: &[Vec3], out: &mut W) -> Result<(), RasterError> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| RasterError::Format("image too large".into()));
    out.write_all(&NORMAL_MAGIC)?;
    out.write_all(&dim(width)?.to_le_bytes())?;
    out.write_all(&dim(height)?.to_le_bytes())?;
    for n in normals {
        for c in n.iter() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_normal_map<R: Read>(input: &mut R) -> Result<(usize, usize, Vec<Vec3>), RasterError> {
    let mut head = [0u8; 16];
    input
        .read_exact(&mut head)
        .map_err(|_| RasterError::Format("truncated normal map header".into()))?;
    if head[..8] != NORMAL_MAGIC {
        return Err(RasterError::Format("bad normal map magic".into()));
    }
    let width = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let height = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes")) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != width * height * 24 {
        return Err(RasterError::Format(format!(
            "normal map body has {} bytes, expected {}",
            body.len(),
            width * height * 24
        )));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((width, height, vals.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()))
}
