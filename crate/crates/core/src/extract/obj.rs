use std::io::{BufRead, Write};

use crate::geometry::Vec3;

use super::mesh::TriMesh;
use super::ExtractError;

/// Writes `v` lines with 17 significant digits, optional `vn` lines and
/// 1-based `f` lines, LF-terminated.
pub fn write_obj<W: Write>(mesh: &TriMesh, out: &mut W, normals: bool) -> std::io::Result<()> {
    for p in &mesh.positions {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    if normals {
        for n in mesh.vertex_normals() {
            writeln!(out, "vn {:.16e} {:.16e} {:.16e}", n.x, n.y, n.z)?;
        }
        for [a, b, c] in &mesh.triangles {
            writeln!(out, "f {0}//{0} {1}//{1} {2}//{2}", a + 1, b + 1, c + 1)?;
        }
    } else {
        for [a, b, c] in &mesh.triangles {
            writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
        }
    }
    Ok(())
}

/// Reads vertices and faces; polygons are fan-triangulated, negative
/// indices count from the end, other statements are ignored.
pub fn read_obj<R: BufRead>(input: R) -> Result<TriMesh, ExtractError> {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let err = |message: String| ExtractError::ObjParse {
            line: line_no,
            message,
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 || !coords.iter().all(|c| c.is_finite()) {
                    return Err(err("vertex needs three finite coordinates".into()));
                }
                positions.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| err(format!("{t:?}: {e}")))?;
                        let resolved = if i > 0 {
                            i - 1
                        } else {
                            positions.len() as i64 + i
                        };
                        if i == 0 || resolved < 0 || resolved >= positions.len() as i64 {
                            return Err(err(format!("index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh::from_parts(positions, triangles))
}
