mod eval;
mod extract;
mod fit_shape;
mod invert;
mod render;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flexfit_core::extract::{read_obj, MeshReport, TriMesh};

use crate::error::CliError;

pub use eval::eval;
pub use extract::extract_mesh;
pub use fit_shape::fit_shape;
pub use invert::{invert, synthetic_vocabulary};
pub use render::render;

pub const METRICS_HEADER: &str = "metric,value,subject";

/// Rows of a `metric,value,subject` table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub rows: Vec<(String, String, String)>,
}

impl Metrics {
    pub fn push(&mut self, metric: &str, value: impl ToString, subject: &str) {
        self.rows.push((metric.to_string(), value.to_string(), subject.to_string()));
    }

    pub fn push_report(&mut self, r: &MeshReport, subject: &str) {
        self.push("watertight", r.watertight, subject);
        self.push("consistently_oriented", r.consistently_oriented, subject);
        self.push("euler_characteristic", r.euler_characteristic, subject);
        self.push("boundary_edges", r.boundary_edges, subject);
        self.push("non_manifold_edges", r.non_manifold_edges, subject);
        self.push("degenerate_triangles", r.degenerate_triangles, subject);
        if let Some(q) = r.min_quality {
            self.push("min_quality", q, subject);
        }
    }

    pub fn get(&self, metric: &str, subject: &str) -> Option<&str> {
        self.rows
            .iter()
            .find(|(m, _, s)| m == metric && s == subject)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, |w| {
            writeln!(w, "{METRICS_HEADER}")?;
            for (m, v, s) in &self.rows {
                writeln!(w, "{m},{v},{s}")?;
            }
            Ok(())
        })
    }
}

/// Writes `path` through a buffered writer, mapping I/O failures to
/// output errors.
pub(crate) fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::output(path, e))
}

pub(crate) fn create_out(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    Ok(dir.to_path_buf())
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::input(path, e))
}

pub(crate) fn load_mesh(path: &Path) -> Result<TriMesh, CliError> {
    read_obj(open(path)?).map_err(|e| CliError::input(path, e))
}
