//! Wavefront-style mesh snapshots: `v x y z` and `f i j k` lines with
//! 1-based indices, readable by any standard mesh viewer.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so export followed by import reproduces positions exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use glam::DVec3;

use super::{Mesh, MeshError};

fn io_err(path: &Path, source: std::io::Error) -> MeshError {
    MeshError::Io { path: path.display().to_string(), source }
}

/// Writes `mesh` to `path` in Wavefront text form.
pub fn export_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let path = path.as_ref();
    if mesh.vertex_count() == 0 || mesh.simplex_count() == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for v in mesh.vertices() {
        let p = v.position;
        writeln!(w, "v {} {} {}", p.x, p.y, p.z).map_err(|e| io_err(path, e))?;
    }
    for s in mesh.simplices() {
        let [a, b, c] = s.vertices;
        writeln!(w, "f {} {} {}", a + 1, b + 1, c + 1).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a Wavefront text mesh written by [`export_mesh`] (or any file
/// restricted to `v`/`f` triangle lines). Requires a closed surface.
pub fn import_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let parse_err = |line: usize, msg: String| MeshError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };

    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut positions: Vec<DVec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = idx + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "vertex line needs 3 coordinates".into()))?;
                    *c = tok
                        .parse()
                        .map_err(|e| parse_err(lineno, format!("bad coordinate {tok:?}: {e}")))?;
                }
                positions.push(DVec3::from_array(coord));
            }
            Some("f") => {
                let mut tri = [0usize; 3];
                for t in &mut tri {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "face line needs 3 indices".into()))?;
                    // Tolerate `f v/vt/vn` forms from other exporters.
                    let vtok = tok.split('/').next().unwrap_or(tok);
                    let one_based: usize = vtok
                        .parse()
                        .map_err(|e| parse_err(lineno, format!("bad index {tok:?}: {e}")))?;
                    if one_based == 0 {
                        return Err(parse_err(lineno, "face indices are 1-based".into()));
                    }
                    *t = one_based - 1;
                }
                if tokens.next().is_some() {
                    return Err(parse_err(lineno, "only triangle faces are supported".into()));
                }
                triangles.push(tri);
            }
            // Comments, empty lines and foreign directives are skipped.
            _ => {}
        }
    }

    Mesh::from_triangles(positions, triangles)
}
