use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dim, TriMesh};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from a file extension; anything but `.obj` is OFF.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("obj") => MeshFormat::Obj,
            _ => MeshFormat::Off,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or_else(|| Error::Parse {
        line,
        msg: "missing number".into(),
    })?;
    t.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {t:?}"),
    })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid index {tok:?}"),
    })
}

fn finish(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<TriMesh> {
    let dim = if vertices.iter().all(|v| v[2] == 0.0) {
        Dim::Two
    } else {
        Dim::Three
    };
    TriMesh::new(vertices, faces, dim)
}

fn parse_off(text: &str) -> Result<TriMesh> {
    // strip comments, keep 1-based line numbers
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, head) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let mut counts_line = None;
    if let Some(rest) = head.strip_prefix("OFF") {
        if !rest.trim().is_empty() {
            counts_line = Some((ln, rest.trim()));
        }
    } else {
        return Err(Error::Parse {
            line: ln,
            msg: "missing OFF header".into(),
        });
    }
    let (ln, counts) = match counts_line {
        Some(c) => c,
        None => lines.next().ok_or(Error::Parse {
            line: ln + 1,
            msg: "missing element counts".into(),
        })?,
    };
    let mut it = counts.split_whitespace();
    let nv = parse_usize(it.next().unwrap_or(""), ln)?;
    let nf = parse_usize(it.next().unwrap_or(""), ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: ln,
            msg: "unexpected end of file in vertex list".into(),
        })?;
        let mut t = l.split_whitespace();
        vertices.push([parse_f64(t.next(), ln)?, parse_f64(t.next(), ln)?, parse_f64(t.next(), ln)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: ln,
            msg: "unexpected end of file in face list".into(),
        })?;
        let mut t = l.split_whitespace();
        let k = parse_usize(t.next().unwrap_or(""), ln)?;
        if k != 3 {
            return Err(Error::NonTriangularFace { line: ln });
        }
        let mut f = [0usize; 3];
        for slot in f.iter_mut() {
            *slot = parse_usize(t.next().unwrap_or(""), ln)?;
        }
        faces.push(f);
    }
    finish(vertices, faces)
}

fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                vertices.push([parse_f64(t.next(), ln)?, parse_f64(t.next(), ln)?, parse_f64(t.next(), ln)?]);
            }
            Some("f") => {
                let idx: Vec<&str> = t.collect();
                if idx.len() != 3 {
                    return Err(Error::NonTriangularFace { line: ln });
                }
                let mut f = [0usize; 3];
                for (slot, tok) in f.iter_mut().zip(idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let v: i64 = head.parse().map_err(|_| Error::Parse {
                        line: ln,
                        msg: format!("invalid index {tok:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let resolved = if v > 0 { v - 1 } else { n + v };
                    if v == 0 || resolved < 0 {
                        return Err(Error::Parse {
                            line: ln,
                            msg: format!("index {v} out of range"),
                        });
                    }
                    *slot = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    finish(vertices, faces)
}

/// Reads an ASCII OFF or OBJ triangle mesh.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

/// Writes an ASCII mesh. Coordinates use the shortest round-trip decimal
/// form; planar meshes get `z = 0`.
pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let mut s = String::new();
    match format {
        MeshFormat::Off => {
            s.push_str("OFF\n");
            let _ = writeln!(s, "{} {} 0", mesh.num_vertices(), mesh.num_faces());
            for v in &mesh.vertices {
                let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
            }
            for f in &mesh.faces {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for v in &mesh.vertices {
                let _ = writeln!(s, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
            }
            for f in &mesh.faces {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

/// One value per line; blank lines and `#` comments are ignored. A single
/// header line that fails to parse is skipped.
pub fn load_scalar_field(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let tok = l.split(',').next().unwrap_or("").trim();
        match tok.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("invalid number {tok:?}"),
                })
            }
        }
    }
    Ok(out)
}

pub fn save_scalar_field(values: &[f64], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(s, "{v:?}");
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}
