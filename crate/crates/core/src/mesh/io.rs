use std::io::Write;
use std::path::Path;

use log::warn;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::ply;

/// A mesh read from disk, with the number of degenerate faces dropped.
#[derive(Debug, Clone)]
pub struct LoadedMesh {
    pub mesh: TriMesh,
    pub dropped_faces: usize,
}

enum Format {
    Obj,
    Ply,
}

fn format_for(path: &Path, head: Option<&[u8]>) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("obj") => Ok(Format::Obj),
        Some("ply") => Ok(Format::Ply),
        _ if head.is_some_and(|h| h.starts_with(b"ply")) => Ok(Format::Ply),
        _ => Err(Error::UnsupportedFormat(format!(
            "{} (expected .obj or .ply)",
            path.display()
        ))),
    }
}

/// Load an OBJ or PLY (ascii / binary little-endian) triangle mesh.
/// Degenerate faces are dropped and counted.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<LoadedMesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let loaded = match format_for(path, Some(&bytes))? {
        Format::Obj => {
            let text = std::str::from_utf8(&bytes).map_err(|_| Error::parse("OBJ", "file is not UTF-8"))?;
            read_obj(text)?
        }
        Format::Ply => read_ply_mesh(&bytes)?,
    };
    if loaded.dropped_faces > 0 {
        warn!("{}: dropped {} degenerate face(s)", path.display(), loaded.dropped_faces);
    }
    Ok(loaded)
}

/// Write `.obj` (ascii) or `.ply` (binary little-endian, f32 positions)
/// depending on the extension.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format_for(path, None)? {
        Format::Obj => write_obj(mesh).into_bytes(),
        Format::Ply => write_ply_mesh(mesh),
    };
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn obj_index(tok: &str, vertex_count: usize, line_no: usize) -> Result<u32> {
    let head = tok.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| Error::parse("OBJ", format!("line {line_no}: bad face index `{tok}`")))?;
    let idx = match raw {
        0 => return Err(Error::parse("OBJ", format!("line {line_no}: index 0 is invalid"))),
        r if r > 0 => r - 1,
        r => vertex_count as i64 + r,
    };
    if idx < 0 || idx >= vertex_count as i64 {
        return Err(Error::parse("OBJ", format!("line {line_no}: index `{tok}` out of range")));
    }
    Ok(idx as u32)
}

/// Parse OBJ text. Only `v` and `f` records are used; polygons are
/// fan-triangulated.
pub fn read_obj(text: &str) -> Result<LoadedMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = toks
                        .next()
                        .ok_or_else(|| Error::parse("OBJ", format!("line {line_no}: vertex needs 3 coordinates")))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| Error::parse("OBJ", format!("line {line_no}: bad coordinate `{tok}`")))?;
                }
                vertices.push(Vec3::from(c));
            }
            Some("f") => {
                let idx = toks
                    .map(|t| obj_index(t, vertices.len(), line_no))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse("OBJ", format!("line {line_no}: face needs 3 vertices")));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let (mesh, dropped_faces) = TriMesh::with_degenerate_dropped(vertices, faces)?;
    Ok(LoadedMesh { mesh, dropped_faces })
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 32 + mesh.face_count() * 24);
    for v in mesh.vertices() {
        s.push_str(&format!("v {} {} {}\n", v.x as f32, v.y as f32, v.z as f32));
    }
    for f in mesh.faces() {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
}

/// Parse a PLY mesh (`vertex` x/y/z, `face` vertex_indices).
pub fn read_ply_mesh(bytes: &[u8]) -> Result<LoadedMesh> {
    let data = ply::parse(bytes)?;
    let vert = data
        .element("vertex")
        .ok_or_else(|| Error::parse("PLY", "no vertex element"))?;
    let coord = |name: &str| {
        vert.scalar(name)
            .ok_or_else(|| Error::parse("PLY", format!("vertex element lacks `{name}`")))
    };
    let (xs, ys, zs) = (coord("x")?, coord("y")?, coord("z")?);
    let vertices: Vec<Vec3> = (0..vert.header.count)
        .map(|i| Vec3::new(xs[i], ys[i], zs[i]))
        .collect();
    let face = data.element("face").ok_or_else(|| Error::parse("PLY", "no face element"))?;
    let lists = face
        .list("vertex_indices")
        .or_else(|| face.list("vertex_index"))
        .ok_or_else(|| Error::parse("PLY", "face element lacks vertex_indices"))?;
    let n = vertices.len();
    let mut faces = Vec::with_capacity(lists.len());
    for (fi, poly) in lists.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::parse("PLY", format!("face {fi} has fewer than 3 vertices")));
        }
        let idx = poly
            .iter()
            .map(|&x| {
                if x < 0.0 || x as usize >= n {
                    Err(Error::parse("PLY", format!("face {fi} index {x} out of range")))
                } else {
                    Ok(x as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for k in 1..idx.len() - 1 {
            faces.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    let (mesh, dropped_faces) = TriMesh::with_degenerate_dropped(vertices, faces)?;
    Ok(LoadedMesh { mesh, dropped_faces })
}

/// Binary little-endian PLY with float32 positions and uchar/int face lists.
pub fn write_ply_mesh(mesh: &TriMesh) -> Vec<u8> {
    let header = ply::binary_header(&[
        ("vertex", mesh.vertex_count(), &["float x", "float y", "float z"]),
        ("face", mesh.face_count(), &["list uchar int vertex_indices"]),
    ]);
    let mut out = Vec::with_capacity(header.len() + mesh.vertex_count() * 12 + mesh.face_count() * 13);
    out.extend_from_slice(header.as_bytes());
    for v in mesh.vertices() {
        for c in v.iter() {
            out.write_all(&(*c as f32).to_le_bytes()).unwrap();
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for i in f {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = "# unit square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\nf 1/1 3/1 4/1\n";

    #[test]
    fn unit_square_obj() {
        let m = read_obj(QUAD).unwrap();
        assert_eq!(m.mesh.vertex_count(), 4);
        assert_eq!(m.mesh.face_count(), 2);
        assert_eq!(m.dropped_faces, 0);
    }

    #[test]
    fn zero_area_face_dropped() {
        let src = format!("{QUAD}f 1 2 2\n");
        let m = read_obj(&src).unwrap();
        assert_eq!(m.mesh.face_count(), 2);
        assert_eq!(m.dropped_faces, 1);
    }

    #[test]
    fn quads_and_negative_indices() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n").unwrap();
        assert_eq!(m.mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_errors() {
        assert!(read_obj("v 0 0\n").is_err());
        assert!(read_obj("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(matches!(read_obj("v 0 0 0\n"), Err(Error::EmptyMesh)));
    }

    #[test]
    fn unsupported_extension() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mesh.stl");
        std::fs::write(&p, b"solid x").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_mesh(dir.path().join("missing.obj")), Err(Error::File { .. })));
    }

    #[test]
    fn binary_ply_roundtrip_is_bit_exact_for_f32_positions() {
        let m = read_obj(QUAD).unwrap().mesh;
        let bytes = write_ply_mesh(&m);
        let back = read_ply_mesh(&bytes).unwrap().mesh;
        assert_eq!(back, m);
    }
}
