//! Wavefront OBJ. Faces are fan-triangulated; a `g object_<id>` or
//! `o object_<id>` statement tags the faces that follow.

use std::io::{BufRead, Write};

use super::{IoError, LabeledMesh};
use crate::mesh::{TriangleMesh, Vec3};

fn object_id(name: &str) -> Option<u32> {
    name.strip_prefix("object_")?.parse().ok()
}

pub fn read_obj<R: BufRead>(r: R) -> Result<LabeledMesh, IoError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut labels: Vec<Option<u32>> = Vec::new();
    let mut current = None;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let err = |message: String| IoError::Line {
            format: "obj",
            line: n + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let xyz: Vec<f64> = parts
                    .take(3)
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| err(format!("bad coordinate {s:?}: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
                    return Err(err("vertex needs three finite coordinates".into()));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for s in parts {
                    let head = s.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| err(format!("bad face index {s:?}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else {
                        vertices.len() as i64 + i
                    };
                    if i == 0 || resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                    labels.push(current);
                }
            }
            Some("g") | Some("o") => current = parts.next().and_then(object_id),
            _ => {}
        }
    }
    let face_objects = if labels.iter().any(|l| l.is_some()) {
        if labels.iter().any(|l| l.is_none()) {
            return Err(IoError::format(
                "obj",
                "some faces lie outside every object group",
            ));
        }
        Some(labels.into_iter().flatten().collect())
    } else {
        None
    };
    Ok(LabeledMesh {
        mesh: TriangleMesh::new(vertices, faces),
        face_objects,
    })
}

/// Coordinates are printed in shortest round-trip form, so reading the
/// file back reproduces every vertex exactly.
pub fn write_obj<W: Write>(w: &mut W, m: &LabeledMesh) -> Result<(), IoError> {
    if let Some(ids) = &m.face_objects {
        if ids.len() != m.mesh.faces.len() {
            return Err(IoError::format("obj", "one object id per face required"));
        }
    }
    for v in &m.mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    let mut group = None;
    for (i, f) in m.mesh.faces.iter().enumerate() {
        if let Some(ids) = &m.face_objects {
            if group != Some(ids[i]) {
                group = Some(ids[i]);
                writeln!(w, "g object_{}", ids[i])?;
            }
        }
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}
