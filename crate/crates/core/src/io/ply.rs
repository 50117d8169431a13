//! Stanford PLY. Reads ASCII and both binary byte orders with any scalar
//! property types; writes binary little-endian with double coordinates.
//! Per-face object ids travel in a `uint object_id` face property.

use std::io::{BufRead, Write};

use super::{IoError, LabeledMesh};
use crate::geometry::PointCloud;
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar, String),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    Binary { little: bool },
}

struct Body {
    enc: Encoding,
    bytes: Vec<u8>,
    pos: usize,
    ascii: Vec<String>,
}

fn err(message: impl Into<String>) -> IoError {
    IoError::format("ply", message)
}

impl Body {
    fn read(&mut self, t: Scalar) -> Result<f64, IoError> {
        if self.enc == Encoding::Ascii {
            let tok = self
                .ascii
                .get(self.pos)
                .ok_or_else(|| err("body ends early"))?;
            self.pos += 1;
            return tok
                .parse::<f64>()
                .map_err(|_| err(format!("bad ascii value {tok:?}")));
        }
        let n = t.size();
        let raw = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| err("body ends early"))?;
        self.pos += n;
        let mut b = [0u8; 8];
        b[..n].copy_from_slice(raw);
        if self.enc == (Encoding::Binary { little: false }) {
            b[..n].reverse();
        }
        Ok(match t {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b),
        })
    }
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<(Encoding, Vec<Element>), IoError> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<(), IoError> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(err("header ends without end_header"));
        }
        Ok(())
    };
    next(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(err("missing ply magic"));
    }
    let mut enc = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next(&mut line)?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", f, _] => {
                enc = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Binary { little: true },
                    "binary_big_endian" => Encoding::Binary { little: false },
                    other => return Err(err(format!("unknown format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| err(format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let e = elements
                    .last_mut()
                    .ok_or_else(|| err("property before element"))?;
                let (c, i) = (Scalar::parse(c), Scalar::parse(i));
                match (c, i) {
                    (Some(c), Some(i)) => e.props.push(Property::List(c, i, name.to_string())),
                    _ => return Err(err(format!("bad list property types in {line:?}"))),
                }
            }
            ["property", t, name] => {
                let e = elements
                    .last_mut()
                    .ok_or_else(|| err("property before element"))?;
                let t = Scalar::parse(t).ok_or_else(|| err(format!("unknown type {t}")))?;
                e.props.push(Property::Scalar(t, name.to_string()));
            }
            _ => {
                return Err(err(format!(
                    "unrecognized header line {:?}",
                    line.trim_end()
                )))
            }
        }
    }
    Ok((enc.ok_or_else(|| err("missing format line"))?, elements))
}

pub fn read_ply<R: BufRead>(mut r: R) -> Result<LabeledMesh, IoError> {
    let (enc, elements) = parse_header(&mut r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let ascii = if enc == Encoding::Ascii {
        String::from_utf8_lossy(&bytes)
            .split_whitespace()
            .map(str::to_owned)
            .collect()
    } else {
        Vec::new()
    };
    let mut body = Body {
        enc,
        bytes,
        pos: 0,
        ascii,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    let mut has_labels = false;
    for e in &elements {
        for _ in 0..e.count {
            let mut xyz = [f64::NAN; 3];
            let mut poly: Vec<u32> = Vec::new();
            let mut label = None;
            for p in &e.props {
                match p {
                    Property::Scalar(t, name) => {
                        let v = body.read(*t)?;
                        match (e.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = v,
                            ("vertex", "y") => xyz[1] = v,
                            ("vertex", "z") => xyz[2] = v,
                            ("face", "object_id") => label = Some(v as u32),
                            _ => {}
                        }
                    }
                    Property::List(c, i, name) => {
                        let n = body.read(*c)?;
                        if !(n >= 0.0) {
                            return Err(err("negative list length"));
                        }
                        let keep = e.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n as usize {
                            let v = body.read(*i)?;
                            if keep {
                                if !(v >= 0.0) {
                                    return Err(err(format!("negative vertex index {v}")));
                                }
                                poly.push(v as u32);
                            }
                        }
                    }
                }
            }
            match e.name.as_str() {
                "vertex" => {
                    if xyz.iter().any(|c| !c.is_finite()) {
                        return Err(err(format!(
                            "vertex {} lacks finite x, y, z",
                            vertices.len()
                        )));
                    }
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    if poly.len() < 3 {
                        return Err(err("face with fewer than three vertices"));
                    }
                    has_labels |= label.is_some();
                    for k in 1..poly.len() - 1 {
                        faces.push([poly[0], poly[k], poly[k + 1]]);
                        labels.push(label.unwrap_or(0));
                    }
                }
                _ => {}
            }
        }
    }
    let mesh = TriangleMesh::new(vertices, faces);
    if !mesh.indices_valid() {
        return Err(err("face index out of range"));
    }
    Ok(LabeledMesh {
        mesh,
        face_objects: has_labels.then_some(labels),
    })
}

pub fn write_ply<W: Write>(w: &mut W, m: &LabeledMesh) -> Result<(), IoError> {
    if let Some(ids) = &m.face_objects {
        if ids.len() != m.mesh.faces.len() {
            return Err(err("one object id per face required"));
        }
    }
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar uint vertex_indices\n",
        m.mesh.vertices.len(),
        m.mesh.faces.len()
    );
    if m.face_objects.is_some() {
        header.push_str("property uint object_id\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    for v in &m.mesh.vertices {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for (i, f) in m.mesh.faces.iter().enumerate() {
        w.write_all(&[3])?;
        for idx in f {
            w.write_all(&idx.to_le_bytes())?;
        }
        if let Some(ids) = &m.face_objects {
            w.write_all(&ids[i].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Vertex-only PLY: `x y z` as doubles, then `u v` pixel coordinates and
/// `f0 ..` feature channels as floats when present.
pub fn write_ply_points<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<(), IoError> {
    if !cloud.is_consistent() {
        return Err(err("point cloud attributes differ in length"));
    }
    let channels = cloud
        .features
        .as_ref()
        .and_then(|f| f.first())
        .map_or(0, |f| f.len());
    if cloud
        .features
        .as_ref()
        .is_some_and(|f| f.iter().any(|x| x.len() != channels))
    {
        return Err(err("feature vectors differ in length"));
    }
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if cloud.pixels.is_some() {
        header.push_str("property float u\nproperty float v\n");
    }
    for c in 0..channels {
        header.push_str(&format!("property float f{c}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    for (i, p) in cloud.points.iter().enumerate() {
        for c in p.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(px) = &cloud.pixels {
            for c in px[i] {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        if let Some(f) = &cloud.features {
            for c in &f[i] {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn binary_roundtrip() {
        let m = LabeledMesh {
            mesh: corpus::torus(8, 6, 0.6, 0.2),
            face_objects: None,
        };
        let mut buf = Vec::new();
        write_ply(&mut buf, &m).unwrap();
        assert_eq!(read_ply(buf.as_slice()).unwrap(), m);

        let labeled = LabeledMesh {
            face_objects: Some((0..m.mesh.faces.len() as u32).map(|i| i % 3).collect()),
            ..m
        };
        let mut buf = Vec::new();
        write_ply(&mut buf, &labeled).unwrap();
        assert_eq!(read_ply(buf.as_slice()).unwrap(), labeled);
    }

    #[test]
    fn ascii_and_big_endian() {
        let src = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_index\nend_header\n0 0 0 9\n1 0 0 9\n1 1 0 9\n0 1 0 9\n4 0 1 2 3\n";
        let m = read_ply(src.as_bytes()).unwrap();
        assert_eq!(m.mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.mesh.vertices[2], Vec3::new(1.0, 1.0, 0.0));

        let mut be = b"ply\nformat binary_big_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar ushort vertex_indices\nend_header\n".to_vec();
        for v in [[0.0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.5, 0.0]] {
            for c in v {
                be.extend_from_slice(&c.to_be_bytes());
            }
        }
        be.push(3);
        for i in [0u16, 1, 2] {
            be.extend_from_slice(&i.to_be_bytes());
        }
        let m = read_ply(be.as_slice()).unwrap();
        assert_eq!(m.mesh.vertices[2], Vec3::new(0.0, 0.5, 0.0));
        assert_eq!(m.mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_ply("obj\n".as_bytes()).is_err());
        let truncated = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1\n";
        assert!(read_ply(truncated.as_bytes()).is_err());
        let bad_index = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n";
        assert!(read_ply(bad_index.as_bytes()).is_err());
    }

    #[test]
    fn point_cloud_header() {
        let mut cloud = PointCloud::from_points(vec![Vec3::new(1.0, 2.0, 3.0)]);
        cloud.pixels = Some(vec![[4.0, 5.0]]);
        cloud.features = Some(vec![vec![0.5, 0.25]]);
        let mut buf = Vec::new();
        write_ply_points(&mut buf, &cloud).unwrap();
        let back = read_ply(buf.as_slice()).unwrap();
        assert_eq!(back.mesh.vertices, cloud.points);
        assert!(back.mesh.faces.is_empty());
        assert_eq!(buf.len(), 188 + 24 + 8 + 8);
    }
}
