//! File formats: meshes (OBJ, PLY), rasters (PFM, PGM, RLE masks, feature
//! maps), camera intrinsics and token streams.

pub mod obj;
pub mod ply;
pub mod raster;
pub mod tokens;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;

use crate::mesh::TriangleMesh;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{format}: {message}")]
    Format {
        format: &'static str,
        message: String,
    },
    #[error("{format} line {line}: {message}")]
    Line {
        format: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unsupported file extension {0:?}")]
    UnknownExtension(String),
}

impl IoError {
    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> IoError {
        IoError::Format {
            format,
            message: message.into(),
        }
    }
}

/// A mesh plus an optional object id per face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledMesh {
    pub mesh: TriangleMesh,
    pub face_objects: Option<Vec<u32>>,
}

impl LabeledMesh {
    pub fn plain(mesh: TriangleMesh) -> Self {
        LabeledMesh {
            mesh,
            face_objects: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<MeshFormat, IoError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(IoError::UnknownExtension(ext)),
        }
    }
}

/// Load an OBJ or PLY file, chosen by extension.
pub fn read_mesh(path: &Path) -> Result<LabeledMesh, IoError> {
    let format = MeshFormat::from_path(path)?;
    let r = BufReader::new(File::open(path)?);
    match format {
        MeshFormat::Obj => obj::read_obj(r),
        MeshFormat::Ply => ply::read_ply(r),
    }
}

pub fn write_mesh(path: &Path, mesh: &LabeledMesh) -> Result<(), IoError> {
    let format = MeshFormat::from_path(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        MeshFormat::Obj => obj::write_obj(&mut w, mesh)?,
        MeshFormat::Ply => ply::write_ply(&mut w, mesh)?,
    }
    std::io::Write::flush(&mut w)?;
    Ok(())
}

/// Mesh files directly inside `dir`, sorted by name.
pub fn list_meshes(dir: &Path) -> Result<Vec<std::path::PathBuf>, IoError> {
    let mut out: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && MeshFormat::from_path(p).is_ok())
        .collect();
    out.sort();
    Ok(out)
}
