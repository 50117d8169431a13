//! Scene composition: decode unified object streams into posed meshes and
//! merge objects into one mesh tagged with per-face object ids.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{canonicalize, CanonicalMesh, CodecError};
use crate::geometry::NormalizationFrame;
use crate::io::tokens::load_tokens;
use crate::io::{read_mesh, IoError, LabeledMesh};
use crate::mesh::TriangleMesh;
use crate::metrics::SceneObject;
use crate::pose::{transform_mesh, AffineTransform, GravityBox, PoseError};
use crate::sequence::{assemble, parse_with_mesh, ObjectRecord, SequenceError, UnifiedVocabulary};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("object {id}: {source}")]
    Object {
        id: u32,
        #[source]
        source: Box<AssemblyError>,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: IoError,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

/// Result of decoding one unified object stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedObject {
    pub transform: AffineTransform,
    /// Least-squares residual of the pose fit.
    pub residual: f64,
    pub canonical: CanonicalMesh,
    /// Canonical mesh mapped into the scene frame.
    pub mesh: TriangleMesh,
}

/// Tokens for one object whose `mesh` is already in its canonical unit cube.
pub fn encode_object(
    pose: &GravityBox,
    mesh: &TriangleMesh,
    vocab: UnifiedVocabulary,
) -> Result<Vec<u32>, AssemblyError> {
    let canon = canonicalize(mesh, vocab.base().grid)?;
    Ok(assemble(&ObjectRecord::encode(pose, &canon, vocab), vocab)?)
}

pub fn decode_object(
    tokens: &[u32],
    vocab: UnifiedVocabulary,
) -> Result<DecodedObject, AssemblyError> {
    let (record, canonical) = parse_with_mesh(tokens, vocab)?;
    let fit = crate::pose::pose_transform(&record.pose_tokens, vocab.base())?;
    let mesh = transform_mesh(&fit.transform, &canonical.to_mesh());
    Ok(DecodedObject {
        transform: fit.transform,
        residual: fit.residual,
        canonical,
        mesh,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_path: Option<PathBuf>,
    /// A unified object stream; its pose supplies the transform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_path: Option<PathBuf>,
    /// Local-to-scene map for `mesh_path` objects; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<AffineTransform>,
}

/// Objects of one scene. Relative paths resolve against the directory
/// holding the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    /// Maps metric coordinates into the scene frame the objects live in.
    #[serde(default)]
    pub frame: NormalizationFrame,
    pub objects: Vec<ManifestObject>,
}

impl SceneManifest {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |m: String| Err(AssemblyError::Manifest(m));
        if !(self.frame.half_extent > 0.0 && self.frame.half_extent.is_finite()) {
            return bad(format!(
                "frame half_extent must be positive, got {}",
                self.frame.half_extent
            ));
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                return bad(format!("duplicate object id {}", o.id));
            }
            match (&o.mesh_path, &o.token_path) {
                (Some(_), None) => {}
                (None, Some(_)) if o.transform.is_none() => {}
                (None, Some(_)) => {
                    return bad(format!(
                        "object {} has tokens and an explicit transform",
                        o.id
                    ))
                }
                _ => {
                    return bad(format!(
                        "object {} needs exactly one of mesh_path and token_path",
                        o.id
                    ))
                }
            }
            if o.transform.is_some_and(|t| !t.is_finite()) {
                return bad(format!("object {} has a non-finite transform", o.id));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SceneManifest, AssemblyError> {
        let file = |source: IoError| AssemblyError::File {
            path: path.to_owned(),
            source,
        };
        let text = std::fs::read_to_string(path).map_err(|e| file(e.into()))?;
        let m: SceneManifest = serde_json::from_str(&text).map_err(|e| file(e.into()))?;
        m.validate()?;
        Ok(m)
    }
}

fn load_object(o: &ManifestObject, base: &Path) -> Result<SceneObject, AssemblyError> {
    let file = |path: PathBuf| move |source: IoError| AssemblyError::File { path, source };
    if let Some(p) = &o.mesh_path {
        let path = base.join(p);
        let m = read_mesh(&path).map_err(file(path))?;
        return Ok(SceneObject {
            id: o.id,
            mesh: m.mesh,
            transform: o.transform.unwrap_or_default(),
        });
    }
    let path = base.join(o.token_path.as_ref().expect("validated manifest"));
    let f = load_tokens(&path).map_err(file(path.clone()))?;
    if !f.unified {
        return Err(AssemblyError::File {
            path,
            source: IoError::format("armt", "object streams must use the unified layout"),
        });
    }
    let vocab = UnifiedVocabulary::new(f.vocab)?;
    let d = decode_object(&f.tokens, vocab)?;
    Ok(SceneObject {
        id: o.id,
        mesh: d.canonical.to_mesh(),
        transform: d.transform,
    })
}

/// Resolve every manifest entry, decoding in parallel; sorted by id.
pub fn load_objects(
    manifest: &SceneManifest,
    base: &Path,
) -> Result<Vec<SceneObject>, AssemblyError> {
    manifest.validate()?;
    let mut objects = manifest
        .objects
        .par_iter()
        .map(|o| {
            load_object(o, base).map_err(|e| AssemblyError::Object {
                id: o.id,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    objects.sort_by_key(|o| o.id);
    Ok(objects)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedScene {
    pub mesh: TriangleMesh,
    pub face_objects: Vec<u32>,
    pub frame: NormalizationFrame,
}

impl ComposedScene {
    pub fn labeled(&self) -> LabeledMesh {
        LabeledMesh {
            mesh: self.mesh.clone(),
            face_objects: Some(self.face_objects.clone()),
        }
    }

    /// The scene in metric coordinates.
    pub fn to_metric(&self) -> ComposedScene {
        ComposedScene {
            mesh: self.frame.invert_mesh(&self.mesh),
            face_objects: self.face_objects.clone(),
            frame: NormalizationFrame::identity(),
        }
    }
}

/// Posed objects in ascending id order, concatenated.
pub fn compose_objects(
    objects: &[SceneObject],
    frame: NormalizationFrame,
) -> Result<ComposedScene, AssemblyError> {
    let mut order: Vec<&SceneObject> = objects.iter().collect();
    order.sort_by_key(|o| o.id);
    if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(AssemblyError::Manifest(format!(
            "duplicate object id {}",
            w[0].id
        )));
    }
    let posed: Vec<TriangleMesh> = order.par_iter().map(|o| o.composed()).collect();
    let face_objects = order
        .iter()
        .zip(&posed)
        .flat_map(|(o, m)| std::iter::repeat_n(o.id, m.faces.len()))
        .collect();
    Ok(ComposedScene {
        mesh: TriangleMesh::concat(&posed),
        face_objects,
        frame,
    })
}

pub fn compose_scene(
    manifest: &SceneManifest,
    base: &Path,
) -> Result<ComposedScene, AssemblyError> {
    compose_objects(&load_objects(manifest, base)?, manifest.frame)
}
