//! Mesh tokenizers.
//!
//! Every scheme works on a [`CanonicalMesh`]: integer bin coordinates with
//! merged duplicates, no degenerate faces and a fixed vertex/face order.
//! Because two vertices of a canonical mesh never share a bin, a vertex is
//! identified by its coordinates alone; the decoders rely on that to
//! re-link vertices that a stream mentions more than once.

mod block_patch;
mod compact;
mod coordinate;
pub mod halfedge;
pub mod vocab;

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::mesh::{TriangleMesh, Vec3};
use crate::quantize::{QuantizationGrid, QuantizeError, QuantizedVertex};

pub use block_patch::{encode_block_patch, BlockPatchDecoder};
pub use compact::{encode_compact, CompactDecoder};
pub use coordinate::{encode_coordinate, CoordinateDecoder};
pub use vocab::{CompactOp, MeshVocabulary, PatchKind, Scheme, TokenClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("mesh has no faces after canonicalization")]
    EmptyAfterCanonicalization,
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error("token {token} at offset {offset} is outside the vocabulary of size {size}")]
    OutOfVocabulary {
        offset: usize,
        token: u32,
        size: u32,
    },
    #[error("unexpected {found} token at offset {offset}, expected {expected}")]
    Unexpected {
        offset: usize,
        expected: &'static str,
        found: &'static str,
    },
    #[error("stream ends at offset {offset} inside {context}")]
    Truncated {
        offset: usize,
        context: &'static str,
    },
    #[error("invalid stream at offset {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
}

impl CodecError {
    /// Token offset of a stream error, if the error concerns a stream.
    pub fn offset(&self) -> Option<usize> {
        match self {
            CodecError::OutOfVocabulary { offset, .. }
            | CodecError::Unexpected { offset, .. }
            | CodecError::Truncated { offset, .. }
            | CodecError::Invalid { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

/// A token stream tagged with the vocabulary it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenSequence {
    pub vocab: MeshVocabulary,
    pub tokens: Vec<u32>,
}

impl TokenSequence {
    pub fn new(vocab: MeshVocabulary, tokens: Vec<u32>) -> Self {
        Self { vocab, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whether every id fits the vocabulary.
    pub fn in_vocabulary(&self) -> bool {
        let size = self.vocab.size();
        self.tokens.iter().all(|&t| t < size)
    }
}

/// A mesh on a quantization grid in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CanonicalMesh {
    pub grid: QuantizationGrid,
    pub vertices: Vec<QuantizedVertex>,
    pub faces: Vec<[u32; 3]>,
}

fn zyx(q: &QuantizedVertex) -> [u32; 3] {
    [q[2], q[1], q[0]]
}

/// Rotate a face so its smallest index comes first, keeping the winding.
pub(crate) fn rotate_min_first(f: [u32; 3]) -> [u32; 3] {
    if f[0] <= f[1] && f[0] <= f[2] {
        f
    } else if f[1] <= f[2] {
        [f[1], f[2], f[0]]
    } else {
        [f[2], f[0], f[1]]
    }
}

/// Twice the quantized face area is zero.
pub(crate) fn collinear_bins(
    a: &QuantizedVertex,
    b: &QuantizedVertex,
    c: &QuantizedVertex,
) -> bool {
    let d = |p: &QuantizedVertex, q: &QuantizedVertex| {
        [
            q[0] as i64 - p[0] as i64,
            q[1] as i64 - p[1] as i64,
            q[2] as i64 - p[2] as i64,
        ]
    };
    let (u, v) = (d(a, b), d(a, c));
    u[1] * v[2] - u[2] * v[1] == 0
        && u[2] * v[0] - u[0] * v[2] == 0
        && u[0] * v[1] - u[1] * v[0] == 0
}

impl CanonicalMesh {
    pub fn empty(grid: QuantizationGrid) -> Self {
        Self {
            grid,
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    /// Canonical form of an integer mesh: merge equal bins, drop degenerate
    /// and repeated faces and unreferenced vertices, sort vertices by
    /// `(z, y, x)` and faces lexicographically after rotating each face so
    /// its lowest index leads.
    pub fn from_bins(
        grid: QuantizationGrid,
        vertices: &[QuantizedVertex],
        faces: &[[u32; 3]],
    ) -> Self {
        // unique bins, then sorted order
        let mut bins: Vec<QuantizedVertex> = Vec::new();
        let mut bin_of = Vec::with_capacity(vertices.len());
        let mut seen: HashMap<QuantizedVertex, usize> = HashMap::new();
        for q in vertices {
            let id = *seen.entry(*q).or_insert_with(|| {
                bins.push(*q);
                bins.len() - 1
            });
            bin_of.push(id);
        }

        let mut kept: Vec<[usize; 3]> = Vec::new();
        for f in faces {
            let t = [
                bin_of[f[0] as usize],
                bin_of[f[1] as usize],
                bin_of[f[2] as usize],
            ];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            if collinear_bins(&bins[t[0]], &bins[t[1]], &bins[t[2]]) {
                continue;
            }
            kept.push(t);
        }

        let mut used = vec![false; bins.len()];
        for t in &kept {
            for &i in t {
                used[i] = true;
            }
        }
        let mut order: Vec<usize> = (0..bins.len()).filter(|&i| used[i]).collect();
        order.sort_by_key(|&i| zyx(&bins[i]));
        let mut rank = vec![u32::MAX; bins.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }

        let mut out_faces: Vec<[u32; 3]> = kept
            .iter()
            .map(|t| rotate_min_first([rank[t[0]], rank[t[1]], rank[t[2]]]))
            .collect();
        out_faces.sort_unstable();
        out_faces.dedup();

        CanonicalMesh {
            grid,
            vertices: order.iter().map(|&i| bins[i]).collect(),
            faces: out_faces,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Dequantize to bin centers.
    pub fn to_mesh(&self) -> TriangleMesh {
        let g = self.grid;
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|q| Vec3::new(g.center(q[0]), g.center(q[1]), g.center(q[2])))
                .collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Quantize `mesh` onto `grid` and bring it into canonical form.
pub fn canonicalize(
    mesh: &TriangleMesh,
    grid: QuantizationGrid,
) -> Result<CanonicalMesh, CodecError> {
    let bins = mesh
        .vertices
        .iter()
        .map(|p| grid.quantize_point(p))
        .collect::<Result<Vec<_>, _>>()?;
    if !mesh.indices_valid() {
        return Err(CodecError::Invalid {
            offset: 0,
            reason: "face index out of range".into(),
        });
    }
    let c = CanonicalMesh::from_bins(grid, &bins, &mesh.faces);
    if c.is_empty() {
        return Err(CodecError::EmptyAfterCanonicalization);
    }
    Ok(c)
}

/// Encode a canonical mesh with the scheme of `vocab`.
pub fn encode(mesh: &CanonicalMesh, vocab: MeshVocabulary) -> TokenSequence {
    debug_assert_eq!(mesh.grid, vocab.grid);
    match vocab.scheme {
        Scheme::Coordinate => encode_coordinate(mesh),
        Scheme::Compact => encode_compact(mesh),
        Scheme::BlockPatch => encode_block_patch(mesh),
    }
}

/// Decode a whole stream.
pub fn decode(tokens: &[u32], vocab: MeshVocabulary) -> Result<CanonicalMesh, CodecError> {
    let mut dec = MeshDecoder::new(vocab);
    for &t in tokens {
        dec.push(t)?;
    }
    dec.finish()
}

/// Incremental face accumulator shared by the decoders. Rejects faces that
/// could not occur in a canonical mesh.
#[derive(Debug, Clone)]
pub(crate) struct FaceSink {
    grid: QuantizationGrid,
    index: HashMap<QuantizedVertex, u32>,
    vertices: Vec<QuantizedVertex>,
    faces: Vec<[u32; 3]>,
    face_set: HashSet<[u32; 3]>,
}

impl FaceSink {
    pub fn new(grid: QuantizationGrid) -> Self {
        Self {
            grid,
            index: HashMap::new(),
            vertices: Vec::new(),
            faces: Vec::new(),
            face_set: HashSet::new(),
        }
    }

    pub fn contains(&self, q: &QuantizedVertex) -> bool {
        self.index.contains_key(q)
    }

    pub fn intern(&mut self, q: QuantizedVertex) -> u32 {
        if let Some(&id) = self.index.get(&q) {
            return id;
        }
        let id = self.vertices.len() as u32;
        self.vertices.push(q);
        self.index.insert(q, id);
        id
    }

    pub fn add_face(&mut self, offset: usize, f: [u32; 3]) -> Result<(), CodecError> {
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(CodecError::Invalid {
                offset,
                reason: "face repeats a vertex".into(),
            });
        }
        let [a, b, c] = f.map(|i| self.vertices[i as usize]);
        if collinear_bins(&a, &b, &c) {
            return Err(CodecError::Invalid {
                offset,
                reason: "face has zero area".into(),
            });
        }
        if !self.face_set.insert(rotate_min_first(f)) {
            return Err(CodecError::Invalid {
                offset,
                reason: "face repeated".into(),
            });
        }
        self.faces.push(f);
        Ok(())
    }

    pub fn finish(self) -> CanonicalMesh {
        CanonicalMesh::from_bins(self.grid, &self.vertices, &self.faces)
    }
}

/// Streaming decoder over any scheme. Tokens are consumed left to right;
/// an error is reported at the first token that cannot extend a valid
/// stream.
#[derive(Debug, Clone)]
pub enum MeshDecoder {
    Coordinate(CoordinateDecoder),
    Compact(CompactDecoder),
    BlockPatch(BlockPatchDecoder),
}

impl MeshDecoder {
    pub fn new(vocab: MeshVocabulary) -> Self {
        match vocab.scheme {
            Scheme::Coordinate => MeshDecoder::Coordinate(CoordinateDecoder::new(vocab)),
            Scheme::Compact => MeshDecoder::Compact(CompactDecoder::new(vocab)),
            Scheme::BlockPatch => MeshDecoder::BlockPatch(BlockPatchDecoder::new(vocab)),
        }
    }

    pub fn push(&mut self, token: u32) -> Result<(), CodecError> {
        match self {
            MeshDecoder::Coordinate(d) => d.push(token),
            MeshDecoder::Compact(d) => d.push(token),
            MeshDecoder::BlockPatch(d) => d.push(token),
        }
    }

    /// True when the tokens consumed so far form a complete stream.
    pub fn at_boundary(&self) -> bool {
        match self {
            MeshDecoder::Coordinate(d) => d.at_boundary(),
            MeshDecoder::Compact(d) => d.at_boundary(),
            MeshDecoder::BlockPatch(d) => d.at_boundary(),
        }
    }

    /// Name of what the decoder is in the middle of, for truncation errors.
    pub fn pending(&self) -> &'static str {
        match self {
            MeshDecoder::Coordinate(d) => d.pending(),
            MeshDecoder::Compact(d) => d.pending(),
            MeshDecoder::BlockPatch(d) => d.pending(),
        }
    }

    pub fn consumed(&self) -> usize {
        match self {
            MeshDecoder::Coordinate(d) => d.consumed(),
            MeshDecoder::Compact(d) => d.consumed(),
            MeshDecoder::BlockPatch(d) => d.consumed(),
        }
    }

    pub fn finish(self) -> Result<CanonicalMesh, CodecError> {
        if !self.at_boundary() {
            return Err(CodecError::Truncated {
                offset: self.consumed(),
                context: self.pending(),
            });
        }
        Ok(match self {
            MeshDecoder::Coordinate(d) => d.into_sink().finish(),
            MeshDecoder::Compact(d) => d.into_sink().finish(),
            MeshDecoder::BlockPatch(d) => d.into_sink().finish(),
        })
    }
}

/// Classify a token or report it as out of vocabulary.
pub(crate) fn classify_at(
    vocab: &MeshVocabulary,
    offset: usize,
    token: u32,
) -> Result<TokenClass, CodecError> {
    vocab.classify(token).ok_or(CodecError::OutOfVocabulary {
        offset,
        token,
        size: vocab.size(),
    })
}

/// Per-scheme compression statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub resolution: u32,
    pub vocab_size: u32,
    pub total_tokens: usize,
    pub tokens_per_face: f64,
    /// Mean over meshes of `tokens / coordinate tokens`.
    pub mean_ratio: f64,
    /// `sum tokens / sum coordinate tokens`.
    pub aggregate_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub meshes: usize,
    pub faces: usize,
    pub schemes: Vec<SchemeStats>,
}

impl CompressionReport {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeStats> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }
}

/// Token counts of all three schemes relative to the coordinate baseline.
pub fn compression_report(
    corpus: &[TriangleMesh],
    grid: QuantizationGrid,
) -> Result<CompressionReport, CodecError> {
    if corpus.is_empty() {
        return Err(CodecError::EmptyAfterCanonicalization);
    }
    let canon = corpus
        .iter()
        .map(|m| canonicalize(m, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let faces: usize = canon.iter().map(|c| c.faces.len()).sum();
    let baseline: Vec<usize> = canon.iter().map(|c| 9 * c.faces.len()).collect();
    let base_total: usize = baseline.iter().sum();

    let schemes = Scheme::ALL
        .iter()
        .map(|&scheme| {
            let vocab = MeshVocabulary::new(scheme, grid);
            let counts: Vec<usize> = canon.iter().map(|c| encode(c, vocab).len()).collect();
            let total: usize = counts.iter().sum();
            let mean_ratio = counts
                .iter()
                .zip(&baseline)
                .map(|(&n, &b)| n as f64 / b as f64)
                .sum::<f64>()
                / counts.len() as f64;
            SchemeStats {
                scheme,
                resolution: grid.resolution(),
                vocab_size: vocab.size(),
                total_tokens: total,
                tokens_per_face: total as f64 / faces as f64,
                mean_ratio,
                aggregate_ratio: total as f64 / base_total as f64,
            }
        })
        .collect();
    Ok(CompressionReport {
        meshes: canon.len(),
        faces,
        schemes,
    })
}
